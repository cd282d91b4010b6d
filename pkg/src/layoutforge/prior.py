"""Canvas-level spatial prior: four 32x32 heatmaps over semantic regions.

Channel 0 is the title band, 1 the figure area, 2 the equation area and 3 the
annotation band. Each channel is a region indicator smoothed by a separable
three-tap kernel. Role strings map to channels through a substring table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .scene import BoundingBox, SceneRecord

CHANNELS = ("title", "figure", "equation", "annotation")

# (x0, x1, y0, y1) in normalized canvas coordinates, y down
DEFAULT_REGIONS = {
    "title": (0.0, 1.0, 0.0, 0.15),
    "figure": (0.0, 0.6, 0.15, 0.8),
    "equation": (0.6, 1.0, 0.15, 0.8),
    "annotation": (0.0, 1.0, 0.8, 1.0),
}

# first match wins, so more specific keys come first
DEFAULT_ROLE_TABLE = (
    ("title", "title"),
    ("equation", "equation"),
    ("formula", "equation"),
    ("label", "annotation"),
    ("annotation", "annotation"),
    ("caption", "annotation"),
    ("main figure", "figure"),
    ("figure", "figure"),
    ("geometric shape", "figure"),
    ("coordinate system", "figure"),
    ("curve", "figure"),
    ("vector", "figure"),
)


@dataclass(frozen=True)
class PriorConfig:
    grid: int = 32
    regions: dict = field(default_factory=lambda: dict(DEFAULT_REGIONS))
    role_table: tuple = DEFAULT_ROLE_TABLE
    smoothing: tuple[float, ...] = (0.25, 0.5, 0.25)

    @classmethod
    def from_dict(cls, data: dict) -> "PriorConfig":
        kw = {}
        if "grid" in data:
            kw["grid"] = int(data["grid"])
        if "regions" in data:
            kw["regions"] = {k: tuple(map(float, v)) for k, v in data["regions"].items()}
        if "role_table" in data:
            kw["role_table"] = tuple((str(k).lower(), str(v)) for k, v in data["role_table"])
        if "smoothing" in data:
            kw["smoothing"] = tuple(map(float, data["smoothing"]))
        cfg = cls(**kw)
        unknown = set(cfg.regions) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown prior regions {sorted(unknown)}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "PriorConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "regions": {k: list(v) for k, v in self.regions.items()},
            "role_table": [list(r) for r in self.role_table],
            "smoothing": list(self.smoothing),
        }


@dataclass(frozen=True)
class SpatialPrior:
    channels: np.ndarray  # (4, grid, grid), row index = y

    def __post_init__(self):
        c = self.channels
        if c.ndim != 3 or c.shape[0] != 4 or c.shape[1] != c.shape[2]:
            raise ValueError(f"prior must have shape (4, G, G), got {c.shape}")
        if c.min() < 0 or c.max() > 1:
            raise ValueError("prior values must lie in [0, 1]")
        c.setflags(write=False)

    def centroid(self, channel: int) -> tuple[float, float]:
        """Value-weighted centroid ``(x, y)`` of one channel in canvas units."""
        grid = self.channels[channel]
        g = grid.shape[0]
        centers = (np.arange(g) + 0.5) / g
        mass = grid.sum()
        return (float((grid.sum(axis=0) * centers).sum() / mass),
                float((grid.sum(axis=1) * centers).sum() / mass))


def role_channel(role: str, config: PriorConfig = PriorConfig()) -> int | None:
    r = role.lower()
    for key, channel in config.role_table:
        if key in r:
            return CHANNELS.index(channel)
    return None


def build_prior(record: SceneRecord | None = None, config: PriorConfig = PriorConfig()) -> SpatialPrior:
    """Render the region table onto the grid and smooth it.

    The prior describes the canvas, so every channel is populated regardless
    of which roles ``record`` contains.
    """
    g = config.grid
    centers = (np.arange(g) + 0.5) / g
    out = np.zeros((4, g, g))
    kernel = np.asarray(config.smoothing, dtype=float)
    for k, name in enumerate(CHANNELS):
        x0, x1, y0, y1 = config.regions[name]
        ind = (((centers >= y0) & (centers <= y1))[:, None]
               & ((centers >= x0) & (centers <= x1))[None, :]).astype(float)
        ind = correlate1d(ind, kernel, axis=0, mode="nearest")
        ind = correlate1d(ind, kernel, axis=1, mode="nearest")
        out[k] = np.clip(ind, 0.0, 1.0)
    return SpatialPrior(out)


def prior_attraction(box: BoundingBox, role: str, prior: SpatialPrior, gain: float,
                     config: PriorConfig = PriorConfig()) -> np.ndarray:
    """``gain`` times the vector from the box center to its role's channel centroid."""
    ch = role_channel(role, config)
    if ch is None:
        return np.zeros(2)
    cx, cy = prior.centroid(ch)
    return gain * np.array([cx - box.cx, cy - box.cy])
