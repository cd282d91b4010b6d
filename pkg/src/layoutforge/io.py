"""Frame directories, configuration files and deterministic JSON reports."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .diagnostics import FrameSequence
from .errors import EmptyInput, SchemaError

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
CONFIG_ENV = "LAYOUTFORGE_CONFIG"


def frame_paths(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".png")


def load_frame(path) -> np.ndarray:
    with Image.open(path) as im:
        mode = "RGBA" if im.mode in ("RGBA", "LA", "PA") or "transparency" in im.info else "RGB"
        return np.asarray(im.convert(mode))


def save_frame(path, frame: np.ndarray) -> None:
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(path)


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"{path}: manifest not found")
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    fps = data.get("source_fps")
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or fps <= 0:
        raise SchemaError("manifest.source_fps", "expected a positive number")
    return data


def load_frames(directory) -> list[np.ndarray]:
    paths = frame_paths(directory)
    if not paths:
        raise EmptyInput(f"{directory}: no PNG frames")
    return [load_frame(p) for p in paths]


def load_sequence(directory) -> FrameSequence:
    """A frame directory plus its manifest (``source_fps``, optional ``duration``)."""
    if not Path(directory).is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    manifest = read_manifest(directory)
    frames = load_frames(directory)
    return FrameSequence(tuple(frames), float(manifest["source_fps"]), manifest.get("duration"))


def write_sequence(directory, frames, source_fps: float, duration: float | None = None,
                   extra: dict | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        save_frame(d / f"frame_{i:05d}.png", f)
    manifest = {"source_fps": source_fps}
    if duration is not None:
        manifest["duration"] = duration
    manifest.update(extra or {})
    dump_json(d / MANIFEST, manifest)


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dump_json(path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(data))


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def default_config() -> dict:
    """Settings from the file named by ``LAYOUTFORGE_CONFIG``, or ``{}``."""
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    data = load_json(path)
    if not isinstance(data, dict):
        raise SchemaError(CONFIG_ENV, "config file must hold a JSON object")
    return data
