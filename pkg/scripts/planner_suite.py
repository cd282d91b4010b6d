"""Plan a seeded suite of feasible scenes and report acceptance and final losses."""

import argparse
import time

import numpy as np

from layoutforge.planner import PlannerConfig, plan
from layoutforge.synthetic import feasible_scene


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--seed", type=int, default=0, help="planner initialization seed")
    args = p.parse_args()

    cfg = PlannerConfig(t_d=args.steps, seed=args.seed)
    start = time.perf_counter()
    results = [plan([feasible_scene(s)], cfg) for s in range(args.count)]
    elapsed = time.perf_counter() - start
    accepted = sum(r.all_accepted for r in results)
    repaired = sum(r.repair_rounds_used for r in results)
    terms = np.array([[b.l_coll, b.l_rel, b.l_bound] for r in results for b in r.breakdowns])
    print(f"accepted {accepted}/{args.count}, repair rounds {repaired}, {elapsed:.2f}s")
    for name, col in zip(("l_coll", "l_rel", "l_bound"), terms.T):
        print(f"{name:<8} mean {col.mean():.5f}  max {col.max():.5f}")
    for s, r in enumerate(results):
        if not r.all_accepted:
            b = r.breakdowns[0]
            print(f"  rejected seed {s}: coll {b.l_coll:.4f} rel {b.l_rel:.4f} bound {b.l_bound:.4f}")


if __name__ == "__main__":
    main()
