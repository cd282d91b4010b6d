"""Run the planner ablation variants on a synthetic suite and print a summary table."""

import argparse
import json

from layoutforge.ablation import VARIANTS, run_ablation
from layoutforge.synthetic import crowded_scene, swap_scene, synthetic_suite

SUITES = {
    "swap": swap_scene,
    "crowded": lambda s: [crowded_scene(s)],
    "general": synthetic_suite,
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--suite", choices=sorted(SUITES), default="swap")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", help="also write the full report here")
    args = p.parse_args()

    scenes = [SUITES[args.suite](s) for s in range(args.count)]
    rep = run_ablation(scenes, args.seeds, args.variants, jobs=args.jobs)
    cols = ("l_coll", "l_rel", "l_bound", "mid_max_iou", "mid_collision_rate", "acceptance_rate")
    print(f"{'variant':<12}" + "".join(f"{c:>20}" for c in cols))
    for v in rep.variants:
        print(f"{v:<12}" + "".join(f"{rep.summary[v][c]:>20.4f}" for c in cols))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
