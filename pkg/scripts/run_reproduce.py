"""Run named experiments through the CLI and collect their outputs.

    python scripts/run_reproduce.py graphcovers lattice-le --seed 0 --out results
"""

import argparse
import sys
from pathlib import Path

from gtqc.cli import cli_main
from gtqc.experiments import EXPERIMENTS


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("experiments", nargs="*", default=sorted(EXPERIMENTS), help="default: all of them")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    worst = 0
    for name in args.experiments:
        print(f"== {name}", flush=True)
        code = cli_main(["reproduce", name, "--seed", str(args.seed), "--out", str(args.out / name)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
