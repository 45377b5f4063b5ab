"""GTQC in random-feature mode on a Letter-format dataset.

Without ``--data`` a synthetic Letter-style set is generated. ``--data`` takes
a TU-format directory (for example Letter-med) or a JSON graph file.
"""

import argparse
import json
import sys
from pathlib import Path

from gtqc.data import load_json_graphs, parse_tudataset
from gtqc.experiments import run_letter_smoke
from gtqc.results import RunManifest, export_results


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--heads", type=int, default=4)
    ap.add_argument("--out", type=Path, default=Path("results/letter-smoke"))
    args = ap.parse_args()
    data = None
    if args.data is not None:
        data = parse_tudataset(args.data) if args.data.is_dir() else load_json_graphs(args.data)
    res = run_letter_smoke(args.seed, epochs=args.epochs, n_heads=args.heads, data=data)
    manifest = RunManifest(res.name, res.seed, res.config, timing={"seconds": round(res.seconds, 3)}, summary=res.summary)
    for label, hist in res.histories.items():
        export_results(hist, manifest, args.out, label=label)
    print(json.dumps(res.summary, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
