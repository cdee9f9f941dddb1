#!/usr/bin/env python3
"""Run the 3D critical-scaling sweep preset and print its summary."""

import argparse
import json
import os

from percohom.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    argv = ["sweep", "--preset", "boolean-critical-3d", "--out", args.out,
            "--threads", str(args.threads)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    code = cli_main(argv)
    if code != 0:
        raise SystemExit(code)
    runs = sorted(p for p in os.listdir(args.out) if p.startswith("sweep-"))
    summary = json.load(open(os.path.join(args.out, runs[-1], "summary.json")))
    print(json.dumps(summary, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
