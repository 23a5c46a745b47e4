#!/usr/bin/env python3
"""Full reference run: simulate, reconstruct, analyze, render figures.

Uses the tomography-grade grid (2.5 ms spacing) so the 500-shot
reconstruction is statistically meaningful, then renders the four
single-bundle figure kinds.  Takes a few minutes with the default
bootstrap depth; pass --quick for a fast smoke run.
"""

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/reference")
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shots = 80 if args.quick else 500
    resamples = 29 if args.quick else 299
    config = out / "config.toml"
    config.write_text(
        "[protocol]\n"
        "n_times = 27\n"
        f"shots_per_time = {shots}\n"
        f"seed = {args.seed}\n"
        "[analysis]\n"
        "splits = [1, 3]\n"
        f"bootstrap_seed = {args.seed}\n"
    )

    def run(cmd):
        print("+", " ".join(cmd))
        subprocess.run(cmd, check=True)

    run([
        "quenchlab", "all", "--config", str(config), "--output", str(out),
        "--bootstrap", str(resamples),
    ])

    figures = [
        {"kind": "time_evolution", "inputs": [str(out / "results.json")],
         "out_stem": "time_evolution"},
        {"kind": "scaling", "inputs": [str(out / "results.json")],
         "out_stem": "scaling"},
        {"kind": "conservation", "inputs": [str(out / "results_theory.json")],
         "out_stem": "conservation"},
        {"kind": "decomposition_check", "inputs": [str(out / "results.json")],
         "out_stem": "decomposition_check"},
    ]
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(figures, fh)
        spec_path = fh.name
    run(["figgen", "--spec", spec_path, "--out", str(out / "figures")])
    print(f"done -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
