#!/usr/bin/env python3
"""Regenerate the sample results bundled with the figgen test suite."""

import subprocess
import sys
import tempfile
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "figgen" / "tests" / "data"


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "cfg.toml"
        cfg.write_text(
            "[protocol]\nn_times = 27\nshots_per_time = 120\nseed = 31\n"
            "[analysis]\nsplits = [1, 3]\nbootstrap_seed = 9\n"
        )
        bc = tmp / "bc.toml"
        bc.write_text(
            "[protocol]\nn_times = 12\nt_max_ms = 30.0\n"
            "[analysis]\nsplits = [2, 3]\n"
        )
        run = tmp / "run"
        subprocess.run(
            ["quenchlab", "all", "--config", str(cfg), "--output", str(run),
             "--bootstrap", "49"],
            check=True,
        )
        subprocess.run(
            ["quenchlab", "compare-bc", "--config", str(bc), "--output", str(run),
             "--n-pixels", "16"],
            check=True,
        )
        DATA.mkdir(parents=True, exist_ok=True)
        (DATA / "sample_results.json").write_bytes((run / "results.json").read_bytes())
        (DATA / "sample_results_theory.json").write_bytes(
            (run / "results_theory.json").read_bytes()
        )
        (DATA / "sample_pair.json").write_bytes((run / "bc_pair.json").read_bytes())
    print(f"sample data refreshed in {DATA}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
