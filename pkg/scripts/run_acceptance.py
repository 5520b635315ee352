#!/usr/bin/env python3
"""Build the training runs the acceptance suite reads.

Runs land under runs/acceptance (or $COQE_ACCEPT_RUNS) keyed by config
hash, so finished runs are skipped and the script is safe to re-run.
The full set takes a few hours on one CPU core; --only restricts to
presets matching a prefix.
"""

import argparse
import importlib.util
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

spec = importlib.util.spec_from_file_location(
    "acceptance_gate", REPO / "tests" / "test_acceptance.py")
gate = importlib.util.module_from_spec(spec)
spec.loader.exec_module(gate)

RUNS = [
    ("desk-regression-linear", (0, 1, 2)),
    ("desk-regression-linear-coqe", (0, 1, 2)),
    ("desk-regression-combination-coqe", (0,)),
    ("desk-arithmetic-baseline", (0, 1, 2)),
    ("desk-arithmetic-masked", (0, 1, 2)),
    ("desk-classification-conflict-coqe", (0, 1, 2)),
    ("desk-classification-conflict-coqe-nonoise", (0, 1, 2)),
    ("desk-classification-conflict-baseline", (0, 1, 2)),
    ("desk-classification-baseline", (0,)),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", action="append", default=[],
                        help="preset name prefix; may repeat")
    args = parser.parse_args()
    selected = [
        (preset, seeds) for preset, seeds in RUNS
        if not args.only or any(preset.startswith(p) for p in args.only)
    ]
    for preset, seeds in selected:
        for seed in seeds:
            t0 = time.time()
            run_dir = gate.ensure_run(preset, seed)
            print(f"[{preset} s{seed}] {time.time() - t0:.0f}s {run_dir}",
                  flush=True)
    print("ACCEPTANCE RUNS DONE", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
