#!/usr/bin/env python3
"""Run the four CLI experiment drivers with standard settings into results/."""

import argparse
import os
import sys

from segfuse.cli import main

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--outdir", default="results")
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--seeds", type=int, default=10)
args = parser.parse_args()

os.makedirs(args.outdir, exist_ok=True)
jobs = [
    ["experiment", "kernel-sweep", "--seed", str(args.seed),
     "--seeds", str(args.seeds), "-o", f"{args.outdir}/kernel_sweep.csv"],
    ["experiment", "robustness", "--seed", str(args.seed),
     "--seeds", str(args.seeds), "--iterations", "120",
     "-o", f"{args.outdir}/robustness.csv"],
    ["experiment", "flexibility", "--rounds", "3", "--seed", str(args.seed),
     "-o", f"{args.outdir}/flexibility.csv"],
    ["experiment", "prop-check", "--instances", "500", "--seed", str(args.seed),
     "-o", f"{args.outdir}/prop_checks.jsonl"],
]
for job in jobs:
    print("segfuse", " ".join(job))
    rc = main(job)
    if rc != 0:
        sys.exit(rc)
print(f"wrote {len(jobs)} result files to {args.outdir}/")
