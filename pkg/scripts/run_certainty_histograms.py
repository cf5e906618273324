#!/usr/bin/env python3
"""Histogram each teacher's per-pixel output certainty on one benchmark seed.

Members trained at different temperatures emit certainty on visibly
different scales; these CSVs make the inconsistency issue plottable.
"""

import argparse
import os

from segfuse.fileio import histogram_to_csv, write_text_atomic
from segfuse.metrics import certainty_histogram
from segfuse.synth import BenchmarkConfig, gen_underperformer, make_benchmark

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--outdir", default="results")
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--bins", type=int, default=20)
args = parser.parse_args()

config = BenchmarkConfig()
bench = make_benchmark(config, args.seed)
os.makedirs(args.outdir, exist_ok=True)

for t, maps in enumerate(bench.teacher_probs):
    counts, edges = certainty_histogram(maps[0], args.bins)
    out = os.path.join(args.outdir, f"certainty_hist_teacher{t}.csv")
    write_text_atomic(out, histogram_to_csv(counts, edges))
    peak = maps[0].values.max(axis=2).mean()
    print(f"teacher {t} (temperature {bench.temperatures[t]:.1f}): "
          f"mean certainty {peak:.3f} -> {out}")

bad = gen_underperformer(bench.gts[0], seed=args.seed)
counts, edges = certainty_histogram(bad, args.bins)
out = os.path.join(args.outdir, "certainty_hist_underperformer.csv")
write_text_atomic(out, histogram_to_csv(counts, edges))
print(f"under-performer: mean certainty {bad.values.max(axis=2).mean():.3f} -> {out}")
