#!/usr/bin/env python3
# Copyright (c) 2026, The GALW Authors
# SPDX-License-Identifier: Apache-2.0
"""Recompute the aggregates in a galw report.csv from its run rows.

Checks every run's normalized_sum against its per-task eval losses and the
equal-weighting run with the same seed, and every median row against the
run rows it summarizes. Exits nonzero on any mismatch above the tolerance.
"""

import argparse
import csv
import math
import statistics
import sys
from collections import defaultdict


def parse(path):
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("report")
    ap.add_argument("--tol", type=float, default=1e-12)
    args = ap.parse_args()

    rows = parse(args.report)
    if not rows:
        sys.exit("no rows")
    tasks = sorted(k for k in rows[0] if k.startswith("task_") and k.endswith("_eval_loss"))
    runs = [r for r in rows if r["row_type"] == "run"]
    medians = [r for r in rows if r["row_type"] == "median"]

    equal = {r["seed"]: r for r in runs if r["mode"] == "equal" and r["status"] == "ok"}
    errors = []
    worst = 0.0

    groups = defaultdict(list)
    for r in runs:
        if r["status"] != "ok" or not r["normalized_sum"]:
            continue
        base = equal.get(r["seed"])
        if base is None:
            errors.append(f"{r['label']} seed {r['seed']}: no equal-weighting run")
            continue
        want = math.fsum(float(r[t]) / float(base[t]) for t in tasks)
        got = float(r["normalized_sum"])
        err = abs(got - want) / max(abs(want), 1.0)
        worst = max(worst, err)
        if err > args.tol:
            errors.append(f"{r['label']} seed {r['seed']}: normalized_sum {got!r} != {want!r}")
        groups[(r["label"], r["num_groups"])].append(got)

    for m in medians:
        key = (m["label"], m["num_groups"])
        if not groups.get(key):
            if m["normalized_sum"]:
                errors.append(f"median {key}: value without ok runs")
            continue
        want = statistics.median(groups[key])
        got = float(m["normalized_sum"])
        err = abs(got - want) / max(abs(want), 1.0)
        worst = max(worst, err)
        if err > args.tol:
            errors.append(f"median {key}: {got!r} != {want!r}")

    for e in errors:
        print("mismatch:", e)
    print(f"checked {len(runs)} run rows and {len(medians)} median rows; max rel err {worst:.3g}")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
