"""Desk-scale run of the first scenario with all three controllers.

Writes CSV outputs and a plotting script to the output directory, then
prints the per-controller summary and the constraint audit.
"""

import argparse
import os
import time

from glmbkit.experiment import audit_decisions, run_experiment, write_outputs
from glmbkit.scenario import load_config

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default=os.path.join(HERE, "..", "scenarios",
                                                      "scenario1_desk.yaml"))
    p.add_argument("--override", action="append", default=[])
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="results/scenario1_desk")
    args = p.parse_args()

    cfg = load_config(args.scenario, args.override)
    t0 = time.perf_counter()
    res = run_experiment(cfg, jobs=args.jobs)
    write_outputs(res, args.out, args.override)
    for ctrl, (mean, se, n, aborted) in res.summary().items():
        print(f"{ctrl:10s} {mean:8.2f} m  (se {se:.2f}, {n} runs, {aborted} aborted)")
    print(f"constraint audit: {len(audit_decisions(res))} violation(s)")
    print(f"elapsed {time.perf_counter() - t0:.0f} s, outputs in {args.out}")


if __name__ == "__main__":
    main()
