#!/usr/bin/env python3
"""Run every verification suite and summarize per-suite worst residuals.

Thin orchestration over the library runner; useful for quick regression
sweeps across seeds without going through the CLI. The variational suite
dominates the runtime (a four-dimensional quadrature), so --fast skips it.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from emtkit.suites import (  # noqa: E402
    SUITE_ORDER,
    RunConfig,
    build_report,
    report_json,
    run_checks,
    self_tolerance,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--points", type=int, default=16)
    ap.add_argument("--fast", action="store_true",
                    help="skip the variational suite")
    ap.add_argument("--report", type=Path, default=None,
                    help="write the full JSON report here")
    args = ap.parse_args(argv)

    suites = [s for s in SUITE_ORDER if not (args.fast and s == "variational")]
    cfg = RunConfig(suites=tuple(suites), points=args.points, seed=args.seed)

    t0 = time.perf_counter()
    outcomes = run_checks(cfg)
    wall = time.perf_counter() - t0

    by_suite = {}
    failed = 0
    for oc in outcomes:
        tol = self_tolerance(cfg, oc.check)
        ok = oc.passed(tol)
        failed += 0 if ok else 1
        row = by_suite.setdefault(oc.check.suite, {"checks": 0, "bad": 0,
                                                   "worst": 0.0})
        row["checks"] += 1
        row["bad"] += 0 if ok else 1
        if oc.check.mode == "below":
            v = oc.max_abs if oc.check.measure == "abs" else oc.max_rel
            row["worst"] = max(row["worst"], v)

    print(f"seed={args.seed} points={args.points} wall={wall:.1f}s")
    for suite in suites:
        row = by_suite.get(suite)
        if row is None:
            continue
        mark = "ok " if row["bad"] == 0 else "BAD"
        print(f"  {mark} {suite:22s} {row['checks']:2d} checks, "
              f"worst residual {row['worst']:.3e}")

    if args.report is not None:
        args.report.write_text(report_json(build_report(cfg, outcomes)))
        print(f"report: {args.report}")

    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
