"""Grid study for the dumbbell neckpinch: time at which |Rm|_max crosses a threshold.

    python scripts/neck_convergence.py --grids 100 200 400 --threshold 1e4
"""

import argparse
import time

from ricci_pinch import flow_engine as fe
from ricci_pinch import geometry_catalog as gc
from ricci_pinch import pinching_monitor as pm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--threshold", type=float, default=1e4)
    ap.add_argument("--neck-depth", type=float, default=0.8)
    args = ap.parse_args(argv)

    cfg = fe.IntegratorConfig(dt_initial=1e-3, t_max=1.0, blowup_threshold=args.threshold, sample_stride=10**9)
    print(f"{'M':>6} {'t_hit':>20} {'steps':>8} {'min margin':>11} {'seconds':>8}")
    for M in args.grids:
        t0 = time.perf_counter()
        trace = fe.run(gc.dumbbell_warped(M=M, neck_depth=args.neck_depth), cfg)
        ok = all(v is pm.Verdict.PASS for v in trace.verdicts)
        margin = min(s.margin for s in trace.samples)
        print(f"{M:>6} {trace.t_final:>20.15f} {trace.steps:>8} {margin:>11.4f} {time.perf_counter() - t0:>8.1f}"
              + ("" if ok else "  VERDICT FAILURE"))
        if trace.termination is not fe.Termination.BLOWUP:
            print(f"       stopped early: {trace.termination.value} {trace.message}")


if __name__ == "__main__":
    main()
