"""Command-line entry point: ``freqadmm {simulate,converge,compare,oracle}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .algorithms import require_smooth
from .errors import FreqAdmmError, InvariantViolationError, UnsupportedDisutilityError
from .harness import (
    ScenarioConfig,
    SimulationError,
    build_instance,
    compute_metrics,
    load_config,
    run_closed_loop,
    run_offline,
    write_trace_csv,
)
from .oracle import solve
from .plotting import plot_convergence, plot_traces

log = logging.getLogger("freqadmm")

EXIT_INVARIANT = 2


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.n is not None:
        cfg = replace(cfg, n=args.n)
    if getattr(args, "algo", None):
        cfg = cfg.with_algorithm(args.algo)
    if args.rho is not None:
        cfg = replace(cfg, algorithm=replace(cfg.algorithm, rho=args.rho))
    if args.model:
        cfg = replace(cfg, disutility=replace(cfg.disutility, model=args.model))
    if args.noise is not None:
        cfg = replace(cfg, noise=args.noise == "on")
    if args.comm is not None:
        cfg = replace(cfg, comm_mode="grid1d" if args.comm > 0 else "none", n0=args.comm)
    if getattr(args, "horizon", None) is not None:
        cfg = replace(cfg, horizon_s=args.horizon)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        trace = run_closed_loop(cfg)
    except SimulationError as exc:
        write_trace_csv(exc.trace, out / "trace.csv")
        _dump({"error": str(exc), "steps_completed": len(exc.trace)}, out / "error.json")
        raise
    write_trace_csv(trace, out / "trace.csv")
    metrics = compute_metrics(trace, cfg.schedule.times, omega0=cfg.grid.omega0)
    _dump(metrics, out / "metrics.json")
    plot_traces([trace], out / "frequency.png", cfg.schedule.times)
    print(f"max |dw| = {metrics['max_abs_dw_hz']:.4f} Hz, final disutility = "
          f"{metrics['final_disutility']:.4f}; wrote {out}/trace.csv")
    return 0


def cmd_converge(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kw = {"tol": args.tol} if args.tol is not None else {}
    if args.C is not None:
        kw["C"] = args.C
    try:
        report = run_offline(cfg, max_iter=args.max_iter, **kw)
    except InvariantViolationError as exc:
        print(f"INVARIANT VIOLATION: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "r_mw", "x_err_mw", "p_err", "v_lyap"])
        for k in range(len(report.residuals)):
            v = report.lyapunov[k] if k < len(report.lyapunov) else float("nan")
            w.writerow([k, repr(float(report.residuals[k])), repr(float(report.x_errors[k])),
                        repr(float(report.p_errors[k])), repr(float(v))])
    _dump(report.summary(), out / "report.json")
    plot_convergence(report, out / "convergence.png")
    if not report.rho_ok:
        print(f"step-size condition violated: rho={report.rho:.4g} > bound {report.rho_max:.4g}")
    print(f"converged={report.converged} after {report.iterations} iterations; "
          f"|r|={abs(report.final_residual):.2e}, ||x-x*||={report.final_x_error:.2e}")
    for name, ok in report.invariants.items():
        print(f"  {name}: {'n/a' if ok is None else ('pass' if ok else 'FAIL')}")
    return 0 if report.passed else EXIT_INVARIANT


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces, rows = [], []
    for algo in args.algos.split(","):
        run_cfg = cfg.with_algorithm(algo)
        try:
            trace = run_closed_loop(run_cfg)
        except UnsupportedDisutilityError as exc:
            print(f"{algo}: skipped ({exc})")
            continue
        write_trace_csv(trace, out / f"trace_{algo}.csv")
        m = compute_metrics(trace, cfg.schedule.times, omega0=cfg.grid.omega0)
        traces.append(trace)
        rows.append({"algorithm": algo, "max_abs_dw_hz": m["max_abs_dw_hz"],
                     "max_overshoot_hz": m["max_overshoot_hz"],
                     "final_disutility": m["final_disutility"]})
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    plot_traces(traces, out / "comparison.png", cfg.schedule.times)
    for row in rows:
        print(f"{row['algorithm']:>8}: max |dw| {row['max_abs_dw_hz']:.4f} Hz, "
              f"overshoot {row['max_overshoot_hz']:.4f} Hz, disutility {row['final_disutility']:.4f}")
    by = {r["algorithm"]: r for r in rows}
    if "dmadmm" in by and "pjadmm" in by:
        ok = by["dmadmm"]["max_overshoot_hz"] <= by["pjadmm"]["max_overshoot_hz"]
        print(f"expected direction (DM-ADMM overshoot <= PJ-ADMM): {'yes' if ok else 'no'}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    inst = build_instance(cfg)
    C = cfg.offline_c_mw if args.C is None else args.C
    sol = solve(inst.problem(C), tol=args.tol or 1e-9)
    print(json.dumps({"C_mw": C, **sol.to_dict()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="number of loads")
    common.add_argument("--rho", type=float)
    common.add_argument("--model", choices=["quadratic", "kinked", "asymmetric", "mixed"])
    common.add_argument("--noise", choices=["on", "off"])
    common.add_argument("--comm", type=int, metavar="N0", help="1D-grid half-width; 0 disables")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--tol", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="freqadmm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    algos = ["dmadmm", "pjadmm", "dual", "none"]

    s = sub.add_parser("simulate", parents=[common], help="closed-loop grid simulation")
    s.add_argument("--algo", choices=algos)
    s.add_argument("--horizon", type=float, help="seconds")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("converge", parents=[common], help="offline convergence with certificates")
    c.add_argument("--algo", choices=algos[:3])
    c.add_argument("--C", type=float, help="balance constant in MW")
    c.add_argument("--max-iter", type=int, default=100_000)
    c.set_defaults(func=cmd_converge)

    m = sub.add_parser("compare", parents=[common], help="paired closed-loop runs")
    m.add_argument("--algos", default="none,dmadmm,pjadmm,dual")
    m.add_argument("--horizon", type=float)
    m.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", parents=[common], help="print the centralized solution")
    o.add_argument("--C", type=float, help="balance constant in MW")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolationError as exc:
        print(f"INVARIANT VIOLATION: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FreqAdmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
