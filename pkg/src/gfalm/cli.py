"""Command-line interface.

Subcommands
-----------
solve    one configured run; writes iterations.csv, summary.json, final.field
rate     the same problem across several step sizes; writes per-tau run
         directories plus rate_report.json
flow     continuous-time integration; writes flow.csv, summary.json,
         final.field
verify   named acceptance suite(s) with a pass/fail table
probe    geometry diagnostics around a stored ground state; writes
         probe_report.json

Report commands also render PNG figures next to their data files; pass
``--no-figures`` for data-only output.  Exit codes: 0 success/converged,
1 completed but not converged (or a failed verify check), 2 configuration or
input error, 3 numerical failure.  The environment variable GFALM_THREADS
caps the parallelism of the ``rate`` sweep (absent means serial).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, plots
from .config import ConfigSchemaError, load_config, RunSetup
from .fieldio import read_field, write_field
from .fitting import FitError, RateFit, fit_log_decay
from .flow import FlowConfig, rk4_integrate
from .geometry import (
    GroundStateContext,
    TangentField,
    chart,
    coercivity_check,
    lojasiewicz_quotient,
    quadratic_growth_probe,
    sample_tangent,
    solve_r_of_xi,
)
from .grid import GridField, norm_h1, norm_lp
from .reference import make_initial
from .solver import run

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CSV_COLUMNS = (
    "n",
    "Q",
    "residual_linf",
    "residual_hm1",
    "lp1_norm",
    "err_h1",
    "lojasiewicz_q",
)
FLOW_CSV_COLUMNS = ("t", "Q", "constraint_drift", "err_h1")

RATE_FIT_WINDOW = (1e-9, 1e-2)


def _cell(v) -> str:
    """Deterministic CSV cell: repr round-trips floats exactly, None is empty."""
    if v is None:
        return ""
    return repr(v)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _open_csv(path: Path, columns):
    """Open a fresh CSV with its header written and flushed; rows are then
    appended (and flushed) one at a time so a crash leaves a parseable file."""
    fh = open(path, "w", encoding="utf-8", newline="\n")
    fh.write(",".join(columns) + "\n")
    fh.flush()
    return fh


def fit_error_series(n, err) -> RateFit:
    """Exponential-rate fit of an error sequence over the standard window
    [1e-9, 1e-2]; this is the fit the ``rate`` command applies per tau."""
    return fit_log_decay(
        np.asarray(n, dtype=float),
        np.asarray(err, dtype=float),
        window=RATE_FIT_WINDOW,
        min_points=3,
    )


def build_rate_report(per_tau: dict, config_hash: str | None = None) -> dict:
    """Assemble rate_report.json content from per-tau run data.

    ``per_tau`` maps tau -> {"n": [...], "err": [...], "iterations": int,
    "Q_final": float, "converged": bool, "status": str, "quantity": str}.
    The fit runs here, so synthetic series can be fed straight in.
    """
    runs = {}
    for tau, data in sorted(per_tau.items()):
        entry = {
            "iterations": data.get("iterations"),
            "Q_final": data.get("Q_final"),
            "converged": data.get("converged"),
            "status": data.get("status", "ok"),
            "quantity": data.get("quantity", "err_h1"),
        }
        try:
            fit = fit_error_series(data["n"], data["err"])
            entry.update(
                slope=fit.slope, r_squared=fit.r_squared, fit_points=fit.n_points
            )
        except (FitError, KeyError) as exc:
            entry.update(slope=None, r_squared=None, fit_error=str(exc))
        runs[f"{tau:g}"] = entry

    # The theory predicts faster decay for larger tau/(1+tau); observed
    # ordering is reported for inspection, never asserted.
    by_damping = sorted(per_tau, key=lambda t: t / (1.0 + t), reverse=True)
    report = {
        "fit_window": list(RATE_FIT_WINDOW),
        "runs": runs,
        "tau_by_expected_speed": [f"{t:g}" for t in by_damping],
        "ordering_note": "slopes are reported per tau; ordering is informational",
    }
    if config_hash is not None:
        report["config_hash"] = config_hash
    return report


def _run_one_solve(setup: RunSetup, tau: float, out_dir: Path) -> dict:
    """One solver run with streamed CSV records; shared by solve and rate."""
    out_dir.mkdir(parents=True, exist_ok=True)
    u0 = make_initial(setup.initial, setup.grid, setup.params.p)
    csv_path = out_dir / "iterations.csv"
    result: dict = {"status": "ok", "outcome": None}
    with _open_csv(csv_path, CSV_COLUMNS) as fh:

        def on_record(rec) -> None:
            fh.write(
                ",".join(
                    (
                        _cell(rec.n),
                        _cell(rec.Q),
                        _cell(rec.residual_linf),
                        _cell(rec.residual_hm1),
                        _cell(rec.lp1_norm),
                        _cell(rec.err_h1),
                        _cell(rec.lojasiewicz_q),
                    )
                )
                + "\n"
            )
            fh.flush()

        solver_cfg = dataclasses.replace(setup.solver, tau=tau, on_record=on_record)
        try:
            outcome = run(u0, setup.params, solver_cfg)
        except Exception as exc:
            # the CSV keeps its streamed prefix; leave a summary for the crash
            _write_json(
                out_dir / "summary.json",
                {
                    "config_hash": setup.config_hash,
                    "iterations_used": None,
                    "Q_final": None,
                    "lambda_final": None,
                    "converged": False,
                    "wall_time": None,
                    "error": str(exc),
                },
            )
            raise
        result["outcome"] = outcome

    write_field(out_dir / "final.field", outcome.final)
    summary = {
        "config_hash": setup.config_hash,
        "iterations_used": outcome.iterations_used,
        "Q_final": outcome.Q_final,
        "lambda_final": outcome.lambda_final,
        "converged": outcome.converged,
        "wall_time": outcome.wall_time,
        "tau": outcome.tau,
        "alpha": outcome.alpha,
        "residual_linf": (
            outcome.records[-1].residual_linf if outcome.records else None
        ),
        "max_decay_certificate": outcome.max_decay_certificate,
        "max_q_increase": outcome.max_q_increase,
        "min_utilde_lp1": outcome.min_utilde_lp1,
        "field_file": "final.field",
    }
    _write_json(out_dir / "summary.json", summary)
    return result


def cmd_solve(args) -> int:
    setup = load_config(args.config)
    out_dir = Path(args.out)
    result = _run_one_solve(setup, setup.solver.tau, out_dir)
    outcome = result["outcome"]
    if not args.no_figures and outcome.records:
        plots.convergence_figure(
            outcome.records, out_dir / "convergence.png", title="solve history"
        )
        plots.state_figure(outcome.final, out_dir / "state.png", title="final state")
    status = "converged" if outcome.converged else "not converged"
    print(
        f"{status} after {outcome.iterations_used} iterations; "
        f"Q = {outcome.Q_final:.12g}, lambda = {outcome.lambda_final:.12g}; "
        f"artifacts in {out_dir}"
    )
    return EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED


def cmd_rate(args) -> int:
    taus = [float(s) for s in args.taus.split(",") if s.strip()]
    if len(taus) < 2:
        raise ConfigSchemaError(
            f"rate needs at least 2 tau values, got {len(taus)} from {args.taus!r}"
        )
    setup = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    threads_env = os.environ.get("GFALM_THREADS")
    try:
        threads = max(1, int(threads_env)) if threads_env else 1
    except ValueError:
        raise ConfigSchemaError(
            f"GFALM_THREADS must be an integer, got {threads_env!r}"
        ) from None

    quantity = "err_h1" if setup.reference is not None else "residual_linf"

    def one(tau: float) -> tuple[float, dict]:
        sub = out_dir / f"tau_{tau:g}"
        try:
            outcome = _run_one_solve(setup, tau, sub)["outcome"]
        except Exception as exc:  # keep the sweep alive; report per tau
            return tau, {"status": f"failed: {exc}", "n": [], "err": []}
        recs = outcome.records
        vals = [
            getattr(r, quantity) if getattr(r, quantity) is not None else np.nan
            for r in recs
        ]
        return tau, {
            "status": "ok",
            "n": [r.n for r in recs],
            "err": vals,
            "iterations": outcome.iterations_used,
            "Q_final": outcome.Q_final,
            "converged": outcome.converged,
            "quantity": quantity,
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_tau = dict(pool.map(one, taus))
    else:
        per_tau = dict(one(t) for t in taus)

    report = build_rate_report(per_tau, config_hash=setup.config_hash)
    _write_json(out_dir / "rate_report.json", report)

    if not args.no_figures:
        series = {}
        for tau, data in per_tau.items():
            if data["status"] != "ok":
                continue
            key = f"{tau:g}"
            fit = None
            if report["runs"][key].get("slope") is not None:
                fit = fit_error_series(data["n"], data["err"])
            series[tau] = (data["n"], data["err"], fit)
        if series:
            plots.rate_figure(series, out_dir / "rate.png", quantity=quantity)

    for tau in sorted(per_tau):
        entry = report["runs"][f"{tau:g}"]
        slope = entry.get("slope")
        print(
            f"tau={tau:g}: {entry['status']}, slope="
            + (f"{slope:.5f}" if slope is not None else "n/a")
            + f", iterations={entry.get('iterations')}"
        )
    statuses = [d["status"] for d in per_tau.values()]
    if any(s != "ok" for s in statuses):
        return EXIT_NUMERICAL
    if not all(report["runs"][f"{t:g}"]["converged"] for t in taus):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_flow(args) -> int:
    setup = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    u0 = make_initial(setup.initial, setup.grid, setup.params.p)

    record_every = max(1, int(round(0.1 / args.dt)))
    csv_path = out_dir / "flow.csv"
    with _open_csv(csv_path, FLOW_CSV_COLUMNS) as fh:

        def on_record(rec) -> None:
            fh.write(
                ",".join(
                    (
                        _cell(rec.t),
                        _cell(rec.Q),
                        _cell(rec.constraint_drift),
                        _cell(rec.err_h1),
                    )
                )
                + "\n"
            )
            fh.flush()

        flow_cfg = FlowConfig(
            dt=args.dt,
            t_final=args.t_final,
            record_every=record_every,
            reference=setup.reference,
            allow_2d=args.allow_2d,
            on_record=on_record,
        )
        outcome = rk4_integrate(u0, setup.params, flow_cfg)

    write_field(out_dir / "final.field", outcome.final)
    summary = {
        "config_hash": setup.config_hash,
        "iterations_used": outcome.iterations_used,
        "Q_final": outcome.Q_final,
        "lambda_final": outcome.lambda_final,
        "converged": outcome.converged,
        "wall_time": outcome.wall_time,
        "dt": args.dt,
        "t_final": args.t_final,
        "max_q_increase": outcome.max_q_increase,
        "final_constraint_drift": outcome.records[-1].constraint_drift,
        "field_file": "final.field",
    }
    _write_json(out_dir / "summary.json", summary)
    if not args.no_figures:
        plots.flow_figure(outcome.records, out_dir / "flow.png")
        plots.state_figure(outcome.final, out_dir / "state.png", title="flow endpoint")
    print(
        f"integrated to t = {args.t_final:g} in {outcome.iterations_used} steps; "
        f"Q = {outcome.Q_final:.12g}, constraint drift = "
        f"{summary['final_constraint_drift']:.3e}; artifacts in {out_dir}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = list(acceptance.SUITES) if args.suite == "all" else [args.suite]
    out_dir = Path(args.out) if args.out else None
    figures_dir = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if not args.no_figures:
            figures_dir = out_dir

    all_results = {}
    failed: list[str] = []
    for name in suites:
        results = acceptance.run_suite(
            name,
            work_dir=out_dir if out_dir is not None else None,
            figures_dir=figures_dir,
        )
        all_results[name] = results
        print(f"== suite: {name} ==")
        print(acceptance.format_table(results))
        failed.extend(r.name for r in results if not r.passed)

    if out_dir is not None:
        payload = {
            suite: [
                {"name": r.name, "passed": r.passed, "detail": r.detail}
                for r in results
            ]
            for suite, results in all_results.items()
        }
        _write_json(out_dir / "verify_report.json", payload)

    if failed:
        print("failed checks:", file=sys.stderr)
        for name in failed:
            print(f"  {name}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_probe(args) -> int:
    setup = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    u_g = read_field(args.ground_state)
    if u_g.grid != setup.grid:
        raise ConfigSchemaError(
            "ground-state field grid does not match the config domain"
        )
    ctx = GroundStateContext.certify(u_g, setup.params)
    t0 = time.perf_counter()

    coer = coercivity_check(ctx)
    growth = quadratic_growth_probe(ctx, seed=setup.seed)

    rng = np.random.default_rng(setup.seed)
    xi0 = sample_tangent(ctx, rng)
    base = xi0.xi.values * (0.2 / norm_h1(xi0.xi))
    quotients = []
    for k in range(7):
        xi_k = TangentField(GridField(setup.grid, base / 2.0**k))
        r_k = solve_r_of_xi(xi_k, ctx)
        quotients.append(abs(r_k) / norm_lp(xi_k.xi, setup.params.p + 1.0) ** 2)
    tail = quotients[3:]

    xi_s = TangentField(GridField(setup.grid, base * (1e-3 / 0.2)))
    r_s = solve_r_of_xi(xi_s, ctx)
    u_s = chart(ctx, r_s, xi_s)
    loja = lojasiewicz_quotient(u_s, ctx)

    report = {
        "config_hash": setup.config_hash,
        "seed": setup.seed,
        "ground_state": {
            "Q": ctx.Q_g,
            "lambda": ctx.lambda_g,
            "residual_linf": ctx.residual_linf,
        },
        "coercivity": {
            "min_eig": coer.min_eig,
            "positive": coer.positive,
            "eigenvalues": list(coer.eigenvalues),
            "phase_mode_residual": coer.phase_mode_residual,
            "method": coer.method,
        },
        "growth": growth.to_dict(),
        "r_sweep": {
            "quotients": quotients,
            "tail_max_over_min": max(tail) / min(tail),
        },
        "lojasiewicz_sample": {
            "scale": 1e-3,
            "r": r_s,
            "quotient": loja,
        },
        "wall_time": time.perf_counter() - t0,
    }
    _write_json(out_dir / "probe_report.json", report)
    if not args.no_figures:
        plots.probe_figure(growth.to_dict(), coer.eigenvalues, out_dir / "probe.png")
    print(
        f"min tangent eigenvalue {coer.min_eig:.6f} "
        f"({'positive' if coer.positive else 'NOT positive'}); "
        f"{len(growth.samples)} growth samples; report in {out_dir}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfalm",
        description=(
            "Action ground states of the focusing NLS equation via the "
            "normalized gradient flow with asymptotic Lagrange multiplier."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument(
            "--out", required=out_required, help="output directory for artifacts"
        )
        p.add_argument(
            "--no-figures", action="store_true", help="skip PNG rendering (data only)"
        )

    p_solve = sub.add_parser("solve", help="run one configured solve")
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_rate = sub.add_parser("rate", help="sweep step sizes and fit decay rates")
    add_common(p_rate)
    p_rate.add_argument(
        "--taus", required=True, help="comma-separated step sizes, e.g. 1,0.5,0.2,0.1"
    )
    p_rate.set_defaults(func=cmd_rate)

    p_flow = sub.add_parser("flow", help="integrate the continuous flow with RK4")
    add_common(p_flow)
    p_flow.add_argument("--dt", type=float, required=True, help="time step")
    p_flow.add_argument(
        "--t-final", type=float, required=True, dest="t_final", help="final time"
    )
    p_flow.add_argument(
        "--allow-2d",
        action="store_true",
        dest="allow_2d",
        help="permit 2D integration despite the stiffness cost",
    )
    p_flow.set_defaults(func=cmd_flow)

    p_verify = sub.add_parser("verify", help="run an acceptance suite")
    p_verify.add_argument(
        "suite", choices=acceptance.SUITES + ("all",), help="which suite to run"
    )
    p_verify.add_argument(
        "--out", help="optional directory for the verify report and figures"
    )
    p_verify.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering (data only)"
    )
    p_verify.set_defaults(func=cmd_verify)

    p_probe = sub.add_parser(
        "probe", help="geometry diagnostics around a stored ground state"
    )
    add_common(p_probe)
    p_probe.add_argument(
        "--ground-state",
        required=True,
        dest="ground_state",
        help="field file containing the certified ground state",
    )
    p_probe.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        # configuration, schema, or input-data problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        # numerical failures (blow-up, lost decay, eigensolver breakdown)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
