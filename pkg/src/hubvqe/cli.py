"""Command-line interface: synth / estimate / mitigate / budget / simulate /
vqe / verify / reproduce-paper over JSON configs, with CSV/JSON reports and
matplotlib figures rendered next to the delimited output.

Exit codes: 0 success, 1 validation error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import profile_for, write_circuit_jsonl
from .config import ConfigError, RunConfig
from .lattice import LatticeSpec, exact_ground_energy, snake_ordering
from .mitigation import (MitigationPlan, combined_cost, detectable_mu,
                         poisson_model_mc, residual_mu, verification_cost)
from .resources import closed_form, counted, reconcile
from .reproduce import TABLE_COLUMNS, format_table, reproduction_table
from .sampling import dm_budget, energy_budget, fd_budget, sharing_map, wallclock
from .simulator import vqe
from .synthesis import full_ansatz
from .verify import oracle_suite

ESTIMATE_COLUMNS = ("rows", "cols", "v_sites", "n_blk", "gate_set", "source",
                    "n_1q", "n_2q", "n_components", "depth", "duration_us",
                    "mu", "mu_components")
TRACE_COLUMNS = ("iter", "energy", "grad_norm", "shots_used")


def _thread_env() -> int:
    try:
        return max(1, int(os.environ.get("HUBVQE_THREADS", "1")))
    except ValueError:
        return 1


def _resolve_args(args) -> None:
    """Fill unset flags from --config, then from built-in defaults.

    Explicit flags win over the config file; the config wins over defaults.
    """
    config = RunConfig.from_file(args.config) if getattr(args, "config", None) \
        else None
    defaults = {
        "rows": config.lattice.rows if config else getattr(args, "default_rows", 2),
        "cols": config.lattice.cols if config else getattr(args, "default_cols", 2),
        "t": config.lattice.t if config else 1.0,
        "u": config.lattice.u if config else 4.0,
        "n_up": config.lattice.n_up if config else None,
        "n_down": config.lattice.n_down if config else None,
        "gateset": config.gate_set if config else "silicon",
        "ordering": config.ordering if config else "horizontal",
        "scheme": config.prep_scheme if config else "simple",
        "mu": config.mu if config else None,
        "lam": config.lam if config else 2.0,
        "seed": config.seed if config else 0,
        "shots": config.shots if config else None,
        "n_qpu": config.n_qpu if config else 200,
        "n_iter": config.n_iter if config else 100,
        "step_size": config.step_size if config else 0.05,
        "threshold": config.threshold if config else 1e-6,
        "max_iter": config.max_iter if config else 500,
        "blocks": config.n_blk if config else None,
    }
    for name, value in defaults.items():
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, value)
    if getattr(args, "mu", "na") is None:
        args.mu = getattr(args, "mu_fallback", 2.0)
    if getattr(args, "lam", "na") is None:
        args.lam = 2.0
    if getattr(args, "seed", "na") is None:
        args.seed = 0
    if getattr(args, "shots", "na") is None:
        args.shots = getattr(args, "shots_fallback", 2000)
    if getattr(args, "blocks", None) is None and hasattr(args, "rows"):
        args.blocks = args.rows * args.cols  # default one block per site


def _spec_from_args(args) -> LatticeSpec:
    cfg = {"rows": args.rows, "cols": args.cols, "t": args.t, "u": args.u}
    if args.n_up is not None:
        cfg["n_up"] = args.n_up
    if args.n_down is not None:
        cfg["n_down"] = args.n_down
    return LatticeSpec.from_config(cfg)


def _add_lattice_args(p, rows=2, cols=2):
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--u", type=float, default=None)
    p.add_argument("--n-up", type=int, default=None, dest="n_up")
    p.add_argument("--n-down", type=int, default=None, dest="n_down")
    p.set_defaults(default_rows=rows, default_cols=cols)


def _outdir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _figure_backend():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in columns})


def _emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, default=float, sort_keys=True))


def cmd_synth(args) -> int:
    spec = _spec_from_args(args)
    circ = full_ansatz(spec, args.blocks, args.gateset,
                       ordering=snake_ordering(spec, args.ordering),
                       scheme=args.scheme)
    profile = profile_for(args.gateset)
    report = counted(circ, profile)
    summary = {"lattice": f"{spec.rows}x{spec.cols}", "n_blk": args.blocks,
               "gate_set": args.gateset, "ordering": args.ordering,
               "prep_scheme": args.scheme, **report.as_dict()}
    outdir = _outdir(args)
    if outdir:
        write_circuit_jsonl(circ, str(outdir / "circuit.jsonl"))
        (outdir / "synth_summary.json").write_text(
            json.dumps(summary, indent=2, default=float))
        print(f"wrote {outdir / 'circuit.jsonl'}")
    print(f"{spec.rows}x{spec.cols} {args.gateset} n_blk={args.blocks}: "
          f"n_1q={report.n_1q:.0f} n_2q={report.n_2q:.0f} "
          f"components={report.n_components} depth={report.depth} "
          f"duration={report.duration * 1e6:.2f} us")
    _emit(args, summary)
    return 0


def cmd_estimate(args) -> int:
    spec = _spec_from_args(args)
    profile = profile_for(args.gateset)
    cf = closed_form(spec.rows, spec.cols, args.blocks, args.gateset,
                     prep_scheme=args.scheme)
    rows = [cf.as_dict()]
    deltas = []
    if not args.formula_only:
        circ = full_ansatz(spec, args.blocks, args.gateset, scheme=args.scheme)
        meas = counted(circ, profile)
        rows.append(meas.as_dict())
        deltas = [d.__dict__ for d in reconcile(cf, meas)]
    table_rows = []
    for r in rows:
        table_rows.append({
            "rows": spec.rows, "cols": spec.cols, "v_sites": spec.n_sites,
            "n_blk": args.blocks, "gate_set": args.gateset, "source": r["source"],
            "n_1q": r["n_1q"], "n_2q": r["n_2q"], "n_components": r["n_components"],
            "depth": r["depth"], "duration_us": r["duration"] * 1e6,
            "mu": r["mu"], "mu_components": r["mu_components"],
        })
        print(f"{r['source']:12s} n_1q={r['n_1q']:.0f} n_2q={r['n_2q']:.0f} "
              f"duration={r['duration'] * 1e6:.2f} us mu={r['mu']:.4f}")
    for d in deltas:
        print(f"  delta {d['name']}: {100 * d['relative']:.2f}% "
              f"({'ok' if d['within_tolerance'] else 'OUT OF TOLERANCE'})")
    outdir = _outdir(args)
    if outdir:
        _write_csv(outdir / "estimate.csv", ESTIMATE_COLUMNS, table_rows)
        print(f"wrote {outdir / 'estimate.csv'}")
    _emit(args, {"reports": rows, "reconciliation": deltas})
    return 0 if all(d["within_tolerance"] for d in deltas) else 2


def cmd_mitigate(args) -> int:
    mu, lam = args.mu, args.lam
    c_s, p_s, p_one = verification_cost(mu)
    mu_s, reduction = residual_mu(mu)
    payload = {
        "mu": mu, "lam": lam, "mu_d": detectable_mu(mu),
        "P_S_one": p_one, "P_S": p_s, "C_S": c_s,
        "mu_S": mu_s, "reduction": reduction,
        "C_SE": combined_cost(mu, lam),
    }
    if args.simulate:
        res = poisson_model_mc(mu, n_components=args.components,
                               trials=args.trials, seed=args.seed)
        payload["monte_carlo"] = {
            "trials": res.trials, "n_components": res.n_components,
            "pass_fraction": res.pass_fraction,
            "pass_fraction_sigma": res.pass_fraction_sigma,
            "pass_fraction_analytic": res.pass_fraction_analytic,
            "residual_mu": res.residual_mu,
            "residual_mu_sigma": res.residual_mu_sigma,
            "residual_mu_analytic": res.residual_mu_analytic,
        }
    print(json.dumps(payload, indent=2, sort_keys=True))
    outdir = _outdir(args)
    if outdir and args.simulate:
        plt = _figure_backend()
        grid = np.linspace(0.05, max(4.0, mu * 1.5), 120)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax1.plot(grid, [1 / verification_cost(m)[1] for m in grid], label="1/P_S")
        ax1.errorbar([mu], [1 / payload["monte_carlo"]["pass_fraction"]],
                     fmt="o", label="Monte Carlo")
        ax1.set_xlabel("mean error count")
        ax1.set_ylabel("verification cost")
        ax1.legend()
        ax2.plot(grid, [residual_mu(m)[0] for m in grid], label="residual count")
        ax2.errorbar([mu], [payload["monte_carlo"]["residual_mu"]], fmt="o",
                     label="Monte Carlo")
        ax2.set_xlabel("mean error count")
        ax2.legend()
        fig.tight_layout()
        fig.savefig(outdir / "mitigation.png", dpi=150)
        print(f"wrote {outdir / 'mitigation.png'}")
    return 0


def cmd_budget(args) -> int:
    spec = _spec_from_args(args)
    v = spec.n_sites
    smap = sharing_map(spec, args.blocks)
    eb = energy_budget(v)
    n_para = smap.eq14_estimate
    fd = fd_budget(v, n_para, n_sh=4 * smap.n_eq)
    dm = dm_budget(v, smap.n_eq, n_para)
    c_se = combined_cost(args.mu, args.lam)
    t_circ = closed_form(spec.rows, spec.cols, args.blocks, args.gateset).duration
    wc = wallclock(t_circ, eb.m_e, dm.m_grad, c_se, n_qpu=args.n_qpu,
                   n_iter=args.n_iter)
    payload = {
        "V": v, "N_blk": args.blocks, "N_eq": smap.n_eq,
        "N_para_site": smap.n_para_site, "N_para": n_para,
        "N_para_exact": smap.n_para,
        "Var_E_j": eb.var_e_j, "M_Ej": eb.m_ej, "M_E": eb.m_e,
        "M_grad_fd": fd.m_grad_fd, "delta_opt": fd.delta_opt,
        "Var_grad": fd.var_grad,
        "M_dm": dm.m_dm, "M_grad_j": dm.m_grad_j, "M_grad": dm.m_grad,
        "C_SE": c_se, "T_circ": t_circ,
        "M_E_star": wc.m_e_mitigated, "M_grad_star": wc.m_grad_mitigated,
        "T_E": wc.t_e, "T_grad": wc.t_grad,
        "T_per_iteration": wc.per_iteration, "T_total": wc.total,
        "n_qpu": args.n_qpu, "n_iter": args.n_iter,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    from .simulator import AnsatzEngine, mitigated_energy
    engine = AnsatzEngine(spec, args.blocks, args.gateset)
    theta = np.zeros(engine.n_params) if args.theta is None \
        else np.asarray(json.loads(args.theta), dtype=float)
    payload = {"lattice": f"{spec.rows}x{spec.cols}", "n_blk": args.blocks,
               "energy_analytic": engine.energy(theta)}
    if spec.n_wires <= 14:
        payload["energy_exact_diagonalization"] = exact_ground_energy(spec)
    if args.shots:
        plan = MitigationPlan(lam=args.lam)
        est = mitigated_energy(spec, theta, args.blocks, args.mu, plan,
                               args.shots, args.seed, args.gateset)
        payload.update({
            "energy_sampled_raw": est.raw,
            "energy_verified": est.verified_mu,
            "energy_extrapolated": est.extrapolated,
            "pass_fraction": est.pass_fraction_mu,
            "shots_used": est.shots_used,
        })
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_vqe(args) -> int:
    spec = _spec_from_args(args)
    trace = vqe(spec, args.blocks, step_size=args.step_size,
                threshold=args.threshold, max_iter=args.max_iter,
                mode=args.mode, gate_set=args.gateset, mu=args.mu,
                shots=args.shots, seed=args.seed)
    payload = {
        "lattice": f"{spec.rows}x{spec.cols}", "n_blk": args.blocks,
        "mode": args.mode, "energy": trace.energy,
        "converged": trace.converged, "aborted": trace.aborted,
        "iterations": len(trace.iterations) - 1,
        "theta": list(map(float, trace.theta)),
    }
    if spec.n_wires <= 14:
        payload["energy_exact_diagonalization"] = exact_ground_energy(spec)
    print(json.dumps({k: v for k, v in payload.items() if k != "theta"},
                     indent=2, sort_keys=True))
    outdir = _outdir(args)
    if outdir:
        _write_csv(outdir / "vqe_trace.csv", TRACE_COLUMNS, trace.rows())
        (outdir / "vqe_result.json").write_text(
            json.dumps(payload, indent=2, default=float))
        plt = _figure_backend()
        fig, ax = plt.subplots(figsize=(6, 4))
        its = [r["iter"] for r in trace.rows()]
        ax.plot(its, [r["energy"] for r in trace.rows()], marker=".")
        if "energy_exact_diagonalization" in payload:
            ax.axhline(payload["energy_exact_diagonalization"], ls="--",
                       color="k", label="exact diagonalization")
            ax.legend()
        ax.set_xlabel("iteration")
        ax.set_ylabel("energy / t")
        fig.tight_layout()
        fig.savefig(outdir / "vqe_trace.png", dpi=150)
        print(f"wrote {outdir / 'vqe_trace.csv'} and vqe_trace.png")
    return 0


def cmd_verify(args) -> int:
    if args.lattice:
        rows, cols = (int(x) for x in args.lattice.lower().split("x"))
        spec = LatticeSpec(rows, cols)
    else:
        spec = LatticeSpec(1, 2)
    results = oracle_suite(spec, fast=args.fast)
    failed = 0
    for res in results:
        mark = "pass" if res.passed else "FAIL"
        print(f"[{mark}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} oracle checks passed")
    return 0 if failed == 0 else 2


def cmd_reproduce(args) -> int:
    rows = reproduction_table(skip_counted=args.skip_counted)
    print(format_table(rows))
    failures = [r for r in rows if not r.passed]
    outdir = _outdir(args)
    if outdir:
        _write_csv(outdir / "reproduction.csv", TABLE_COLUMNS,
                   [r.as_dict() for r in rows])
        (outdir / "reproduction.json").write_text(
            json.dumps([r.as_dict() for r in rows], indent=2, default=float))
        plt = _figure_backend()
        fig, ax = plt.subplots(figsize=(7, 0.35 * len(rows) + 1.5))
        names = [r.id for r in rows]
        deltas = [100 * r.delta_vs_published for r in rows]
        colors = ["tab:blue" if r.passed else "tab:red" for r in rows]
        ax.barh(names, deltas, color=colors)
        ax.axvline(0, color="k", lw=0.8)
        ax.set_xlabel("computed vs published (%)")
        ax.invert_yaxis()
        fig.tight_layout()
        fig.savefig(outdir / "reproduction.png", dpi=150)
        print(f"wrote {outdir / 'reproduction.csv'} and reproduction.png")
    if args.json:
        print(json.dumps([r.as_dict() for r in rows], indent=2, default=float))
    print(f"{len(rows) - len(failures)}/{len(rows)} rows within tolerance")
    return 0 if not failures else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hubvqe",
        description="Hubbard-model VQE synthesis, resource estimation and "
                    "desk-scale verification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an ansatz circuit")
    _add_lattice_args(p)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--gateset", choices=("silicon", "superconducting"),
                   default=None)
    p.add_argument("--ordering", choices=("horizontal", "vertical"),
                   default=None)
    p.add_argument("--scheme", choices=("simple", "spin_sector"), default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="closed-form and counted resources")
    _add_lattice_args(p, rows=5, cols=5)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--gateset", choices=("silicon", "superconducting"),
                   default=None)
    p.add_argument("--scheme", choices=("simple", "spin_sector"), default=None)
    p.add_argument("--formula-only", action="store_true",
                   help="skip circuit synthesis (closed forms only)")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mitigate", help="mitigation analytics and Monte Carlo")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--components", type=int, default=304)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("budget", help="shot budgets and wall-clock projection")
    _add_lattice_args(p, rows=5, cols=5)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--gateset", choices=("silicon", "superconducting"),
                   default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--n-qpu", type=int, default=None, dest="n_qpu")
    p.set_defaults(mu_fallback=2.0)
    p.add_argument("--n-iter", type=int, default=None, dest="n_iter")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("simulate", help="statevector energy, optionally sampled")
    _add_lattice_args(p, rows=1, cols=2)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--gateset", choices=("silicon", "superconducting"),
                   default=None)
    p.add_argument("--theta", default=None, help="JSON list of parameters")
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--mu", type=float, default=None)
    p.set_defaults(mu_fallback=0.5)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("vqe", help="run the gradient-descent driver")
    _add_lattice_args(p, rows=1, cols=2)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--gateset", choices=("silicon", "superconducting"),
                   default=None)
    p.add_argument("--mode", choices=("analytic", "sampled"), default="analytic")
    p.add_argument("--step-size", type=float, default=None, dest="step_size")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--shots", type=int, default=None)
    p.set_defaults(mu_fallback=0.5, shots_fallback=2000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("verify", help="run the oracle suite")
    p.add_argument("--lattice", default="1x2", help="RxC, e.g. 2x2")
    p.add_argument("--fast", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce-paper",
                       help="published values vs computed, one row each")
    p.add_argument("--skip-counted", action="store_true",
                   help="skip the slow 5x5 synthesis rows")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    os.environ.setdefault("HUBVQE_THREADS", str(_thread_env()))
    try:
        _resolve_args(args)
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
