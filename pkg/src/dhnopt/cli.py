"""Command-line pipeline: scenario file in, CSV/JSON artifacts out.

Subcommands:

- ``model``    assemble (A, B, E), print + write the stability certificate
- ``turnpike`` regularity check, canonical decomposition, turnpike CSV
- ``solve``    run the (x0, horizon) matrix; one CSV per run with costates
               and switching functions appended
- ``report``   deviation series, tube measures, exactness verdicts (JSON)
- ``audit``    dissipativity audit: fitted penalty, storage estimates (JSON)
- ``all``      everything above in order

Exit codes: 0 success, 2 malformed scenario (message carries a JSON-pointer
path), 3 numerical failure (e.g. singular optimality pencil).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, dissipativity, pmp
from .errors import NumericalError, ScenarioError, ValidationError
from .network import hurwitz_certificate
from .ocp import default_grid_size, solve
from .pencil import (bounded_particular_solution, build_pencil,
                     check_regularity, dae_residual, switching_residual,
                     weierstrass_decompose)
from .scenario import ScenarioBundle, load_scenario, write_csv

SUBCOMMANDS = ("model", "turnpike", "solve", "report", "audit", "all")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhnopt",
        description="district-heating-network optimal control pipeline")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=None,
                        help="output directory (default: scenario outputs.dir;"
                             " env DHNOPT_OUT overrides that)")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel workers for the run matrix")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario numerics seed")
    return parser


def _out_dir(bundle: ScenarioBundle, args) -> Path:
    out = args.out or os.environ.get("DHNOPT_OUT") or bundle.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _state_headers(n, m, with_adjoint=True):
    head = ["t_s"] + [f"x{i + 1}_K" for i in range(n)] \
        + [f"u{i + 1}_W" for i in range(m)]
    if with_adjoint:
        head += [f"lam{i + 1}" for i in range(n)] \
            + [f"s{i + 1}" for i in range(m)]
    return head


def run_model(bundle: ScenarioBundle, out: Path) -> None:
    model = bundle.model
    cert = hurwitz_certificate(model)
    print(f"model: n={model.n} producers={model.m} consumers={model.w}")
    with np.printoptions(precision=6, suppress=False, linewidth=120):
        print("A =\n", model.A)
        print("B =\n", model.B)
        print("E =\n", model.E)
    print(f"spectral abscissa  {cert.spectral_abscissa:.6e} 1/s")
    print(f"gershgorin margin  {cert.gershgorin_margin:.6e} (> 0: Hurwitz)")
    print(f"transient gain k   {cert.transient_gain:.6e}")
    payload = {
        "n": model.n, "m": model.m, "w": model.w,
        "vertex_ids": list(model.vertex_ids),
        "producer_ids": list(model.producer_ids),
        "consumer_ids": list(model.consumer_ids),
        "A": model.A.tolist(), "B": model.B.tolist(), "E": model.E.tolist(),
        "spectral_abscissa": cert.spectral_abscissa,
        "gershgorin_margin": cert.gershgorin_margin,
        "transient_gain": cert.transient_gain,
    }
    (out / "model.json").write_text(json.dumps(payload, indent=2) + "\n")


def compute_turnpike(bundle: ScenarioBundle, seed: int):
    pencil = build_pencil(bundle.model, bundle.Q, bundle.S, bundle.r,
                          bundle.p, bundle.d)
    cert = check_regularity(pencil, seed=seed)
    if not cert.regular:
        raise NumericalError(
            "optimality pencil s*D - M is singular for every sample point: "
            "det(s D - M) vanishes identically, so the singular-arc system "
            "has no unique solution (pencil-regularity requirement violated); "
            f"max |det| ratio {cert.ratios.max():.3e} <= {cert.threshold:.3e}")
    decomp = weierstrass_decompose(pencil)
    turnpike = bounded_particular_solution(
        decomp, pencil, u_box=(bundle.u_min, bundle.u_max))
    return pencil, cert, decomp, turnpike


def run_turnpike(bundle: ScenarioBundle, out: Path, seed: int):
    pencil, cert, decomp, turnpike = compute_turnpike(bundle, seed)
    t_max = max(run.T for run in bundle.runs)
    N = max(run.N if run.N is not None else
            (bundle.grid_N or default_grid_size(run.T))
            for run in bundle.runs)
    grid = np.linspace(0.0, t_max, max(N, 2) + 1)
    resid = dae_residual(pencil, turnpike, grid)
    sw = switching_residual(pencil, turnpike, grid)
    print(f"pencil regular: max |det| ratio {cert.ratios.max():.3e} "
          f"(threshold {cert.threshold:.3e})")
    print(f"canonical form: dynamic block {decomp.n_finite}, nilpotent block "
          f"{decomp.n_infinite}, nilpotency index {decomp.nu}")
    print(f"turnpike residuals: dae {resid:.3e}, switching {sw:.3e}")
    if turnpike.interiority_margin is not None:
        flag = " (LEAVES BOX)" if turnpike.leaves_box else ""
        print(f"input interiority margin {turnpike.interiority_margin:.6e}"
              f"{flag}")
    n, m = pencil.n, pencil.m
    x = turnpike.x.eval(grid)
    lam = turnpike.lam.eval(grid)
    u = turnpike.u.eval(grid)
    cols = [grid] + [x[:, i] for i in range(n)] + \
        [u[:, i] for i in range(m)] + [lam[:, i] for i in range(n)] + \
        [np.zeros_like(grid) for _ in range(m)]  # switching is 0 on the arc
    write_csv(out / "turnpike.csv", _state_headers(n, m), cols)
    payload = {
        "regular": True,
        "det_ratio_max": float(cert.ratios.max()),
        "n_finite": decomp.n_finite,
        "n_infinite": decomp.n_infinite,
        "nilpotency_index": decomp.nu,
        "dae_residual": resid,
        "switching_residual": sw,
        "interiority_margin": turnpike.interiority_margin,
        "leaves_box": turnpike.leaves_box,
    }
    (out / "pencil.json").write_text(json.dumps(payload, indent=2) + "\n")
    return pencil, decomp, turnpike


def _solve_one(bundle: ScenarioBundle, run) -> tuple:
    scn = bundle.scenario_for(run)
    pair = solve(scn)
    adjoint = pmp.costate(pair)
    s = pmp.switching_functions(pair, adjoint)
    return run, pair, adjoint, s


def run_solve(bundle: ScenarioBundle, out: Path, threads: int = 1):
    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_solve_one, bundle, run)
                       for run in bundle.runs]
            for fut in futures:
                run, pair, adjoint, s = fut.result()
                results[run.label] = (run, pair, adjoint, s)
    else:
        for run in bundle.runs:
            run, pair, adjoint, s = _solve_one(bundle, run)
            results[run.label] = (run, pair, adjoint, s)
    n, m = bundle.model.n, bundle.model.m
    for label in sorted(results):
        run, pair, adjoint, s = results[label]
        u_nodes = np.vstack([pair.U, pair.U[-1:]])
        cols = [pair.times] + [pair.X[:, i] for i in range(n)] \
            + [u_nodes[:, i] for i in range(m)] \
            + [adjoint.lam[:, i] for i in range(n)] \
            + [s[:, i] for i in range(m)]
        write_csv(out / f"run_{label}.csv", _state_headers(n, m), cols)
        print(f"run {label}: N={pair.N} objective={pair.objective:.9e} "
              f"iterations={pair.diagnostics.iterations}"
              + (" NONCONVEX" if pair.diagnostics.nonconvex else ""))
    return results


def run_report(bundle: ScenarioBundle, out: Path, results, turnpike):
    pairs = {label: res[1] for label, res in results.items()}
    base = bundle.base_scenario()
    eps_num = 10.0 * diagnostics.refinement_error_estimate(base)
    grid = eps_num * np.asarray(bundle.epsilon_rel_grid)
    report = diagnostics.exactness_check(pairs, turnpike, eps_num,
                                         epsilon_grid=grid)
    for label, series in report.deviations.items():
        write_csv(out / f"dev_{label}.csv", ["t_s", "e"],
                  [series.times, series.values])
    gaps = diagnostics.pairwise_coincidence(pairs, report)
    payload = {
        "epsilon_num": report.epsilon_num,
        "epsilon_grid": [float(e) for e in report.epsilon_grid],
        "horizon_independent": bool(report.horizon_independent),
        "nu_hat_s": {f"{eps:.6e}": mu for eps, mu in report.nu_hat.items()},
        "pairwise_middle_gap": {f"{a} | {b}": gap
                                for (a, b), gap in gaps.items()},
        "runs": {},
    }
    for label, verdict in report.verdicts:
        payload["runs"][label] = {
            "exact": bool(verdict.exact),
            "entry_time_s": verdict.entry_time,
            "exit_time_s": verdict.exit_time,
            "interval_fraction": verdict.interval_fraction,
            "sup_deviation_on_interval": verdict.sup_on_interval,
            "mu_table_s": [{"epsilon": mu.epsilon, "mu": mu.measure,
                            "resolution": mu.resolution}
                           for mu in report.measures[label]],
        }
        print(f"report {label}: "
              f"{'EXACT' if verdict.exact else 'NOT EXACT'} "
              f"(tracked {verdict.interval_fraction * 100:.1f}% of horizon)")
    print(f"horizon independence: {report.horizon_independent}")
    if gaps:
        print(f"pairwise middle-interval gap: max {max(gaps.values()):.3e} "
              f"(epsilon_num {eps_num:.3e})")
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    return report


def run_audit(bundle: ScenarioBundle, out: Path, results, turnpike,
              report=None):
    pairs = {label: res[1] for label, res in results.items()}
    base = bundle.base_scenario()
    if bundle.xn is not None and bundle.storage_x0_scales:
        x0_list = [s * bundle.xn for s in bundle.storage_x0_scales]
    else:
        x0_list = [run.x0 for run in bundle.runs]
    T_list = list(bundle.storage_T_list) or sorted({r.T for r in bundle.runs})
    eps_num = report.epsilon_num if report is not None else None
    audit = dissipativity.run_audit(base, turnpike, x0_list, T_list, pairs,
                                    alpha_c=bundle.alpha_c,
                                    epsilon_num=eps_num)
    payload = {
        "fitted_c": audit.fitted_c,
        "nu_hat_zero_s": audit.nu_hat_zero,
        "ell_hat": audit.ell_hat,
        "storage_bound_holds": bool(audit.storage_bound_ok),
        "sdi_max_violation": {label: chk.max_violation
                              for label, chk in audit.sdi.items()},
        "storage": [{
            "x0_norm_K": float(np.linalg.norm(s.x0)),
            "horizons_s": s.horizons.tolist(),
            "estimates": s.estimates.tolist(),
            "stabilization_ratio": s.stabilization_ratio,
            "finite": bool(s.finite),
        } for s in audit.samples],
    }
    (out / "audit.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"audit: fitted c = {audit.fitted_c:.6e}, max sdi violation = "
          f"{max(chk.max_violation for chk in audit.sdi.values()):.3e}")
    for s in audit.samples:
        print(f"  storage ||x0||={np.linalg.norm(s.x0):.3f}: "
              f"S_hat={s.estimates[-1]:.6e} ratio={s.stabilization_ratio:.3%}"
              f"{'' if s.finite else ' DIVERGING'}")
    return audit


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        bundle = load_scenario(args.scenario)
        if args.seed is not None:
            bundle = ScenarioBundle(**{**bundle.__dict__, "seed": args.seed})
        out = _out_dir(bundle, args)
        sub = args.subcommand
        if sub == "model":
            run_model(bundle, out)
            return 0
        if sub == "turnpike":
            run_turnpike(bundle, out, bundle.seed)
            return 0
        if sub == "solve":
            run_solve(bundle, out, args.threads)
            return 0
        # report / audit / all need both the runs and the turnpike
        if sub == "all":
            run_model(bundle, out)
        _, _, turnpike = run_turnpike(bundle, out, bundle.seed)
        results = run_solve(bundle, out, args.threads)
        report = None
        if sub in ("report", "all"):
            report = run_report(bundle, out, results, turnpike)
        if sub in ("audit", "all"):
            run_audit(bundle, out, results, turnpike, report)
        return 0
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
