"""Batch driver for the four studies.

``igamag --config cfg.toml [--out DIR] [--threads N] [--seed N] [--verbose]``

The study kind comes from the config file ([study] kind = "verify" |
"infsup" | "solve" | "emf").  Data tables are written as CSV with fixed
float formatting (re-running an identical config reproduces them byte for
byte); wall-clock times go only into the JSON reports.  Environment
variables IGAMAG_OUT / IGAMAG_THREADS / IGAMAG_SEED / IGAMAG_VERBOSE
mirror the flags.

Exit codes: 0 success, 1 gate failure, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import postproc, studies
from .config import RunConfig
from .errors import ConfigError, IterationError, SingularSystemError
from .models import build_quarter_ring, default_machine, load_machine_config

__all__ = ["main", "cmd_verify", "cmd_infsup", "cmd_solve", "cmd_emf"]

_FMT = "{:.12e}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_FMT.format(v) if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _machine_params(cfg):
    if cfg.machine_config:
        return load_machine_config(cfg.machine_config)
    return default_machine()


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_verify(cfg, out):
    """Manufactured-solution convergence sweep with slope gates."""
    rows = []
    slopes = {}
    failed = []
    for p in cfg.degrees:
        runs = [
            studies.solve_verification(degree=p, refinement=r, max_order=cfg.max_order,
                                       q=cfg.quadrature)
            for r in cfg.refinements
        ]
        rows.extend(runs)
        if len(runs) >= 2:
            hs = [r.h for r in runs]
            s = {
                "l2": studies.fit_slope(hs, [r.eps_l2 for r in runs]),
                "jump": studies.fit_slope(hs, [r.eps_jump for r in runs]),
                "lambda": studies.fit_slope(hs, [r.eps_lambda for r in runs]),
            }
            slopes[str(p)] = s
            gates = {"l2": p + 0.7, "jump": p + 0.5, "lambda": 2 * p - 0.5}
            for name, gate in gates.items():
                if s[name] < gate:
                    failed.append(f"degree {p}: {name} slope {s[name]:.2f} < {gate}")
    _write_csv(
        os.path.join(out, "convergence.csv"),
        ["degree", "refinement", "h", "n_dofs", "eps_l2", "eps_jump", "eps_lambda"],
        [
            (r.degree, r.refinement, r.h, r.n_dofs, r.eps_l2, r.eps_jump, r.eps_lambda)
            for r in rows
        ],
    )
    _write_json(os.path.join(out, "slopes.json"), {"slopes": slopes, "failed_gates": failed})
    if failed:
        print("slope gates FAILED:", "; ".join(failed))
        return 1
    print(f"verify: {len(rows)} runs, all slope gates passed" if slopes
          else f"verify: {len(rows)} runs, single level - no slope gates")
    return 0


def cmd_infsup(cfg, out):
    """Inf-sup constant over the (refinement x harmonic cutoff) grid."""
    rows = studies.run_infsup_study(
        degree=cfg.infsup_degree,
        refinements=cfg.infsup_refinements,
        max_orders=cfg.infsup_max_orders,
    )
    _write_csv(
        os.path.join(out, "infsup.csv"),
        ["refinement", "max_order", "n_gamma", "beta"],
        [(r, mo, ng, float(b)) for (r, mo, ng, b) in rows],
    )
    print(f"infsup: {len(rows)} rows written")
    return 0


def _dump_machine_field(prob, sol, out):
    from .postproc import SolutionField, dump_field_csv

    m = prob.params
    pts = []
    for radii, n_r in ((np.linspace(m.r_rotor_inner * 1.02, m.r_airgap * 0.995, 12), None),
                       (np.linspace(m.r_airgap * 1.005, m.r_stator_outer * 0.98, 14), None)):
        for r in radii:
            for th in np.linspace(0.01, m.pole_pitch - 0.01, 40):
                pts.append((r * np.cos(th), r * np.sin(th)))
    pts = np.asarray(pts)
    inside_rt = np.hypot(pts[:, 0], pts[:, 1]) < m.r_airgap
    f_rt = SolutionField(prob.rt.space, sol.u_rt if hasattr(sol, "u_rt") else sol[0], "rt")
    f_st = SolutionField(prob.st.space, sol.u_st if hasattr(sol, "u_st") else sol[1], "st")
    dump_field_csv(f_rt, pts[inside_rt], os.path.join(out, "field_rotor.csv"))
    dump_field_csv(f_st, pts[~inside_rt], os.path.join(out, "field_stator.csv"))


def cmd_solve(cfg, out):
    """Single coupled solve with either coupling; report + field dump."""
    report = {"model": cfg.model, "coupling": cfg.coupling, "degree": cfg.degree,
              "refinement": cfg.refinement}
    if cfg.model == "verification":
        t0 = time.perf_counter()
        run = studies.solve_verification(degree=cfg.degree, refinement=cfg.refinement,
                                         max_order=cfg.max_order, q=cfg.quadrature,
                                         keep_solution=True)
        report.update(
            n_dofs=run.n_dofs,
            eps_l2=run.eps_l2,
            eps_jump=run.eps_jump,
            eps_lambda=run.eps_lambda,
            continuity_residual=run.solution[0].continuity_residual,
            total_seconds=time.perf_counter() - t0,
        )
        _write_json(os.path.join(out, "solve_report.json"), report)
        print(f"verification solve: eps_l2={run.eps_l2:.3e}")
        return 0
    t0 = time.perf_counter()
    prob = studies.MachineProblem(params=_machine_params(cfg), degree=cfg.degree,
                                  refinement=cfg.refinement,
                                  max_order=cfg.machine_max_order, q=cfg.quadrature)
    t_build = time.perf_counter() - t0
    report.update(n_dofs_rt=prob.rt.space.n_dofs, n_dofs_st=prob.st.space.n_dofs,
                  n_gamma=prob.harmonics.n_gamma, assembly_seconds=t_build)
    if cfg.coupling == "harmonic":
        t0 = time.perf_counter()
        sol = prob.solve_harmonic(cfg.alpha, direct=True)
        report.update(solve_seconds=time.perf_counter() - t0,
                      continuity_residual=sol.continuity_residual)
        _dump_machine_field(prob, sol, out)
    else:
        t0 = time.perf_counter()
        try:
            res = prob.solve_dn(alpha=cfg.alpha, alpha_relax=cfg.dn_relax,
                                tol=cfg.dn_tol, max_iter=cfg.dn_max_iter)
        except IterationError as exc:
            _write_csv(os.path.join(out, "dn_history.csv"),
                       ["iteration", "eps_rt", "eps_st"],
                       [(k + 1, a, b) for k, (a, b) in enumerate(exc.history)])
            report["error"] = str(exc)
            _write_json(os.path.join(out, "solve_report.json"), report)
            print(f"DN did not converge: {exc}")
            return 3
        report.update(solve_seconds=time.perf_counter() - t0, iterations=res.iterations)
        _write_csv(os.path.join(out, "dn_history.csv"),
                   ["iteration", "eps_rt", "eps_st"],
                   [(k + 1, a, b) for k, (a, b) in enumerate(res.history)])
        _dump_machine_field(prob, res, out)
    _write_json(os.path.join(out, "solve_report.json"), report)
    print(f"machine solve ({cfg.coupling}) done; report in {out}/solve_report.json")
    return 0


def cmd_emf(cfg, out):
    """Rotor-position sweep, EMF spectrum and THD."""
    prob = studies.MachineProblem(params=_machine_params(cfg), degree=cfg.degree,
                                  refinement=cfg.refinement,
                                  max_order=cfg.machine_max_order, q=cfg.quadrature)
    emf = studies.run_emf_study(prob, n_alpha=cfg.n_alpha, speed=cfg.speed)
    alphas, psi = emf["alphas"], emf["psi"]
    tau = prob.params.pole_pitch
    _write_csv(os.path.join(out, "psi.csv"),
               ["alpha_rad", "psi_a", "psi_b", "psi_c"],
               [(float(a), psi["a"][k], psi["b"][k], psi["c"][k])
                for k, a in enumerate(alphas)])
    if cfg.line_to_line:
        waveform = psi["a"] - psi["b"]
        label = "line-to-line (a-b)"
    else:
        waveform = psi["a"]
        label = "phase a"
    spectrum = postproc.emf_spectrum(alphas, waveform, tau, cfg.speed)
    thd = postproc.thd(spectrum)
    _write_csv(os.path.join(out, "spectrum.csv"),
               ["order", "magnitude_V"],
               [(int(p), float(m)) for p, m in zip(spectrum.orders, spectrum.magnitudes)])
    mags = spectrum.magnitudes
    even_rel = float(mags[1::2].max() / mags[0]) if len(mags) > 1 else 0.0
    # anti-periodicity check on an actual shifted solve: psi(tau) = -psi(0)
    flux = prob.flux_linkage()
    p0 = flux.psi(prob.solve_harmonic(0.0).u_st)["a"]
    p1 = flux.psi(prob.solve_harmonic(tau).u_st)["a"]
    anti_rel = abs(p1 + p0) / max(abs(p0), 1e-300)
    _write_json(os.path.join(out, "thd.json"), {
        "psi_antiperiodicity_rel": float(anti_rel),
        "waveform": label,
        "thd": float(thd),
        "fundamental_V": float(mags[0]),
        "base_frequency_Hz": float(spectrum.base_frequency),
        "speed_rad_s": cfg.speed,
        "even_harmonic_rel": even_rel,
        "sweep_seconds": emf["sweep_seconds"],
    })
    print(f"emf: THD({label}) = {thd * 100:.4f} %, E1 = {mags[0]:.3f} V")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="igamag",
        description="2D isogeometric magnetostatics with harmonic rotor-stator coupling",
    )
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for independent sub-runs (current build is sequential)")
    parser.add_argument("--seed", type=int, default=None, help="reserved")
    parser.add_argument("--verbose", action="store_true", default=None)
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, overrides={
            "out_dir": args.out,
            "threads": args.threads,
            "seed": args.seed,
            "verbose": args.verbose,
        })
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(cfg.out_dir, exist_ok=True)
    commands = {"verify": cmd_verify, "infsup": cmd_infsup, "solve": cmd_solve, "emf": cmd_emf}
    try:
        return commands[cfg.kind](cfg, cfg.out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SingularSystemError, IterationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
