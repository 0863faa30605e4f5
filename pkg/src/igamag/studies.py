"""Assembled problem setups and the four study drivers.

This is the glue between the geometry builders and the solvers: it builds
per-side systems (space, stiffness, sources, interface trace), runs the
manufactured-solution convergence sweep, the inf-sup sweep, single coupled
solves with either coupling, and the rotor-position sweep for the EMF
spectrum.  The CLI and the demo scripts are thin wrappers around these
functions, so everything here returns plain data structures.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import mortar, postproc
from .assembly import (
    MU0,
    MaterialMap,
    assemble_current,
    assemble_mass,
    assemble_pm,
    assemble_source,
    assemble_stiffness,
)
from .models import (
    build_pmsm_pole,
    build_quarter_ring,
    default_machine,
    machine_materials,
)
from .multipatch import (
    apply_antiperiodic,
    apply_dirichlet,
    glue_c0,
    trace_on_airgap,
    uniform_spaces,
)
from .substructuring import DNCoupling

__all__ = [
    "SideSystem",
    "build_verification_sides",
    "solve_verification",
    "VerificationRun",
    "run_verification_study",
    "fit_slope",
    "run_infsup_study",
    "MachineProblem",
    "run_emf_study",
]


@dataclass
class SideSystem:
    """One subdomain ready for coupling: space, trace, operators, sources."""

    space: object
    trace: object
    K: object
    rhs: np.ndarray
    materials: MaterialMap
    _mass: object = None

    @property
    def mass(self):
        if self._mass is None:
            self._mass = assemble_mass(self.space)
        return self._mass


# --------------------------------------------------------------------------
# verification problem
# --------------------------------------------------------------------------


def build_verification_sides(model=None, degree=2, refinement=1, q=None):
    """Assembled inner ('rt') and outer ('st') quarter-ring systems."""
    model = model or build_quarter_ring()
    sides = []
    for dom in (model.inner_domain, model.outer_domain):
        space = apply_dirichlet(glue_c0(dom, uniform_spaces(dom, degree, refinement)))
        trace = trace_on_airgap(space)
        K = assemble_stiffness(space, q=q)
        rhs = assemble_source(space, model.source, q=q)
        sides.append(SideSystem(space, trace, K, rhs, MaterialMap.uniform()))
    return model, sides[0], sides[1]


@dataclass
class VerificationRun:
    degree: int
    refinement: int
    n_dofs: int
    eps_l2: float
    eps_jump: float
    eps_lambda: float
    h: float
    solution: object = None


def solve_verification(model=None, degree=2, refinement=1, max_order=3, q=None,
                       keep_solution=False):
    """One coupled manufactured-solution solve plus its three error norms."""
    model, rt, st = build_verification_sides(model, degree, refinement, q=q)
    L = mortar.select_harmonics("periodic", 2.0 * np.pi, max_order)
    G_rt = mortar.assemble_coupling(rt.trace, L, "rt")
    G_st = mortar.assemble_coupling(st.trace, L, "st")
    saddle = mortar.assemble_saddle(
        rt.K, st.K, G_rt, G_st, mortar.rotation_matrix(L, 0.0), rt.rhs, st.rhs
    )
    sol = mortar.solve_coupled(saddle)
    f_rt = postproc.SolutionField(rt.space, sol.u_rt, "rt")
    f_st = postproc.SolutionField(st.space, sol.u_st, "st")
    eps_l2 = np.sqrt(
        postproc.error_l2(f_rt, model.exact) ** 2 + postproc.error_l2(f_st, model.exact) ** 2
    )
    eps_jump = postproc.error_jump(f_rt, f_st, rt.trace, st.trace)
    eps_lambda = postproc.error_multiplier(
        sol.lam, L, model.exact_interface_flux, rt.trace.theta_min, rt.trace.theta_max
    )
    return VerificationRun(
        degree=degree,
        refinement=refinement,
        n_dofs=rt.space.n_dofs + st.space.n_dofs,
        eps_l2=eps_l2,
        eps_jump=eps_jump,
        eps_lambda=eps_lambda,
        h=0.5**refinement,
        solution=(sol, rt, st, model) if keep_solution else None,
    )


def fit_slope(hs, errs):
    """Least-squares convergence order of ``errs ~ h^slope``."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[keep]), np.log(errs[keep]), 1)[0])


def run_verification_study(degrees=(1, 2, 3), refinements=(1, 2, 3, 4, 5), max_order=3):
    """Convergence sweep; returns (rows, slopes) keyed by degree."""
    rows = []
    slopes = {}
    for p in degrees:
        runs = [solve_verification(degree=p, refinement=r, max_order=max_order)
                for r in refinements]
        rows.extend(runs)
        hs = [run.h for run in runs]
        slopes[p] = {
            "l2": fit_slope(hs, [r.eps_l2 for r in runs]),
            "jump": fit_slope(hs, [r.eps_jump for r in runs]),
            "lambda": fit_slope(hs, [r.eps_lambda for r in runs]),
        }
    return rows, slopes


def run_infsup_study(degree=2, refinements=(2, 3, 4, 5), max_orders=(0, 1, 2, 3, 4, 5)):
    """Inf-sup constant over (refinement x harmonic cutoff); returns rows.

    Each row is ``(refinement, max_order, n_gamma, beta)``.
    """
    import scipy.sparse as sps

    rows = []
    for r in refinements:
        _, rt, st = build_verification_sides(degree=degree, refinement=r)
        K = sps.block_diag([rt.K, st.K], format="csc")
        for mo in max_orders:
            L = mortar.select_harmonics("periodic", 2.0 * np.pi, mo)
            G_rt = mortar.assemble_coupling(rt.trace, L, "rt")
            G_st = mortar.assemble_coupling(st.trace, L, "st")
            G = np.vstack([G_rt, G_st])
            M = mortar.harmonic_mass(L, rt.trace.theta_min, rt.trace.theta_max)
            beta, _ = mortar.infsup_constant(K, G, M)
            rows.append((r, mo, L.n_gamma, beta))
    return rows


# --------------------------------------------------------------------------
# machine problem
# --------------------------------------------------------------------------


class MachineProblem:
    """One assembled machine configuration (geometry, spaces, operators).

    The rotor carries the magnet sources, the stator the (optional) winding
    currents; both sides get anti-periodic and Dirichlet constraints, and
    their air-gap traces feed either coupling method.  The air-gap DoFs stay
    free in both spaces, so the same assembled systems serve the harmonic
    solver and the Dirichlet-Neumann iteration.
    """

    def __init__(self, params=None, degree=2, refinement=1, currents=None,
                 max_order=15, q=None, rotor_angular_extra=2):
        self.params = params or default_machine()
        self.degree = degree
        self.refinement = refinement
        tau = self.params.pole_pitch
        rotor_dom, stator_dom = build_pmsm_pole(self.params)
        self.sides = {}
        for name, dom in (("rt", rotor_dom), ("st", stator_dom)):
            spaces = uniform_spaces(dom, degree, refinement)
            if name == "rt" and rotor_angular_extra:
                # the rotor's 3 interface edges are angularly coarse next to
                # the stator's slot pitch; extra refinement along the arcs
                # keeps slot-order content resolvable on both traces
                from .multipatch import PatchSpace

                spaces = [
                    PatchSpace(ps.kv_u, ps.kv_v.uniform_refined(rotor_angular_extra))
                    for ps in spaces
                ]
            space = glue_c0(dom, spaces)
            space = apply_antiperiodic(space, tau, tol=1e-9 * self.params.r_stator_outer)
            space = apply_dirichlet(space)
            trace = trace_on_airgap(space)
            mats = machine_materials(self.params, name, currents=currents,
                                     areas=self._areas(space) if currents else None)
            K = assemble_stiffness(space, mats, q=q)
            if name == "rt":
                rhs = assemble_pm(space, mats, q=q)
            else:
                rhs = assemble_current(space, mats, q=q)
            self.sides[name] = SideSystem(space, trace, K, rhs, mats)
        self.harmonics = mortar.select_harmonics("antiperiodic", tau, max_order)
        self.G_rt = mortar.assemble_coupling(self.sides["rt"].trace, self.harmonics, "rt")
        self.G_st = mortar.assemble_coupling(self.sides["st"].trace, self.harmonics, "st")
        self._hc = None
        self._flux = None

    @staticmethod
    def _areas(space):
        from .assembly import integrate

        areas = {}
        for region in set(space.domain.regions):
            if region.startswith("slot"):
                areas[region] = integrate(space, region=region)
        return areas

    @property
    def rt(self):
        return self.sides["rt"]

    @property
    def st(self):
        return self.sides["st"]

    def saddle(self, alpha=0.0):
        return mortar.assemble_saddle(
            self.rt.K, self.st.K, self.G_rt, self.G_st,
            mortar.rotation_matrix(self.harmonics, alpha), self.rt.rhs, self.st.rhs,
        )

    def harmonic_solver(self):
        if self._hc is None:
            self._hc = mortar.HarmonicCoupling(
                self.rt.K, self.st.K, self.G_rt, self.G_st, self.harmonics,
                self.rt.rhs, self.st.rhs,
            )
        return self._hc

    def solve_harmonic(self, alpha=0.0, direct=False):
        if direct:
            return mortar.solve_coupled(self.saddle(alpha))
        return self.harmonic_solver().solve(alpha)

    def dn_coupling(self, quad_points=None, alpha=0.0):
        return DNCoupling(self.rt, self.st, nu_interface=1.0 / MU0,
                          quad_points=quad_points, alpha=alpha,
                          period=self.params.pole_pitch)

    def solve_dn(self, alpha=0.0, alpha_relax=0.5, tol=1e-3, max_iter=50):
        """Dirichlet-Neumann solve at one rotor position.

        Every angle needs fresh transfer assembly and a full iteration, so
        position sweeps are far more expensive here than with the harmonic
        coupling (where only phase factors change).
        """
        return self.dn_coupling(alpha=alpha).iterate(alpha_relax=alpha_relax, tol=tol,
                                                     max_iter=max_iter)

    def dn_emf_sweep(self, n_alpha=36, speed=None, tol=1e-5, alpha_relax=0.5,
                     max_iter=120, warm_start=True):
        """Flux-linkage sweep with the DN coupling (slow path, for comparison)."""
        if speed is None or speed <= 0.0:
            raise ValueError("a positive mechanical speed is required")
        tau = self.params.pole_pitch
        alphas = np.arange(n_alpha) * (tau / n_alpha)
        flux = self.flux_linkage()
        psi = {ph: np.empty(n_alpha) for ph in "abc"}
        gamma = None
        t0 = time.perf_counter()
        iters = []
        for k, alpha in enumerate(alphas):
            dn = self.dn_coupling(alpha=alpha)
            res = dn.iterate(gamma0=gamma if warm_start else None,
                             alpha_relax=alpha_relax, tol=tol, max_iter=max_iter)
            gamma = res.gamma
            iters.append(res.iterations)
            values = flux.psi(res.u_st)
            for ph in "abc":
                psi[ph][k] = values[ph]
        return {
            "alphas": alphas,
            "psi": psi,
            "iterations": iters,
            "sweep_seconds": time.perf_counter() - t0,
        }

    def flux_linkage(self):
        if self._flux is None:
            self._flux = postproc.FluxLinkage(self.st.space, self.params)
        return self._flux

    def field_difference(self, u_a, u_b, side="st"):
        """Relative L2 distance between two coefficient vectors on one side."""
        M = self.sides[side].mass
        d = u_a - u_b
        return float(np.sqrt(d @ (M @ d)) / np.sqrt(u_b @ (M @ u_b)))


def run_emf_study(problem, n_alpha=60, speed=None, phase="a"):
    """Rotor-position sweep: flux linkage, EMF spectrum and THD.

    ``speed`` is the mechanical speed in rad/s (required; the paper's
    nominal speed is not published, so it is a config input).  Returns a
    dict with the sample grid, per-phase flux linkages, the spectrum of the
    requested phase, and timing of the sweep.
    """
    if speed is None or speed <= 0.0:
        raise ValueError("a positive mechanical speed is required for the EMF study")
    tau = problem.params.pole_pitch
    alphas = np.arange(n_alpha) * (tau / n_alpha)
    flux = problem.flux_linkage()
    hc = problem.harmonic_solver()
    psi = {ph: np.empty(n_alpha) for ph in "abc"}
    t0 = time.perf_counter()
    for k, alpha in enumerate(alphas):
        sol = hc.solve(alpha)
        values = flux.psi(sol.u_st)
        for ph in "abc":
            psi[ph][k] = values[ph]
    sweep_time = time.perf_counter() - t0
    spectrum = postproc.emf_spectrum(alphas, psi[phase], tau, speed)
    return {
        "alphas": alphas,
        "psi": psi,
        "spectrum": spectrum,
        "thd": postproc.thd(spectrum),
        "sweep_seconds": sweep_time,
        "phase": phase,
    }
