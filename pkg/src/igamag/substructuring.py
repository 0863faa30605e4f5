"""Iterative Dirichlet-Neumann coupling across the air-gap circle.

One iteration solves the rotor with the current interface trace as
inhomogeneous Dirichlet data, extracts the azimuthal field strength
``H = nu grad(A) . n_st`` pointwise on the circle (each evaluation inverts
the geometry map, which is what makes this path expensive), solves the
stator with that flux as a natural boundary term, and relaxes the new
stator trace back onto the rotor trace basis by an L2 projection in the
angle variable.  Convergence is declared when the relative L2 change of
both subdomain fields drops below the tolerance.

A rotor displacement ``alpha`` shifts all cross-interface angle lookups;
queries falling outside a side's own pole window are folded back with the
anti-periodic sign, so rotated no-load solves work without re-meshing
(they are just much slower than the harmonic coupling, which only updates
phase factors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import linsolve
from .errors import IterationError
from .splines import basis_grid, inverse_map

__all__ = ["DNState", "NeumannData", "DNCoupling", "DNResult"]


@dataclass
class DNState:
    """Mutable iteration state: trace coefficients and error history."""

    gamma: np.ndarray
    k: int = 0
    alpha_relax: float = 0.5
    tol: float = 1e-3
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.alpha_relax <= 1.0:
            raise ValueError("relaxation factor must lie in (0, 1]")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")


def _edge_uv(edge, t):
    """Patch reference coordinates of an edge parameter value."""
    if edge.side == "u0":
        return (0.0, t)
    if edge.side == "u1":
        return (1.0, t)
    if edge.side == "v0":
        return (t, 0.0)
    return (t, 1.0)


class _SideEvaluator:
    """Pointwise field/flux evaluation on one side's air-gap edges.

    ``period`` (the pole pitch) enables anti-periodic folding of query
    angles outside the side's own window; ``None`` forbids it.
    """

    def __init__(self, space, trace, nu_interface, period=None):
        self.space = space
        self.trace = trace
        self.nu = nu_interface
        self.period = period

    def fold(self, thetas):
        """Fold angles into the trace window; returns (angles, signs)."""
        th = np.asarray(thetas, dtype=float).copy()
        sign = np.ones_like(th)
        if self.period is None:
            return th, sign
        lo, hi = self.trace.theta_min, self.trace.theta_max
        for _ in range(8):
            low = th < lo - 1e-12
            high = th > hi + 1e-12
            if not (low.any() or high.any()):
                break
            th[low] += self.period
            sign[low] *= -1.0
            th[high] -= self.period
            sign[high] *= -1.0
        return np.clip(th, lo, hi), sign

    def _locate(self, theta):
        edge = self.trace.edge_at(theta)
        t = edge.param_of_angle(theta)
        patch = self.space.domain.patches[edge.patch]
        point = self.trace.radius * np.array([np.cos(theta), np.sin(theta)])
        uv = inverse_map(patch, point, guess=_edge_uv(edge, t))
        return edge.patch, uv

    def values(self, thetas, u):
        from .postproc import SolutionField

        fld = SolutionField(self.space, u)
        th, sign = self.fold(thetas)
        out = np.empty(len(th))
        for k, theta in enumerate(th):
            p, uv = self._locate(theta)
            out[k] = fld.patch_values(p, [uv[0]], [uv[1]])[0, 0]
        return out * sign

    def flux(self, thetas, u):
        """``nu grad(A) . n_st`` with the stator-to-rotor (inward) normal."""
        from .postproc import SolutionField

        fld = SolutionField(self.space, u)
        th, sign = self.fold(thetas)
        out = np.empty(len(th))
        for k, theta in enumerate(th):
            p, uv = self._locate(theta)
            _, gx, gy = fld.patch_values(p, [uv[0]], [uv[1]], deriv=1)
            out[k] = -self.nu * (gx[0, 0] * np.cos(theta) + gy[0, 0] * np.sin(theta))
        return out * sign


@dataclass
class NeumannData:
    """Interface flux of a rotor solve, evaluable at rotor-frame angles."""

    evaluator: _SideEvaluator
    u_rt: np.ndarray

    def __call__(self, thetas):
        return self.evaluator.flux(thetas, self.u_rt)


@dataclass
class DNResult:
    u_rt: np.ndarray
    u_st: np.ndarray
    gamma: np.ndarray
    iterations: int
    history: list


class DNCoupling:
    """Alternating rotor/stator solver for one interface configuration.

    Parameters
    ----------
    rt, st : objects with attributes ``space``, ``trace``, ``K``, ``rhs``, ``mass``
        Assembled side systems; the rotor space must keep its air-gap DoFs
        free (they receive Dirichlet data), the stator treats the air gap
        naturally.
    nu_interface : float
        Reluctivity of the material touching the interface on both sides.
    alpha : float
        Rotor displacement (radians); cross-side lookups shift by it.
    period : float or None
        Pole pitch for anti-periodic folding of shifted lookups (required
        when ``alpha != 0``).
    """

    def __init__(self, rt, st, nu_interface, quad_points=None, alpha=0.0, period=None):
        if alpha != 0.0 and period is None:
            raise ValueError("rotation requires the anti-periodic pole pitch")
        self.rt = rt
        self.st = st
        self.nu = nu_interface
        self.alpha = float(alpha)
        self.trace_dofs = rt.trace.dof_indices
        n = rt.space.n_dofs
        mask = np.zeros(n, dtype=bool)
        mask[self.trace_dofs] = True
        self.interior = np.where(~mask)[0]
        K = rt.K.tocsr()
        self.K_ii = K[self.interior][:, self.interior].tocsc()
        self.K_ib = K[self.interior][:, self.trace_dofs].tocsr()
        self._solve_ii = linsolve.factor(self.K_ii)
        self._solve_st = linsolve.factor(st.K.tocsc())
        self.rt_eval = _SideEvaluator(rt.space, rt.trace, nu_interface, period)
        self.st_eval = _SideEvaluator(st.space, st.trace, nu_interface, period)
        self.M_rt = rt.mass
        self.M_st = st.mass
        self._q = quad_points
        self._trace_gram = self._rotor_trace_gram()

    # -- building blocks -------------------------------------------------------

    def _trace_quad(self, trace, other=None, shift=0.0):
        """Gauss points/weights in the angle measure over trace elements.

        Integrands in the transfer integrals carry structure from both
        sides, so panels are the union of both traces' angular partitions
        (the other side's shifted by the rotor displacement); integrating
        on one side's elements alone aliases the other side's slot-scale
        content into the iteration.
        """
        panels = trace.breakpoint_angles()
        if other is not None:
            lo, hi = panels[0], panels[-1]
            extra = other.breakpoint_angles() + shift
            width = hi - lo
            extra = lo + np.mod(extra - lo, width) if width > 0 else extra
            panels = np.unique(np.concatenate([panels, np.clip(extra, lo, hi)]))
        degree = max(e.kv.degree for e in trace.edges)
        q = self._q or (degree + 2)
        x, w = leggauss(q)
        thetas, weights = [], []
        for a, b in zip(panels[:-1], panels[1:]):
            if b - a < 1e-13:
                continue
            thetas.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            weights.append(0.5 * (b - a) * w)
        return np.concatenate(thetas), np.concatenate(weights)

    def _rotor_trace_matrix(self, thetas):
        """Rows: quadrature angles; columns: rotor trace DoFs (global basis)."""
        col_of = {g: k for k, g in enumerate(self.trace_dofs)}
        A = np.zeros((len(thetas), len(self.trace_dofs)))
        for r, th in enumerate(thetas):
            edge = self.rt.trace.edge_at(th)
            t = edge.param_of_angle(th)
            first, ders = basis_grid(edge.kv, [t], 0)
            for a in range(edge.kv.degree + 1):
                g = edge.gdofs[first[0] + a]
                if g >= 0:
                    A[r, col_of[g]] += ders[0, 0, a] * edge.signs[first[0] + a]
        return A

    def _rotor_trace_gram(self):
        th, wt = self._trace_quad(self.rt.trace, other=self.st.trace, shift=-self.alpha)
        A = self._rotor_trace_matrix(th)
        self._rt_quad = (th, wt, A)
        return (A * wt[:, None]).T @ A

    def dtn_rotor_solve(self, gamma):
        """Rotor solve with Dirichlet trace ``gamma``; returns field + flux."""
        u = np.zeros(self.rt.space.n_dofs)
        u[self.trace_dofs] = gamma
        rhs_i = self.rt.rhs[self.interior] - self.K_ib @ gamma
        u[self.interior] = self._solve_ii(rhs_i)
        return u, NeumannData(self.rt_eval, u)

    def ntd_stator_solve(self, neumann):
        """Stator solve with the rotor flux as natural boundary data.

        The weak form carries ``-int H w_i`` on the stator side, so the
        enforced rotor flux adds ``+int H w_i`` to the right-hand side.
        Stator angles ``theta`` query the rotor at ``theta - alpha``.
        """
        th, wt = self._trace_quad(self.st.trace, other=self.rt.trace, shift=self.alpha)
        H = neumann(th - self.alpha)
        rhs = self.st.rhs.copy()
        radius = self.st.trace.radius  # physical boundary measure ds = r dtheta
        for r, theta in enumerate(th):
            edge = self.st.trace.edge_at(theta)
            t = edge.param_of_angle(theta)
            first, ders = basis_grid(edge.kv, [t], 0)
            coef = radius * wt[r] * H[r]
            for a in range(edge.kv.degree + 1):
                g = edge.gdofs[first[0] + a]
                if g >= 0:
                    rhs[g] += coef * ders[0, 0, a] * edge.signs[first[0] + a]
        return self._solve_st(rhs)

    def stator_trace_projection(self, u_st):
        """L2 projection (angle measure) of the stator trace onto the rotor trace.

        Rotor-frame angles ``theta'`` sample the stator at ``theta' + alpha``.
        """
        th, wt, A = self._rt_quad
        vals = self.st_eval.values(th + self.alpha, u_st)
        rhs = (A * wt[:, None]).T @ vals
        return np.linalg.solve(self._trace_gram, rhs)

    @staticmethod
    def relax_update(projected, gamma, alpha_relax):
        """``gamma_{k+1} = alpha * A_st + (1 - alpha) * gamma_k``."""
        return alpha_relax * projected + (1.0 - alpha_relax) * gamma

    # -- outer loop --------------------------------------------------------------

    def iterate(self, gamma0=None, alpha_relax=0.5, tol=1e-3, max_iter=50):
        """Alternate subdomain solves until both relative L2 changes drop below tol."""
        state = DNState(
            gamma=np.zeros(len(self.trace_dofs)) if gamma0 is None else np.asarray(gamma0),
            alpha_relax=alpha_relax,
            tol=tol,
        )
        if alpha_relax <= 0.0:
            raise ValueError("alpha_relax = 0 never updates the trace")
        u_rt_prev = np.zeros(self.rt.space.n_dofs)
        u_st_prev = np.zeros(self.st.space.n_dofs)
        for k in range(1, max_iter + 1):
            u_rt, neumann = self.dtn_rotor_solve(state.gamma)
            u_st = self.ntd_stator_solve(neumann)
            eps_rt = _rel_l2(u_rt - u_rt_prev, u_rt, self.M_rt)
            eps_st = _rel_l2(u_st - u_st_prev, u_st, self.M_st)
            state.history.append((eps_rt, eps_st))
            state.k = k
            if eps_rt < tol and eps_st < tol:
                return DNResult(u_rt, u_st, state.gamma, k, state.history)
            projected = self.stator_trace_projection(u_st)
            state.gamma = self.relax_update(projected, state.gamma, alpha_relax)
            u_rt_prev, u_st_prev = u_rt, u_st
        raise IterationError(
            f"Dirichlet-Neumann iteration did not reach tol={tol} in {max_iter} steps",
            history=state.history,
        )


def _rel_l2(diff, ref, M):
    denom = np.sqrt(max(ref @ (M @ ref), 1e-300))
    return float(np.sqrt(diff @ (M @ diff)) / denom)
