"""Field evaluation, error norms, flux linkage, EMF spectrum and THD.

Works on :class:`SolutionField` objects (a discrete space plus its
coefficient vector).  Error norms integrate with a quadrature two orders
above the assembly default; interface norms integrate in the angle measure
on the union of both sides' trace partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .assembly import QuadratureRule, default_quadrature, _patch_data
from .errors import InverseMapError
from .models import WINDING_LAYOUT
from .splines import collocation_matrix, inverse_map

__all__ = [
    "SolutionField",
    "Spectrum",
    "eval_field",
    "eval_b",
    "error_l2",
    "error_jump",
    "error_multiplier",
    "energy_norm_sq",
    "FluxLinkage",
    "emf_spectrum",
    "thd",
    "dump_field_csv",
]


@dataclass
class SolutionField:
    """Discrete space, its coefficient vector, and a side tag."""

    space: object
    u: np.ndarray
    side: str = "whole"

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.space.n_dofs,):
            raise ValueError("coefficient vector does not match the space dimension")

    def patch_values(self, p, u_pts, v_pts, deriv=0):
        """Values (and physical gradients) on a tensor grid of patch ``p``.

        Returns ``vals`` of shape (mu, mv) and, for ``deriv >= 1``, also
        ``(gx, gy)``.
        """
        ps = self.space.patch_spaces[p]
        C = self.space.local_coeffs(p, self.u)
        Bu = [collocation_matrix(ps.kv_u, u_pts, d) for d in range(deriv + 1)]
        Bv = [collocation_matrix(ps.kv_v, v_pts, d) for d in range(deriv + 1)]
        vals = Bu[0] @ C @ Bv[0].T
        if deriv == 0:
            return vals
        du = Bu[1] @ C @ Bv[0].T
        dv = Bu[0] @ C @ Bv[1].T
        G = self.space.domain.patches[p].grid_eval(u_pts, v_pts, deriv=1)
        xu, xv, det = G["xu"], G["xv"], G["det"]
        gx = (xv[..., 1] * du - xu[..., 1] * dv) / det
        gy = (-xv[..., 0] * du + xu[..., 0] * dv) / det
        return vals, gx, gy

    def locate(self, point, tol=1e-11):
        """Find ``(patch, (xi, eta))`` whose geometry map hits ``point``."""
        pt = np.asarray(point, dtype=float)
        order = []
        for p, patch in enumerate(self.space.domain.patches):
            lo = patch.control_net.min(axis=(0, 1))
            hi = patch.control_net.max(axis=(0, 1))
            pad = 1e-9 * max(np.max(hi - lo), 1.0)
            if np.all(pt >= lo - pad) and np.all(pt <= hi + pad):
                order.append(p)
        for p in order:
            try:
                uv = inverse_map(self.space.domain.patches[p], pt, tol=tol)
                return p, uv
            except InverseMapError:
                continue
        raise InverseMapError(f"point {pt.tolist()} lies outside all patches")


def eval_field(field, points, nan_outside=False):
    """A_z at physical points (inverse-mapping each point into its patch)."""
    out = np.empty(len(points))
    for k, pt in enumerate(np.asarray(points, dtype=float)):
        try:
            p, uv = field.locate(pt)
        except InverseMapError:
            if nan_outside:
                out[k] = np.nan
                continue
            raise
        out[k] = field.patch_values(p, [uv[0]], [uv[1]])[0, 0]
    return out


def eval_b(field, points, nan_outside=False):
    """Flux density ``B = (dA/dy, -dA/dx)`` at physical points."""
    out = np.empty((len(points), 2))
    for k, pt in enumerate(np.asarray(points, dtype=float)):
        try:
            p, uv = field.locate(pt)
        except InverseMapError:
            if nan_outside:
                out[k] = np.nan
                continue
            raise
        _, gx, gy = field.patch_values(p, [uv[0]], [uv[1]], deriv=1)
        out[k] = (gy[0, 0], -gx[0, 0])
    return out


def _error_quadrature(space, q):
    if q is not None:
        return QuadratureRule(q)
    return QuadratureRule(default_quadrature(space).q + 2)


def error_l2(field, exact_fn, q=None):
    """``sqrt(int (u_h - u*)^2)`` over the field's domain."""
    rule = _error_quadrature(field.space, q)
    total = 0.0
    for p in range(len(field.space.domain.patches)):
        pd = _patch_data(field.space, p, rule)
        uh = field.patch_values(p, pd.u_pts, pd.v_pts)
        uh = uh.reshape(pd.n_el[0], rule.q, pd.n_el[1], rule.q).transpose(0, 2, 1, 3)
        ue = exact_fn(pd.x[..., 0], pd.x[..., 1])
        total += float(np.sum((uh - ue) ** 2 * pd.det * pd.wq))
    return np.sqrt(total)


def energy_norm_sq(field, K):
    """``u^T K u`` (squared energy norm of the discrete field)."""
    return float(field.u @ (K @ field.u))


def _union_panels(angles_a, angles_b, lo, hi):
    pts = np.concatenate([angles_a, angles_b, [lo, hi]])
    pts = np.unique(np.clip(pts, lo, hi))
    return pts


def error_jump(field_rt, field_st, trace_rt, trace_st, alpha=0.0, q=6):
    """L2 norm (angle measure) of the interface jump ``u_rt - u_st``.

    The rotor trace is evaluated in rotor-frame angles ``theta - alpha``.
    Integration runs over the union of both sides' trace partitions.
    """
    lo = max(trace_st.theta_min, trace_rt.theta_min + alpha)
    hi = min(trace_st.theta_max, trace_rt.theta_max + alpha)
    panels = _union_panels(
        trace_st.breakpoint_angles(), trace_rt.breakpoint_angles() + alpha, lo, hi
    )
    x, w = leggauss(q)
    total = 0.0
    for a, b in zip(panels[:-1], panels[1:]):
        if b - a < 1e-14:
            continue
        th = 0.5 * (a + b) + 0.5 * (b - a) * x
        wt = 0.5 * (b - a) * w
        u_rt = trace_rt.eval(th - alpha, field_rt.u)
        u_st = trace_st.eval(th, field_st.u)
        total += float(np.sum((u_rt - u_st) ** 2 * wt))
    return np.sqrt(total)


def error_multiplier(lam, harmonics, exact_flux, theta0, theta1, panels=128, q=4):
    """L2 distance between the harmonic flux expansion and an exact flux.

    ``exact_flux(theta)`` must use the same normal convention as the
    multipliers (stator-to-rotor normal).  Angles are rotor-frame.
    """
    orders = np.asarray(harmonics.orders)
    lam = np.asarray(lam, dtype=complex)
    edges = np.linspace(theta0, theta1, panels + 1)
    x, w = leggauss(q)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        th = 0.5 * (a + b) + 0.5 * (b - a) * x
        wt = 0.5 * (b - a) * w
        H = np.exp(-1j * np.outer(th, orders)) @ lam
        diff = np.abs(exact_flux(th) - H) ** 2
        total += float(np.sum(diff * wt))
    return np.sqrt(total)


# --------------------------------------------------------------------------
# machine post-processing
# --------------------------------------------------------------------------


class FluxLinkage:
    """Winding flux linkage from the stator solution.

    ``psi_phase = l_z * N_w / A_half_slot * sum(sign * int A_z)`` over the
    phase's half slots, replicated over all poles of the series-connected
    symmetric winding (each pole contributes equally: both the field and
    the winding direction flip sign from pole to pole).
    """

    def __init__(self, space_st, params, q=None):
        from .assembly import integrate, region_integral_vector

        self.params = params
        self.vectors = {}
        self.areas = {}
        for k in range(params.slots_per_pole):
            for layer in ("in", "out"):
                region = f"slot{k}_{layer}"
                self.vectors[region] = region_integral_vector(space_st, region, q=q)
                self.areas[region] = integrate(space_st, region=region, q=q)

    def psi(self, u_st):
        """Flux linkage per phase (Wb) for one stator coefficient vector."""
        m = self.params
        out = {}
        for phase in "abc":
            acc = 0.0
            for layer in ("in", "out"):
                for k, (ph, sgn) in enumerate(WINDING_LAYOUT[layer]):
                    if ph != phase:
                        continue
                    region = f"slot{k}_{layer}"
                    acc += sgn * (self.vectors[region] @ u_st) / self.areas[region]
            out[phase] = m.axial_length * m.n_turns * m.pole_count * acc
        return out


@dataclass
class Spectrum:
    """One-sided EMF spectrum over one electrical period.

    ``coefficients[p-1]`` is the complex amplitude of electrical order ``p``
    (p >= 1); magnitudes are ``abs``.  ``base_frequency`` is the electrical
    fundamental in Hz.
    """

    orders: np.ndarray
    coefficients: np.ndarray
    base_frequency: float

    @property
    def magnitudes(self):
        return np.abs(self.coefficients)

    def magnitude(self, p):
        return float(np.abs(self.coefficients[int(p) - 1]))


def emf_spectrum(alphas, psi_samples, pole_pitch, speed):
    """EMF spectrum from flux-linkage samples over one pole pitch.

    Parameters
    ----------
    alphas : array
        Uniform rotor angles in ``[0, pole_pitch)`` (at least 32 for the
        machine studies; fewer is accepted for synthetic tests).
    psi_samples : array
        Flux linkage at those angles (one phase).
    pole_pitch : float
    speed : float
        Mechanical speed in rad/s, > 0.

    The electrical period covers two pole pitches and is reconstructed via
    ``psi(alpha + tau) = -psi(alpha)``, which kills all even orders exactly;
    the EMF ``e = -d psi / dt`` is formed by spectral differentiation.
    """
    alphas = np.asarray(alphas, dtype=float)
    psi_samples = np.asarray(psi_samples, dtype=float)
    if speed <= 0.0:
        raise ValueError("speed must be positive")
    n = len(alphas)
    step = pole_pitch / n
    if not np.allclose(np.diff(alphas), step, rtol=0, atol=1e-12 * pole_pitch):
        raise ValueError("alpha grid must be uniform over [0, pole_pitch)")
    if abs(alphas[0]) > 1e-12 * pole_pitch:
        raise ValueError("alpha grid must start at 0")
    full = np.concatenate([psi_samples, -psi_samples])
    t_period = 2.0 * pole_pitch / speed
    omega_el = 2.0 * np.pi / t_period
    c = np.fft.rfft(full) / len(full)
    p_max = len(full) // 2 - 1  # drop the Nyquist bin
    orders = np.arange(1, p_max + 1)
    e_coef = -1j * orders * omega_el * c[1: p_max + 1] * 2.0  # one-sided
    return Spectrum(orders=orders, coefficients=e_coef, base_frequency=omega_el / (2 * np.pi))


def thd(spectrum):
    """Total harmonic distortion ``sqrt(sum_{p>=2} E_p^2) / E_1``."""
    mags = spectrum.magnitudes
    if mags[0] == 0.0:
        raise ValueError("fundamental is zero; THD undefined")
    return float(np.sqrt(np.sum(mags[1:] ** 2)) / mags[0])


def dump_field_csv(field, points, path):
    """Point-cloud CSV dump: x, y, A_z, B_x, B_y."""
    vals = eval_field(field, points, nan_outside=True)
    bvec = eval_b(field, points, nan_outside=True)
    with open(path, "w") as fh:
        fh.write("x,y,A_z,B_x,B_y\n")
        for (x, y), a, (bx, by) in zip(points, vals, bvec):
            fh.write(f"{x:.12e},{y:.12e},{a:.12e},{bx:.12e},{by:.12e}\n")
