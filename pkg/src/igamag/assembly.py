"""Gauss-quadrature Galerkin assembly over a multipatch discrete space.

Assembles the magnetostatic stiffness ``k_ij = int nu grad(w_i).grad(w_j)``,
source vectors for impressed currents and permanent magnets, mass matrices
for L2 norms, and per-region integration vectors used by the flux-linkage
post-processing.  Basis gradients are pulled back through the (fixed) NURBS
geometry map; the loops are vectorized per patch over all elements at once,
and accumulation order is fixed, so results are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from numpy.polynomial.legendre import leggauss

from . import linsolve
from .errors import GeometryError, SingularSystemError

__all__ = [
    "MU0",
    "Material",
    "MaterialMap",
    "QuadratureRule",
    "LinearSystem",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_current",
    "assemble_pm",
    "assemble_source",
    "region_integral_vector",
    "integrate",
    "solve_reduced",
]

MU0 = 4.0e-7 * np.pi


@dataclass(frozen=True)
class Material:
    """Linear material data for one region.

    ``conductivity`` is carried along for completeness but inert in the
    magnetostatic model.
    """

    nu: float                                   # reluctivity 1/(mu0 mu_r), m/H
    current_density: float = 0.0                # J_src, A/m^2
    h_source: tuple = (0.0, 0.0)                # permanent-magnet H, A/m
    conductivity: float = 0.0                   # S/m, stored but unused

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ValueError("reluctivity must be positive")


class MaterialMap:
    """Region name -> :class:`Material`, resolved per patch via domain tags."""

    def __init__(self, materials):
        self.materials = dict(materials)

    @classmethod
    def uniform(cls, nu=1.0):
        return cls({"default": Material(nu=nu)})

    def for_patch(self, domain, p):
        region = domain.regions[p]
        try:
            return self.materials[region]
        except KeyError:
            raise KeyError(f"no material for region {region!r} (patch {p})") from None


@dataclass(frozen=True)
class QuadratureRule:
    """Tensorized Gauss-Legendre rule: ``q`` points per direction per element."""

    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("quadrature order must be >= 1")

    def nodes_1d(self, kv):
        """Per-element mapped points/weights, flattened: (nel*q,), (nel*q,)."""
        x, w = leggauss(self.q)
        b = kv.breakpoints
        half = 0.5 * np.diff(b)
        mids = 0.5 * (b[:-1] + b[1:])
        pts = (mids[:, None] + half[:, None] * x[None, :]).ravel()
        wts = (half[:, None] * w[None, :]).ravel()
        return pts, wts


def default_quadrature(space):
    """Default rule: max degree + 1 points per direction."""
    p = max(max(ps.kv_u.degree, ps.kv_v.degree) for ps in space.patch_spaces)
    return QuadratureRule(p + 1)


@dataclass
class LinearSystem:
    """Sparse symmetric system ``K u = j`` on the free DoFs of a space."""

    K: sps.csr_matrix
    rhs: np.ndarray

    def check_symmetry(self, tol=1e-12):
        return linsolve.check_symmetric(self.K, tol=tol)


class _PatchData:
    """Per-patch quadrature, basis and geometry tables (internal)."""

    def __init__(self, patch, ps, rule, p_index):
        from .splines import basis_grid

        self.ps = ps
        self.n_el = (ps.kv_u.n_elements, ps.kv_v.n_elements)
        self.u_pts, self.u_wts = rule.nodes_1d(ps.kv_u)
        self.v_pts, self.v_wts = rule.nodes_1d(ps.kv_v)
        q = rule.q
        fu, du = basis_grid(ps.kv_u, self.u_pts, 1)
        fv, dv = basis_grid(ps.kv_v, self.v_pts, 1)
        nu_el, nv_el = self.n_el
        self.first_u = fu.reshape(nu_el, q)[:, 0]
        self.first_v = fv.reshape(nv_el, q)[:, 0]
        self.Bu = du.reshape(nu_el, q, 2, ps.kv_u.degree + 1)
        self.Bv = dv.reshape(nv_el, q, 2, ps.kv_v.degree + 1)
        G = patch.grid_eval(self.u_pts, self.v_pts, deriv=1)
        mu, mv = len(self.u_pts), len(self.v_pts)
        if np.any(G["det"] <= 0.0):
            bad = np.unravel_index(int(np.argmin(G["det"])), G["det"].shape)
            raise GeometryError(
                f"non-positive Jacobian in patch {p_index} near element "
                f"({bad[0] // q}, {bad[1] // q})"
            )
        def split(a):
            return a.reshape(nu_el, q, nv_el, q, *a.shape[2:]).transpose(
                0, 2, 1, 3, *range(4, 4 + a.ndim - 2)
            )
        self.x = split(G["x"])
        self.xu = split(G["xu"])
        self.xv = split(G["xv"])
        self.det = split(G["det"])
        wu = self.u_wts.reshape(nu_el, q)
        wv = self.v_wts.reshape(nv_el, q)
        self.wq = np.einsum("ek,fl->efkl", wu, wv)

    def grad_phys(self):
        """Physical gradients of all local basis functions at all points.

        Returns (wx, wy) with shape (nel_u, nel_v, q, q, p_u+1, p_v+1).
        """
        gu = np.einsum("eka,flb->efklab", self.Bu[:, :, 1, :], self.Bv[:, :, 0, :])
        gv = np.einsum("eka,flb->efklab", self.Bu[:, :, 0, :], self.Bv[:, :, 1, :])
        det = self.det[..., None, None]
        xu, xv = self.xu, self.xv
        wx = (xv[..., 1, None, None] * gu - xu[..., 1, None, None] * gv) / det
        wy = (-xv[..., 0, None, None] * gu + xu[..., 0, None, None] * gv) / det
        return wx, wy

    def values(self):
        return np.einsum("eka,flb->efklab", self.Bu[:, :, 0, :], self.Bv[:, :, 0, :])

    def gdof_elem(self, space, p):
        pu = self.ps.kv_u.degree
        pv = self.ps.kv_v.degree
        iu = self.first_u[:, None] + np.arange(pu + 1)[None, :]
        iv = self.first_v[:, None] + np.arange(pv + 1)[None, :]
        g = space.gdof[p][iu[:, None, :, None], iv[None, :, None, :]]
        s = space.sign[p][iu[:, None, :, None], iv[None, :, None, :]]
        return g, s


def _patch_data(space, p, rule):
    return _PatchData(space.domain.patches[p], space.patch_spaces[p], rule, p)


def assemble_stiffness(space, materials=None, q=None):
    """Stiffness matrix ``int nu grad(w_i) . grad(w_j)`` on the free DoFs."""
    materials = materials or MaterialMap.uniform()
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rows, cols, vals = [], [], []
    for p in range(len(space.domain.patches)):
        mat = materials.for_patch(space.domain, p)
        pd = _patch_data(space, p, rule)
        wx, wy = pd.grad_phys()
        coef = mat.nu * pd.det * pd.wq
        k_loc = np.einsum("efklab,efklcd,efkl->efabcd", wx, wx, coef, optimize=True)
        k_loc += np.einsum("efklab,efklcd,efkl->efabcd", wy, wy, coef, optimize=True)
        g, s = pd.gdof_elem(space, p)
        sgn = np.einsum("efab,efcd->efabcd", s, s)
        gr = np.broadcast_to(g[:, :, :, :, None, None], k_loc.shape)
        gc = np.broadcast_to(g[:, :, None, None, :, :], k_loc.shape)
        keep = (gr >= 0) & (gc >= 0)
        rows.append(gr[keep])
        cols.append(gc[keep])
        vals.append((k_loc * sgn)[keep])
    K = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_dofs, space.n_dofs),
    )
    return K.tocsr()


def assemble_mass(space, q=None):
    """Mass matrix ``int w_i w_j`` (used for L2 norms and projections)."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rows, cols, vals = [], [], []
    for p in range(len(space.domain.patches)):
        pd = _patch_data(space, p, rule)
        vals_ab = pd.values()
        coef = pd.det * pd.wq
        m_loc = np.einsum("efklab,efklcd,efkl->efabcd", vals_ab, vals_ab, coef, optimize=True)
        g, s = pd.gdof_elem(space, p)
        sgn = np.einsum("efab,efcd->efabcd", s, s)
        gr = np.broadcast_to(g[:, :, :, :, None, None], m_loc.shape)
        gc = np.broadcast_to(g[:, :, None, None, :, :], m_loc.shape)
        keep = (gr >= 0) & (gc >= 0)
        rows.append(gr[keep])
        cols.append(gc[keep])
        vals.append((m_loc * sgn)[keep])
    M = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_dofs, space.n_dofs),
    )
    return M.tocsr()


def _accumulate_vector(space, p, pd, integrand):
    """Sum ``integrand[e,f,k,l] * w_ab`` into the global vector (with signs)."""
    vals_ab = pd.values()
    loc = np.einsum("efklab,efkl->efab", vals_ab, integrand, optimize=True)
    g, s = pd.gdof_elem(space, p)
    keep = g >= 0
    return g[keep], (loc * s)[keep]


def assemble_current(space, materials, q=None):
    """Load vector ``int J_src w_i`` from region-wise current densities."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rhs = np.zeros(space.n_dofs)
    for p in range(len(space.domain.patches)):
        mat = materials.for_patch(space.domain, p)
        if mat.current_density == 0.0:
            continue
        pd = _patch_data(space, p, rule)
        idx, add = _accumulate_vector(space, p, pd, mat.current_density * pd.det * pd.wq)
        np.add.at(rhs, idx, add)
    return rhs


def assemble_pm(space, materials, q=None):
    """Magnet load vector ``int H_pm . (dw_i/dy, -dw_i/dx)``."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rhs = np.zeros(space.n_dofs)
    for p in range(len(space.domain.patches)):
        mat = materials.for_patch(space.domain, p)
        hx, hy = mat.h_source
        if hx == 0.0 and hy == 0.0:
            continue
        pd = _patch_data(space, p, rule)
        wx, wy = pd.grad_phys()
        coef = pd.det * pd.wq
        loc = np.einsum("efklab,efkl->efab", hx * wy - hy * wx, coef, optimize=True)
        g, s = pd.gdof_elem(space, p)
        keep = g >= 0
        np.add.at(rhs, g[keep], (loc * s)[keep])
    return rhs


def assemble_source(space, fn, q=None):
    """Load vector ``int f(x, y) w_i`` for a callable source term."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rhs = np.zeros(space.n_dofs)
    for p in range(len(space.domain.patches)):
        pd = _patch_data(space, p, rule)
        f = fn(pd.x[..., 0], pd.x[..., 1])
        idx, add = _accumulate_vector(space, p, pd, f * pd.det * pd.wq)
        np.add.at(rhs, idx, add)
    return rhs


def region_integral_vector(space, region, q=None):
    """Vector of ``int w_i dx`` over all patches of one region."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    rhs = np.zeros(space.n_dofs)
    for p in space.domain.patch_indices_of_region(region):
        pd = _patch_data(space, p, rule)
        idx, add = _accumulate_vector(space, p, pd, pd.det * pd.wq)
        np.add.at(rhs, idx, add)
    return rhs


def integrate(space, fn=None, region=None, q=None):
    """Integrate ``fn(x, y)`` (default 1) over the domain or one region."""
    rule = QuadratureRule(q) if q else default_quadrature(space)
    patches = (
        range(len(space.domain.patches))
        if region is None
        else space.domain.patch_indices_of_region(region)
    )
    total = 0.0
    for p in patches:
        pd = _patch_data(space, p, rule)
        f = 1.0 if fn is None else fn(pd.x[..., 0], pd.x[..., 1])
        total += float(np.sum(f * pd.det * pd.wq))
    return total


def solve_reduced(system):
    """Solve the constrained SPD system, re-checking the residual."""
    if not system.check_symmetry():
        raise SingularSystemError("assembled system lost symmetry")
    return linsolve.factor_solve_spd(system.K, system.rhs)
