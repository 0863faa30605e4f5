"""Harmonic interface coupling of two independently discretized annuli.

The azimuthal field strength on the coupling circle is expanded in a small
set of harmonics ``exp(-i l theta)`` acting as Lagrange multipliers.  The
rotor expansion is written in the rotor frame (``theta' = theta - alpha``),
so a relative rotation of the two sides enters only through diagonal phase
factors ``exp(+i l alpha)`` and the coupling matrices are assembled once.

Sign conventions (fixed here and validated against a monolithic oracle by
the test suite): with ``U = [u_rt; u_st]``,

* rotor coupling column  ``g_rt[i, l] = + int exp(-i l theta') w_i dtheta'``
* stator coupling column ``g_st[i, l] = - int exp(-i l theta) w_i dtheta``
* weak continuity row    ``G_rt^H u_rt + R(-alpha) G_st^H u_st = 0``

which makes the saddle-point block system hermitian with the multiplier
column ``[G_rt; G_st R(alpha)]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from numpy.polynomial.legendre import leggauss

from . import linsolve
from .errors import SingularSystemError

__all__ = [
    "HarmonicSet",
    "CouplingOperator",
    "RotationMatrix",
    "SaddleSystem",
    "CoupledSolution",
    "select_harmonics",
    "assemble_coupling",
    "rotation_matrix",
    "harmonic_mass",
    "assemble_saddle",
    "realify",
    "solve_coupled",
    "infsup_constant",
    "HarmonicCoupling",
]


@dataclass(frozen=True)
class HarmonicSet:
    """Double-sided set of integer harmonic orders on the coupling circle."""

    orders: tuple
    symmetry: str          # 'periodic' or 'antiperiodic'
    pole_pitch: float      # radians

    def __post_init__(self):
        orders = tuple(self.orders)
        if not orders:
            raise ValueError("harmonic set is empty")
        if sorted(orders) != list(orders):
            raise ValueError("orders must be sorted")
        for l in orders:
            if -l not in orders:
                raise ValueError(f"set not double-sided: missing {-l}")
            phase = np.exp(-1j * l * self.pole_pitch)
            target = -1.0 if self.symmetry == "antiperiodic" else 1.0
            if abs(phase - target) > 1e-9:
                raise ValueError(f"order {l} violates the {self.symmetry} phase condition")

    @property
    def n_gamma(self):
        return len(self.orders)

    def index_of(self, l):
        return self.orders.index(l)


def select_harmonics(symmetry, pole_pitch, max_order):
    """All admissible orders up to ``max_order`` for the given symmetry.

    Anti-periodic sets keep orders with ``exp(-i l tau) = -1``; periodic
    sets those with ``exp(-i l tau) = +1``.  Raises when no order qualifies.
    """
    if symmetry not in ("periodic", "antiperiodic"):
        raise ValueError("symmetry must be 'periodic' or 'antiperiodic'")
    target = -1.0 if symmetry == "antiperiodic" else 1.0
    orders = [
        l
        for l in range(-int(max_order), int(max_order) + 1)
        if abs(np.exp(-1j * l * pole_pitch) - target) < 1e-9
    ]
    if not orders:
        raise ValueError(
            f"no {symmetry} harmonic of order <= {max_order} for pole pitch "
            f"{pole_pitch:.6g}; increase max_order"
        )
    return HarmonicSet(tuple(orders), symmetry, pole_pitch)


@dataclass(frozen=True)
class CouplingOperator:
    """Coupling matrix of one side: shape (side DoFs, number of harmonics)."""

    G: np.ndarray
    harmonics: HarmonicSet
    side: str
    radius: float
    theta_range: tuple


def assemble_coupling(trace, harmonics, side, q=None):
    """Coupling matrix of one interface side against the harmonic set.

    Entries are ``+int exp(-i l theta) w_i(theta) dtheta`` on the rotor side
    and the negative of that on the stator side, integrated in the angle
    measure over the trace elements (Gauss with ``p + 2`` points per element
    by default; the harmonics are smooth).
    """
    if side not in ("rt", "st"):
        raise ValueError("side must be 'rt' or 'st'")
    from .splines import basis_grid

    n_dofs = trace.n_dofs
    orders = np.asarray(harmonics.orders)
    G = np.zeros((n_dofs, harmonics.n_gamma), dtype=complex)
    sign = 1.0 if side == "rt" else -1.0
    for edge in trace.edges:
        qq = q or (edge.kv.degree + 2)
        x, w = leggauss(qq)
        b = edge.kv.breakpoints
        half = 0.5 * np.diff(b)
        mids = 0.5 * (b[:-1] + b[1:])
        t = (mids[:, None] + half[:, None] * x[None, :]).ravel()
        wt = (half[:, None] * w[None, :]).ravel()
        theta, dtheta = edge.angle_of(t)
        first, ders = basis_grid(edge.kv, t, 0)
        phases = np.exp(-1j * np.outer(theta, orders))  # (nq, n_gamma)
        coef = sign * wt * np.abs(dtheta)
        for k in range(len(t)):
            for a in range(edge.kv.degree + 1):
                g = edge.gdofs[first[k] + a]
                if g < 0:
                    continue
                G[g, :] += coef[k] * ders[k, 0, a] * edge.signs[first[k] + a] * phases[k]
    return G


@dataclass(frozen=True)
class RotationMatrix:
    """Diagonal unitary phase matrix ``r_ll(alpha) = exp(+i l alpha)``."""

    harmonics: HarmonicSet
    alpha: float

    @property
    def diag(self):
        return np.exp(1j * np.asarray(self.harmonics.orders) * self.alpha)

    def apply(self, lam):
        """R(alpha) @ lam."""
        return self.diag * lam

    def apply_conj(self, lam):
        """R(-alpha) @ lam."""
        return np.conj(self.diag) * lam


def rotation_matrix(harmonics, alpha):
    return RotationMatrix(harmonics, float(alpha))


def harmonic_mass(harmonics, theta0, theta1):
    """Gram matrix ``m[l, k] = int_arc exp(i (l - k) theta) dtheta`` (closed form)."""
    orders = np.asarray(harmonics.orders)
    diff = orders[:, None] - orders[None, :]
    M = np.empty((len(orders), len(orders)), dtype=complex)
    nz = diff != 0
    M[~nz] = theta1 - theta0
    d = diff[nz]
    M[nz] = (np.exp(1j * d * theta1) - np.exp(1j * d * theta0)) / (1j * d)
    return M


class SaddleSystem:
    """Hermitian block system ``[[K, C^H], [C, 0]] [U; lam] = [J; 0]``.

    Unknown ordering is ``U = [u_rt; u_st]`` with ``K = diag(K_rt, K_st)``
    and the weak-continuity rows ``C = [G_rt^H, R(-alpha) G_st^H]``.
    """

    def __init__(self, K_rt, K_st, G_rt, G_st, rotation, j_rt, j_st):
        self.K_rt = sps.csr_matrix(K_rt)
        self.K_st = sps.csr_matrix(K_st)
        self.G_rt = np.asarray(G_rt, dtype=complex)
        self.G_st = np.asarray(G_st, dtype=complex)
        self.rotation = rotation
        self.j_rt = np.asarray(j_rt, dtype=float)
        self.j_st = np.asarray(j_st, dtype=float)
        self.n_rt = self.K_rt.shape[0]
        self.n_st = self.K_st.shape[0]
        self.harmonics = rotation.harmonics
        self.n_gamma = self.harmonics.n_gamma
        if self.G_rt.shape != (self.n_rt, self.n_gamma):
            raise ValueError("G_rt shape mismatch")
        if self.G_st.shape != (self.n_st, self.n_gamma):
            raise ValueError("G_st shape mismatch")
        if self.j_rt.shape != (self.n_rt,) or self.j_st.shape != (self.n_st,):
            raise ValueError("right-hand side shape mismatch")

    @property
    def n_primal(self):
        return self.n_rt + self.n_st

    def primal_coupling(self):
        """Multiplier column block ``C^H = [G_rt; G_st R(alpha)]``."""
        return np.vstack([self.G_rt, self.G_st * self.rotation.diag[None, :]])

    def constraint_rows(self):
        return self.primal_coupling().conj().T

    def stiffness(self):
        return sps.block_diag([self.K_rt, self.K_st], format="csr")

    def rhs(self):
        return np.concatenate([self.j_rt, self.j_st])

    def complex_matrix(self):
        """Full hermitian sparse matrix (for the dual-route complex solve)."""
        CH = sps.csr_matrix(self.primal_coupling())
        CH.eliminate_zeros()
        Z = sps.csr_matrix((self.n_gamma, self.n_gamma), dtype=complex)
        return sps.bmat(
            [[self.stiffness().astype(complex), CH], [CH.conj().T, Z]], format="csc"
        )

    def weak_continuity_residual(self, u):
        """Relative norm of the constraint rows applied to a primal vector."""
        C = self.constraint_rows()
        scale = np.linalg.norm(C, ord="fro") * max(np.linalg.norm(u), 1e-300)
        return float(np.linalg.norm(C @ u) / scale)


def assemble_saddle(K_rt, K_st, G_rt, G_st, rotation, j_rt, j_st):
    """Couple the two per-side Galerkin systems through the harmonic constraint."""
    return SaddleSystem(K_rt, K_st, G_rt, G_st, rotation, j_rt, j_st)


class _RealMultiplierMap:
    """Bookkeeping between complex multipliers and real cos/sin unknowns.

    Real unknown ordering: ``a_0`` (if order 0 is present), then for each
    positive order ``l`` the pair ``(a_l, b_l)`` so that
    ``H(theta) = a_0 + sum_l a_l cos(l theta) + b_l sin(l theta)`` and
    ``lam_{+l} = (a_l + i b_l) / 2``, ``lam_{-l} = (a_l - i b_l) / 2``.
    """

    def __init__(self, harmonics):
        self.harmonics = harmonics
        self.has_zero = 0 in harmonics.orders
        self.positive = [l for l in harmonics.orders if l > 0]
        self.n_real = (1 if self.has_zero else 0) + 2 * len(self.positive)

    def real_columns(self, G_tilde):
        """Real column block from the complex primal coupling block."""
        cols = []
        if self.has_zero:
            c = G_tilde[:, self.harmonics.index_of(0)]
            cols.append(c.real)
        for l in self.positive:
            c = G_tilde[:, self.harmonics.index_of(l)]
            cols.append(c.real)
            cols.append(-c.imag)
        return np.column_stack(cols)

    def to_complex(self, y):
        lam = np.zeros(self.harmonics.n_gamma, dtype=complex)
        k = 0
        if self.has_zero:
            lam[self.harmonics.index_of(0)] = y[0]
            k = 1
        for l in self.positive:
            a, b = y[k], y[k + 1]
            lam[self.harmonics.index_of(l)] = 0.5 * (a + 1j * b)
            lam[self.harmonics.index_of(-l)] = 0.5 * (a - 1j * b)
            k += 2
        return lam

    def to_real(self, lam):
        y = np.zeros(self.n_real)
        k = 0
        if self.has_zero:
            y[0] = lam[self.harmonics.index_of(0)].real
            k = 1
        for l in self.positive:
            lp = lam[self.harmonics.index_of(l)]
            y[k] = 2.0 * lp.real
            y[k + 1] = 2.0 * lp.imag
            k += 2
        return y


def realify(saddle):
    """Real symmetric form of the saddle system.

    Conjugate harmonic pairs are traded for cosine/sine multiplier DoFs;
    the primal solution is unchanged.  Returns
    ``(matrix, rhs, multiplier_map)``.
    """
    mmap = _RealMultiplierMap(saddle.harmonics)
    Creal = mmap.real_columns(saddle.primal_coupling())
    Csp = sps.csr_matrix(Creal)
    Csp.eliminate_zeros()
    Z = sps.csr_matrix((mmap.n_real, mmap.n_real))
    S = sps.bmat([[saddle.stiffness(), Csp], [Csp.T, Z]], format="csc")
    rhs = np.concatenate([saddle.rhs(), np.zeros(mmap.n_real)])
    return S, rhs, mmap


@dataclass
class CoupledSolution:
    """Primal fields and interface multipliers of one coupled solve."""

    u_rt: np.ndarray
    u_st: np.ndarray
    lam: np.ndarray           # complex, indexed by HarmonicSet.orders
    harmonics: HarmonicSet
    alpha: float
    continuity_residual: float

    def multiplier_function(self, thetas):
        """Reconstructed azimuthal field strength at rotor-frame angles."""
        orders = np.asarray(self.harmonics.orders)
        return np.exp(-1j * np.outer(np.asarray(thetas), orders)) @ self.lam


def solve_coupled(saddle, method="real"):
    """Direct solve of the coupled saddle system.

    ``method='real'`` factorizes the realified symmetric-indefinite matrix
    (default); ``method='complex'`` the hermitian complex one.  Both paths
    produce the same primal solution (a test pins them together).
    """
    n = saddle.n_primal
    if method == "real":
        S, rhs, mmap = realify(saddle)
        try:
            x = linsolve.factor(S)(rhs)
        except SingularSystemError as exc:
            raise SingularSystemError(
                f"{exc}; the coupled system may be unstable - use fewer harmonics "
                "or a finer interface mesh"
            ) from exc
        U = x[:n]
        lam = mmap.to_complex(x[n:])
    elif method == "complex":
        S = saddle.complex_matrix()
        rhs = np.concatenate([saddle.rhs().astype(complex), np.zeros(saddle.n_gamma)])
        x = linsolve.factor(S)(rhs)
        U = x[:n].real
        lam = x[n:]
    else:
        raise ValueError("method must be 'real' or 'complex'")
    return CoupledSolution(
        u_rt=U[: saddle.n_rt],
        u_st=U[saddle.n_rt:],
        lam=lam,
        harmonics=saddle.harmonics,
        alpha=saddle.rotation.alpha,
        continuity_residual=saddle.weak_continuity_residual(U),
    )


def _solve_real_K_complex_rhs(solve, B):
    """Apply a real SPD solve columnwise to a complex matrix."""
    B = np.atleast_2d(B.T).T
    X = np.empty_like(B, dtype=complex)
    for k in range(B.shape[1]):
        X[:, k] = solve(B[:, k].real) + 1j * solve(B[:, k].imag)
    return X


def infsup_constant(K, G, M):
    """Inf-sup constant of the coupled formulation.

    Solves the generalized eigenvalue problem ``G^H K^-1 G x = sigma^2 M x``
    (K: constrained SPD stiffness, G: multiplier column block, M: harmonic
    Gram matrix) and returns ``(beta, sigmas)`` with ``beta = min sigma``.
    """
    if not linsolve.check_symmetric(K):
        raise SingularSystemError("stiffness block must be symmetric")
    solve = linsolve.factor(sps.csc_matrix(K))
    X = _solve_real_K_complex_rhs(solve, np.asarray(G, dtype=complex))
    A = np.conj(G).T @ X
    A = 0.5 * (A + A.conj().T)
    w = linsolve.gen_eig_sym(A, M)
    sigmas = np.sqrt(np.clip(w, 0.0, None))
    return float(sigmas.min()), sigmas


class HarmonicCoupling:
    """Factorized coupled solver for sweeps over the rotation angle.

    The two stiffness blocks are factorized once and the dense Schur
    complement over the harmonics is rebuilt per angle from precomputed
    pieces; only the rotation phases change between angles, so one solve
    per rotor position costs a few small dense operations.
    """

    def __init__(self, K_rt, K_st, G_rt, G_st, harmonics, j_rt, j_st):
        self.harmonics = harmonics
        self.G_rt = np.asarray(G_rt, dtype=complex)
        self.G_st = np.asarray(G_st, dtype=complex)
        self.j_rt = j_rt
        self.j_st = j_st
        self.K_rt = sps.csr_matrix(K_rt)
        self.K_st = sps.csr_matrix(K_st)
        solve_rt = linsolve.factor(sps.csc_matrix(K_rt))
        solve_st = linsolve.factor(sps.csc_matrix(K_st))
        self.X_rt = _solve_real_K_complex_rhs(solve_rt, self.G_rt)
        self.X_st = _solve_real_K_complex_rhs(solve_st, self.G_st)
        self.A_rt = self.G_rt.conj().T @ self.X_rt
        self.A_st = self.G_st.conj().T @ self.X_st
        self.y_rt = solve_rt(j_rt)
        self.y_st = solve_st(j_st)
        self.b_rt = self.G_rt.conj().T @ self.y_rt
        self.b_st = self.G_st.conj().T @ self.y_st

    def solve(self, alpha):
        rot = rotation_matrix(self.harmonics, alpha)
        d = rot.diag
        S = self.A_rt + (np.conj(d)[:, None] * self.A_st) * d[None, :]
        rhs = self.b_rt + np.conj(d) * self.b_st
        try:
            lam = np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"harmonic Schur complement singular: {exc}") from exc
        u_rt = self.y_rt - (self.X_rt @ lam).real
        u_st = self.y_st - (self.X_st @ (d * lam)).real
        saddle = SaddleSystem(self.K_rt, self.K_st, self.G_rt, self.G_st, rot,
                              self.j_rt, self.j_st)
        U = np.concatenate([u_rt, u_st])
        return CoupledSolution(
            u_rt=u_rt,
            u_st=u_st,
            lam=lam,
            harmonics=self.harmonics,
            alpha=alpha,
            continuity_residual=saddle.weak_continuity_residual(U),
        )
