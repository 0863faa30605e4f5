"""B-spline / NURBS bases, curves, tensor-product patches and mappings.

Evaluation follows the classical Cox-de Boor recursion and its derivative
form; geometry is carried by rational (NURBS) control nets so that circular
arcs are represented exactly.  All objects are immutable after construction
and every function here is pure, so concurrent use is safe.

Conventions
-----------
* Knot vectors are open (first/last knot repeated ``degree + 1`` times) and
  live on the unit interval ``[0, 1]``.
* Patch sides are named ``'u0'`` (xi = 0), ``'u1'`` (xi = 1), ``'v0'``
  (eta = 0) and ``'v1'`` (eta = 1).  Edge curves on ``u*`` sides are
  parametrized by eta, on ``v*`` sides by xi.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import GeometryError, InverseMapError

__all__ = [
    "KnotVector",
    "NurbsCurve",
    "NurbsPatch",
    "MapSample",
    "find_span",
    "bspline_eval",
    "nurbs_basis_eval",
    "make_circular_arc",
    "make_line",
    "ruled_patch",
    "bilinear_patch",
    "annulus_patch",
    "surface_map_eval",
    "h_refine",
    "inverse_map",
    "SIDES",
]

SIDES = ("u0", "u1", "v0", "v1")


class KnotVector:
    """Open knot vector on [0, 1] together with a polynomial degree.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p >= 0``.
    knots : array_like
        Non-decreasing knot sequence with ``0`` and ``1`` each repeated
        ``p + 1`` times at the ends.

    Attributes
    ----------
    n : int
        Dimension of the spanned B-spline basis, ``len(knots) - p - 1``.
    breakpoints : ndarray
        Distinct knot values (element boundaries).
    """

    def __init__(self, degree, knots):
        degree = int(degree)
        knots = np.asarray(knots, dtype=float)
        if degree < 0:
            raise ValueError("degree must be non-negative")
        if knots.ndim != 1:
            raise ValueError("knots must be a 1D sequence")
        if np.any(np.diff(knots) < 0.0):
            raise ValueError("knots must be non-decreasing")
        if len(knots) < 2 * (degree + 1):
            raise ValueError("knot vector too short for the degree")
        if not (np.all(knots[: degree + 1] == knots[0]) and np.all(knots[-(degree + 1):] == knots[-1])):
            raise ValueError("knot vector must be open (end multiplicity p+1)")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must span [0, 1]")
        interior = knots[degree + 1: -(degree + 1)]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if np.any(counts > degree):
                raise ValueError("interior knot multiplicity exceeds degree")
        self.degree = degree
        self.knots = knots
        self.knots.setflags(write=False)
        self.n = len(knots) - degree - 1
        self.breakpoints = np.unique(knots)
        self.breakpoints.setflags(write=False)

    @classmethod
    def open_uniform(cls, degree, n_elements, breaks=None):
        """Open knot vector with uniform elements (or explicit breakpoints)."""
        if breaks is None:
            if n_elements < 1:
                raise ValueError("need at least one element")
            breaks = np.linspace(0.0, 1.0, n_elements + 1)
        breaks = np.asarray(breaks, dtype=float)
        knots = np.concatenate([np.zeros(degree), breaks, np.ones(degree)])
        return cls(degree, knots)

    @property
    def n_elements(self):
        return len(self.breakpoints) - 1

    def element_spans(self):
        """Knot-span index of each element, in breakpoint order."""
        return np.searchsorted(self.knots, self.breakpoints[:-1], side="right") - 1

    def find_span(self, xi):
        return find_span(self, xi)

    def greville(self):
        """Greville abscissae (knot averages), one per basis function."""
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        return np.array([self.knots[i + 1: i + p + 1].mean() for i in range(self.n)])

    def refined(self, new_knots):
        """Knot vector with ``new_knots`` inserted (values strictly inside (0, 1))."""
        new_knots = np.atleast_1d(np.asarray(new_knots, dtype=float))
        if new_knots.size == 0:
            return self
        if np.any((new_knots <= 0.0) | (new_knots >= 1.0)):
            raise ValueError("inserted knots must lie strictly inside (0, 1)")
        return KnotVector(self.degree, np.sort(np.concatenate([self.knots, new_knots])))

    def uniform_refined(self, times=1):
        """Insert element midpoints ``times`` times (dyadic refinement)."""
        kv = self
        for _ in range(times):
            mids = 0.5 * (kv.breakpoints[:-1] + kv.breakpoints[1:])
            kv = kv.refined(mids)
        return kv

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and len(self.knots) == len(other.knots)
            and np.allclose(self.knots, other.knots, atol=1e-14)
        )

    def __repr__(self):
        return f"KnotVector(p={self.degree}, n={self.n}, elements={self.n_elements})"


def find_span(kv, xi):
    """Index ``s`` of the knot span containing ``xi``.

    Satisfies ``knots[s] <= xi < knots[s+1]``; ``xi = 1`` maps to the last
    non-empty span.  Raises for ``xi`` outside ``[0, 1]``.
    """
    xi = float(xi)
    if xi < 0.0 or xi > 1.0:
        raise ValueError(f"parameter {xi} outside [0, 1]")
    p, knots = kv.degree, kv.knots
    if xi >= knots[kv.n]:
        return kv.n - 1
    return int(np.searchsorted(knots, xi, side="right") - 1)


def _all_ders(kv, xi, span, nders):
    """Values and derivatives of the p+1 nonzero B-splines at ``xi``.

    Returns an array ``ders`` of shape ``(nders + 1, p + 1)`` with
    ``ders[m, a] = d^m B_{span-p+a} / dxi^m``.  Derivative orders above the
    degree are returned as zeros.  This is the standard divided-difference
    form of the Cox-de Boor recursion (Piegl & Tiller, A2.3).
    """
    p, U = kv.degree, kv.knots
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - U[span + 1 - j]
        right[j] = U[span + j] - xi
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((nders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    ncap = min(nders, p)
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, ncap + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, ncap + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


def bspline_eval(kv, xi, deriv_order=0):
    """Nonzero B-spline basis values (and derivatives) at ``xi``.

    Parameters
    ----------
    kv : KnotVector
    xi : float
        Evaluation point in ``[0, 1]``.
    deriv_order : int
        Highest derivative order requested.

    Returns
    -------
    first : int
        Index of the first nonzero basis function; the nonzero ones are
        ``first, ..., first + p``.
    ders : ndarray, shape (deriv_order + 1, p + 1)
        ``ders[m, a]`` is the m-th derivative of basis function
        ``first + a`` at ``xi``.  Orders above the degree come back zero.
    """
    span = find_span(kv, xi)
    return span - kv.degree, _all_ders(kv, xi, span, deriv_order)


def basis_grid(kv, pts, deriv_order=0):
    """Vectorized :func:`bspline_eval` over many points.

    Returns ``(first, ders)`` with ``first`` of shape ``(m,)`` and ``ders``
    of shape ``(m, deriv_order + 1, p + 1)``.
    """
    pts = np.asarray(pts, dtype=float)
    first = np.empty(pts.shape, dtype=int)
    ders = np.empty(pts.shape + (deriv_order + 1, kv.degree + 1))
    for i, xi in enumerate(pts):
        span = find_span(kv, xi)
        first[i] = span - kv.degree
        ders[i] = _all_ders(kv, xi, span, deriv_order)
    return first, ders


def collocation_matrix(kv, pts, deriv=0):
    """Dense matrix ``A[i, j] = d^deriv B_j(pts[i])`` of shape (m, n)."""
    first, ders = basis_grid(kv, pts, deriv)
    A = np.zeros((len(pts), kv.n))
    for i in range(len(pts)):
        A[i, first[i]: first[i] + kv.degree + 1] = ders[i, deriv]
    return A


def nurbs_basis_eval(kv, weights, xi, deriv_order=0):
    """Rational (NURBS) basis values and derivatives at ``xi``.

    The rational functions are ``N_i = w_i B_i / sum_j w_j B_j``;
    derivatives follow from the general quotient rule.  All weights must be
    positive.

    Returns
    -------
    first : int
    ders : ndarray, shape (deriv_order + 1, p + 1)
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0.0):
        raise ValueError("NURBS weights must be positive")
    first, bders = bspline_eval(kv, xi, deriv_order)
    wloc = weights[first: first + kv.degree + 1]
    A = wloc[None, :] * bders                      # (k+1, p+1): d^m (w_i B_i)
    W = A.sum(axis=1)                              # d^m of the weight function
    N = np.empty_like(A)
    for k in range(deriv_order + 1):
        acc = A[k].copy()
        for j in range(1, k + 1):
            acc -= comb(k, j) * W[j] * N[k - j]
        N[k] = acc / W[0]
    return first, N


@dataclass(frozen=True)
class MapSample:
    """Geometry map evaluated at one reference point."""

    point: np.ndarray      # physical (x, y)
    jacobian: np.ndarray   # 2x2, d(x, y)/d(xi, eta)
    det: float


class NurbsCurve:
    """Rational curve ``F(xi) = sum_i P_i N_i(xi)`` in 2D."""

    def __init__(self, kv, control_points, weights):
        control_points = np.asarray(control_points, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if control_points.shape[0] != kv.n or weights.shape != (kv.n,):
            raise ValueError("control point / weight count must equal the basis dimension")
        if np.any(weights <= 0.0):
            raise ValueError("NURBS weights must be positive")
        self.kv = kv
        self.control_points = control_points
        self.weights = weights
        for a in (self.control_points, self.weights):
            a.setflags(write=False)

    @property
    def dim(self):
        return self.control_points.shape[1]

    def eval(self, xi, deriv_order=0):
        """Point and derivatives; returns array of shape (deriv_order+1, dim)."""
        first, bders = bspline_eval(self.kv, xi, deriv_order)
        sl = slice(first, first + self.kv.degree + 1)
        wloc = self.weights[sl]
        Aw = bders @ (wloc[:, None] * self.control_points[sl])   # (k+1, dim)
        W = bders @ wloc                                         # (k+1,)
        C = np.empty_like(Aw)
        for k in range(deriv_order + 1):
            acc = Aw[k].copy()
            for j in range(1, k + 1):
                acc -= comb(k, j) * W[j] * C[k - j]
            C[k] = acc / W[0]
        return C

    def eval_many(self, pts, deriv_order=0):
        """Stacked :meth:`eval`; returns array (m, deriv_order+1, dim)."""
        return np.array([self.eval(x, deriv_order) for x in np.asarray(pts, dtype=float)])

    def refined(self, new_knots):
        """Curve with knots inserted; the point set is unchanged."""
        hom = np.column_stack([self.control_points * self.weights[:, None], self.weights])
        kv, hom = _insert_knots_1d(self.kv, hom, new_knots)
        w = hom[:, -1]
        return NurbsCurve(kv, hom[:, :-1] / w[:, None], w)

    def reversed(self):
        """Same point set traversed with xi -> 1 - xi."""
        kv = KnotVector(self.kv.degree, 1.0 - self.kv.knots[::-1])
        return NurbsCurve(kv, self.control_points[::-1].copy(), self.weights[::-1].copy())


def _insert_knots_1d(kv, rows, new_knots):
    """Insert knots into ``kv`` updating homogeneous control rows (n, d)."""
    new_knots = np.atleast_1d(np.asarray(new_knots, dtype=float))
    knots = kv.knots.copy()
    p = kv.degree
    rows = np.asarray(rows, dtype=float).copy()
    for u in np.sort(new_knots):
        if not (0.0 < u < 1.0):
            raise ValueError("inserted knots must lie strictly inside (0, 1)")
        if np.sum(np.isclose(knots, u, atol=1e-14)) >= p:
            raise ValueError(f"inserting {u} would exceed multiplicity p={p}")
        k = int(np.searchsorted(knots, u, side="right") - 1)
        new_rows = np.empty((rows.shape[0] + 1, rows.shape[1]))
        new_rows[: k - p + 1] = rows[: k - p + 1]
        for i in range(k - p + 1, k + 1):
            alpha = (u - knots[i]) / (knots[i + p] - knots[i])
            new_rows[i] = alpha * rows[i] + (1.0 - alpha) * rows[i - 1]
        new_rows[k + 1:] = rows[k:]
        rows = new_rows
        knots = np.insert(knots, k + 1, u)
    return KnotVector(p, knots), rows


def make_line(a, b):
    """Straight segment from ``a`` to ``b`` as a degree-1 curve."""
    kv = KnotVector.open_uniform(1, 1)
    return NurbsCurve(kv, np.array([a, b], dtype=float), np.ones(2))


def make_line_quadratic(a, b):
    """Straight segment as a degree-2 curve with linear parametrization."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kv = KnotVector.open_uniform(2, 1)
    return NurbsCurve(kv, np.array([a, 0.5 * (a + b), b]), np.ones(3))


def make_circular_arc(radius, theta0, theta1, center=(0.0, 0.0)):
    """Exact circular arc as a quadratic rational curve.

    Parameters
    ----------
    radius : float
        Positive radius.
    theta0, theta1 : float
        Start/end angles in radians with ``0 < theta1 - theta0 < pi``.
        Arcs wider than 90 degrees are composed of equal sub-segments of at
        most 90 degrees, joined with double interior knots.
    center : pair of float

    Returns
    -------
    NurbsCurve
        Every curve point lies on the circle up to machine rounding.
    """
    if radius <= 0.0:
        raise GeometryError("arc radius must be positive")
    sweep = theta1 - theta0
    if sweep <= 0.0 or sweep >= np.pi:
        raise GeometryError("arc sweep must lie in (0, pi)")
    center = np.asarray(center, dtype=float)
    nseg = max(1, int(np.ceil(sweep / (0.5 * np.pi) - 1e-12)))
    dseg = sweep / nseg
    w_mid = np.cos(0.5 * dseg)
    pts = [center + radius * np.array([np.cos(theta0), np.sin(theta0)])]
    wts = [1.0]
    for s in range(nseg):
        a = theta0 + s * dseg
        b = a + dseg
        mid = 0.5 * (a + b)
        pts.append(center + (radius / w_mid) * np.array([np.cos(mid), np.sin(mid)]))
        pts.append(center + radius * np.array([np.cos(b), np.sin(b)]))
        wts.extend([w_mid, 1.0])
    interior = np.repeat(np.linspace(0.0, 1.0, nseg + 1)[1:-1], 2)
    knots = np.concatenate([[0.0, 0.0, 0.0], interior, [1.0, 1.0, 1.0]])
    return NurbsCurve(KnotVector(2, knots), np.array(pts), np.array(wts))


class NurbsPatch:
    """Tensor-product rational surface over the reference square.

    Parameters
    ----------
    kv_u, kv_v : KnotVector
        Knot vectors of the two parametric directions.
    control_net : ndarray, shape (n_u, n_v, 2)
    weights : ndarray, shape (n_u, n_v), all positive
    """

    def __init__(self, kv_u, kv_v, control_net, weights):
        control_net = np.asarray(control_net, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if control_net.shape != (kv_u.n, kv_v.n, 2):
            raise ValueError("control net shape must be (n_u, n_v, 2)")
        if weights.shape != (kv_u.n, kv_v.n):
            raise ValueError("weight grid shape must be (n_u, n_v)")
        if np.any(weights <= 0.0):
            raise ValueError("NURBS weights must be positive")
        self.kv_u = kv_u
        self.kv_v = kv_v
        self.control_net = control_net
        self.weights = weights
        for a in (self.control_net, self.weights):
            a.setflags(write=False)

    def grid_eval(self, u_pts, v_pts, deriv=1):
        """Map values (and first derivatives) on the tensor grid.

        Returns a dict with keys ``'x'`` (mu, mv, 2) and, for ``deriv >= 1``,
        ``'xu'``, ``'xv'`` (same shape), ``'jac'`` (mu, mv, 2, 2) and
        ``'det'`` (mu, mv).
        """
        Bu = [collocation_matrix(self.kv_u, u_pts, d) for d in range(deriv + 1)]
        Bv = [collocation_matrix(self.kv_v, v_pts, d) for d in range(deriv + 1)]
        w = self.weights
        Pw = self.control_net * w[:, :, None]

        def blend(du, dv, arr):
            if arr.ndim == 2:
                return Bu[du] @ arr @ Bv[dv].T
            return np.einsum("ia,abk,jb->ijk", Bu[du], arr, Bv[dv])

        W = blend(0, 0, w)
        S = blend(0, 0, Pw) / W[:, :, None]
        out = {"x": S}
        if deriv >= 1:
            Su = (blend(1, 0, Pw) - blend(1, 0, w)[:, :, None] * S) / W[:, :, None]
            Sv = (blend(0, 1, Pw) - blend(0, 1, w)[:, :, None] * S) / W[:, :, None]
            jac = np.stack([Su, Sv], axis=-1)   # [..., comp, direction]
            det = Su[..., 0] * Sv[..., 1] - Su[..., 1] * Sv[..., 0]
            out.update(xu=Su, xv=Sv, jac=jac, det=det)
        return out

    def eval(self, uv, deriv=1):
        g = self.grid_eval([uv[0]], [uv[1]], deriv)
        return {k: v[0, 0] for k, v in g.items()}

    def edge_curve(self, side):
        """Boundary edge as a curve in the edge's own parameter."""
        if side == "u0":
            return NurbsCurve(self.kv_v, self.control_net[0], self.weights[0])
        if side == "u1":
            return NurbsCurve(self.kv_v, self.control_net[-1], self.weights[-1])
        if side == "v0":
            return NurbsCurve(self.kv_u, self.control_net[:, 0], self.weights[:, 0])
        if side == "v1":
            return NurbsCurve(self.kv_u, self.control_net[:, -1], self.weights[:, -1])
        raise ValueError(f"unknown side {side!r}")

    def refined(self, u_knots=(), v_knots=()):
        """Patch with knots inserted; the mapped point set is unchanged."""
        hom = np.concatenate(
            [self.control_net * self.weights[:, :, None], self.weights[:, :, None]], axis=2
        )
        kv_u, kv_v = self.kv_u, self.kv_v
        u_knots = np.atleast_1d(np.asarray(u_knots, dtype=float))
        v_knots = np.atleast_1d(np.asarray(v_knots, dtype=float))
        if u_knots.size:
            rows = hom.reshape(kv_u.n, -1)
            kv_u, rows = _insert_knots_1d(kv_u, rows, u_knots)
            hom = rows.reshape(kv_u.n, kv_v.n, 3)
        if v_knots.size:
            rows = np.swapaxes(hom, 0, 1).reshape(kv_v.n, -1)
            kv_v, rows = _insert_knots_1d(kv_v, rows, v_knots)
            hom = np.swapaxes(rows.reshape(kv_v.n, kv_u.n, 3), 0, 1)
        w = hom[:, :, 2]
        return NurbsPatch(kv_u, kv_v, hom[:, :, :2] / w[:, :, None], w)

    def __repr__(self):
        return (
            f"NurbsPatch(p=({self.kv_u.degree},{self.kv_v.degree}), "
            f"n=({self.kv_u.n},{self.kv_v.n}))"
        )


def surface_map_eval(patch, uv):
    """Evaluate the geometry map of ``patch`` at reference point ``uv``.

    Returns a :class:`MapSample` with physical point, Jacobian and its
    determinant (positive for analysis-ready patches).
    """
    e = patch.eval(uv, deriv=1)
    return MapSample(point=e["x"], jacobian=e["jac"], det=float(e["det"]))


def ruled_patch(c0, c1):
    """Ruled surface between two curves sharing one knot vector.

    ``c0`` becomes the ``u0`` edge, ``c1`` the ``u1`` edge; the common curve
    parameter becomes ``v`` and straight segments connect corresponding
    parameters.  With ``c0``/``c1`` ordered inner/outer and both oriented
    counterclockwise the patch is positively oriented.
    """
    if c0.kv != c1.kv:
        raise GeometryError("ruled patch requires curves on identical knot vectors")
    kv_u = KnotVector.open_uniform(1, 1)
    net = np.stack([c0.control_points, c1.control_points], axis=0)
    wts = np.stack([c0.weights, c1.weights], axis=0)
    return NurbsPatch(kv_u, c0.kv, net, wts)


def bilinear_patch(p00, p10, p01, p11):
    """Bilinear quadrilateral patch from its four corners."""
    kv = KnotVector.open_uniform(1, 1)
    net = np.array([[p00, p01], [p10, p11]], dtype=float)
    return NurbsPatch(kv, kv, net, np.ones((2, 2)))


def annulus_patch(r_inner, r_outer, theta0, theta1, center=(0.0, 0.0)):
    """Exact annular sector: radial direction is u, arc direction is v."""
    if not 0.0 < r_inner < r_outer:
        raise GeometryError("need 0 < r_inner < r_outer")
    return ruled_patch(
        make_circular_arc(r_inner, theta0, theta1, center),
        make_circular_arc(r_outer, theta0, theta1, center),
    )


def h_refine(obj, u_knots=(), v_knots=()):
    """Insert knots into a curve or a patch without moving its point set.

    For curves only ``u_knots`` is used.  Refinement of discrete solution
    spaces is handled by :class:`KnotVector.refined` on the space's own knot
    vectors; geometry refinement never changes the mapped geometry (checked
    by the tests to 1e-12).
    """
    if isinstance(obj, NurbsCurve):
        return obj.refined(u_knots) if np.atleast_1d(u_knots).size else obj
    if isinstance(obj, NurbsPatch):
        return obj.refined(u_knots, v_knots)
    raise TypeError("h_refine expects a NurbsCurve or NurbsPatch")


def inverse_map(patch, point, guess=(0.5, 0.5), tol=1e-12, max_iter=50):
    """Invert the geometry map: find (xi, eta) with ``F(xi, eta) = point``.

    Damped Newton iteration (step halving on residual growth), iterates
    clamped to the reference square.  Raises :class:`InverseMapError` with
    the best residual when it does not converge; callers may retry with a
    different guess.
    """
    target = np.asarray(point, dtype=float)
    uv = np.clip(np.asarray(guess, dtype=float), 0.0, 1.0)
    e = patch.eval(uv, deriv=1)
    res = e["x"] - target
    rnorm = np.hypot(*res)
    for _ in range(max_iter):
        if rnorm < tol:
            return np.clip(uv, 0.0, 1.0)
        jac = e["jac"]
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if abs(det) < 1e-300:
            raise InverseMapError("singular Jacobian during inversion", residual=rnorm, uv=uv)
        step = np.array(
            [jac[1, 1] * res[0] - jac[0, 1] * res[1], -jac[1, 0] * res[0] + jac[0, 0] * res[1]]
        ) / det
        scale = 1.0
        for _ in range(30):
            trial = np.clip(uv - scale * step, 0.0, 1.0)
            et = patch.eval(trial, deriv=1)
            rt = et["x"] - target
            rtn = np.hypot(*rt)
            if rtn < rnorm or scale < 1e-6:
                uv, e, res, rnorm = trial, et, rt, rtn
                break
            scale *= 0.5
        else:  # pragma: no cover - loop always breaks via scale floor
            break
    if rnorm < tol:
        return np.clip(uv, 0.0, 1.0)
    raise InverseMapError(
        f"no convergence after {max_iter} iterations (residual {rnorm:.3e})",
        residual=rnorm,
        uv=uv,
    )
