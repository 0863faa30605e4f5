"""Multipatch domains, glued discrete spaces, and interface traces.

A :class:`MultiPatchDomain` holds the geometry patches, the automatically
detected inter-patch interfaces, and boundary tags.  A
:class:`DiscreteSpace` is an independent tensor B-spline solution space per
patch (the geometry map stays fixed) plus a global numbering that realizes
C0 gluing, homogeneous Dirichlet elimination, and anti-periodic
identification through a signed union-find.

Constraint application is functional: each ``apply_*`` returns a new space;
applying the same constraint twice yields the identical numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, NonConformingError
from .splines import KnotVector, NurbsCurve, SIDES

__all__ = [
    "Interface",
    "MultiPatchDomain",
    "PatchSpace",
    "DiscreteSpace",
    "TraceSpace",
    "glue_c0",
    "apply_dirichlet",
    "apply_antiperiodic",
    "trace_on_airgap",
    "uniform_spaces",
    "interpolate",
]

BOUNDARY_TAGS = ("dirichlet", "antiperiodic_left", "antiperiodic_right", "airgap", "interior")

_EDGE_SAMPLES = np.linspace(0.0, 1.0, 9)


@dataclass(frozen=True)
class Interface:
    """C0-glued side pair; ``reversed`` flags opposite edge parametrization."""

    patch_a: int
    side_a: str
    patch_b: int
    side_b: str
    reversed: bool = False


def _edge_points(patch, side, ts=_EDGE_SAMPLES):
    return patch.edge_curve(side).eval_many(ts)[:, 0, :]


class MultiPatchDomain:
    """Patches plus interface and boundary topology.

    Parameters
    ----------
    patches : list of NurbsPatch
    interfaces : list of Interface
    boundary_tags : dict
        Maps ``(patch_index, side)`` of non-glued sides to one of
        ``{'dirichlet', 'antiperiodic_left', 'antiperiodic_right', 'airgap',
        'interior'}``.
    regions : list of str, optional
        Material region name per patch (defaults to ``'default'``).
    """

    def __init__(self, patches, interfaces, boundary_tags, regions=None, tol=1e-10):
        self.patches = list(patches)
        self.interfaces = list(interfaces)
        self.boundary_tags = dict(boundary_tags)
        self.regions = list(regions) if regions is not None else ["default"] * len(self.patches)
        if len(self.regions) != len(self.patches):
            raise ValueError("one region tag per patch required")
        self._validate(tol)

    @classmethod
    def from_patches(cls, patches, tag_fn, regions=None, tol=1e-10):
        """Build a domain detecting glued sides geometrically.

        Sides whose sampled edge points coincide (directly or reversed,
        within ``tol``) are glued; every remaining side is tagged through
        ``tag_fn(patch_index, side, midpoint)``.
        """
        patches = list(patches)
        edges = []
        for p, patch in enumerate(patches):
            for side in SIDES:
                edges.append((p, side, _edge_points(patch, side)))
        used = set()
        interfaces = []
        for a in range(len(edges)):
            if a in used:
                continue
            pa, sa, pts_a = edges[a]
            for b in range(a + 1, len(edges)):
                if b in used:
                    continue
                pb, sb, pts_b = edges[b]
                if pb == pa:
                    continue
                if np.max(np.abs(pts_a - pts_b)) < tol:
                    interfaces.append(Interface(pa, sa, pb, sb, reversed=False))
                elif np.max(np.abs(pts_a - pts_b[::-1])) < tol:
                    interfaces.append(Interface(pa, sa, pb, sb, reversed=True))
                else:
                    continue
                used.update((a, b))
                break
        glued = {(i.patch_a, i.side_a) for i in interfaces} | {
            (i.patch_b, i.side_b) for i in interfaces
        }
        tags = {}
        for p, patch in enumerate(patches):
            for side in SIDES:
                if (p, side) in glued:
                    continue
                mid = patch.edge_curve(side).eval(0.5)[0]
                tag = tag_fn(p, side, mid)
                if tag not in BOUNDARY_TAGS:
                    raise ValueError(f"unknown boundary tag {tag!r} for patch {p} side {side}")
                tags[(p, side)] = tag
        return cls(patches, interfaces, tags, regions=regions, tol=tol)

    def _validate(self, tol):
        seen = {}
        for itf in self.interfaces:
            for key in ((itf.patch_a, itf.side_a), (itf.patch_b, itf.side_b)):
                if key in seen or key in self.boundary_tags:
                    raise ValueError(f"patch side {key} used more than once")
                seen[key] = itf
            pts_a = _edge_points(self.patches[itf.patch_a], itf.side_a)
            pts_b = _edge_points(self.patches[itf.patch_b], itf.side_b)
            if itf.reversed:
                pts_b = pts_b[::-1]
            if np.max(np.abs(pts_a - pts_b)) > tol:
                raise GeometryError(
                    f"glued sides {itf.patch_a}/{itf.side_a} and "
                    f"{itf.patch_b}/{itf.side_b} do not coincide geometrically"
                )
        for (p, side), tag in self.boundary_tags.items():
            if tag not in BOUNDARY_TAGS:
                raise ValueError(f"unknown boundary tag {tag!r}")
            if p >= len(self.patches) or side not in SIDES:
                raise ValueError(f"invalid boundary side ({p}, {side})")

    def sides_tagged(self, tag):
        return sorted((p, s) for (p, s), t in self.boundary_tags.items() if t == tag)

    def patch_indices_of_region(self, region):
        return [p for p, r in enumerate(self.regions) if r == region]

    def __repr__(self):
        return (
            f"MultiPatchDomain({len(self.patches)} patches, "
            f"{len(self.interfaces)} interfaces)"
        )


@dataclass(frozen=True)
class PatchSpace:
    """Tensor-product B-spline solution space on one patch."""

    kv_u: KnotVector
    kv_v: KnotVector

    @property
    def shape(self):
        return (self.kv_u.n, self.kv_v.n)

    def edge_kv(self, side):
        return self.kv_v if side in ("u0", "u1") else self.kv_u

    def edge_dofs(self, side):
        """Local (i, j) multi-indices along a side, in edge-parameter order."""
        n_u, n_v = self.shape
        if side == "u0":
            return [(0, j) for j in range(n_v)]
        if side == "u1":
            return [(n_u - 1, j) for j in range(n_v)]
        if side == "v0":
            return [(i, 0) for i in range(n_u)]
        if side == "v1":
            return [(i, n_v - 1) for i in range(n_u)]
        raise ValueError(f"unknown side {side!r}")


def uniform_spaces(domain, degree, refinements=0):
    """Per-patch solution spaces of ``degree`` with dyadic refinement.

    The base knot vectors reuse each patch's geometry breakpoints so that
    quadrature elements never straddle a geometric knot line.
    """
    spaces = []
    for patch in domain.patches:
        kvs = []
        for kv_geo in (patch.kv_u, patch.kv_v):
            kv = KnotVector.open_uniform(degree, 1, breaks=kv_geo.breakpoints)
            kvs.append(kv.uniform_refined(refinements))
        spaces.append(PatchSpace(*kvs))
    return spaces


class _Numbering:
    """Signed union-find with elimination, built once per constraint set.

    ``sign[i]`` relates a DoF to its parent: value(i) = sign(i) * value(parent(i)).
    """

    def __init__(self, n):
        self.parent = np.arange(n)
        self.sign = np.ones(n, dtype=np.int8)
        self.dead = np.zeros(n, dtype=bool)

    def find(self, i):
        path = []
        root = int(i)
        while self.parent[root] != root:
            path.append(root)
            root = int(self.parent[root])
        for node in reversed(path):  # nearest to root first
            p = int(self.parent[node])
            if p != root:
                self.sign[node] = self.sign[node] * self.sign[p]
                self.parent[node] = root
        s = int(self.sign[i]) if i != root else 1
        return root, s

    def union(self, i, j, rel_sign):
        """Enforce value(i) = rel_sign * value(j)."""
        ri, si = self.find(i)
        rj, sj = self.find(j)
        if ri == rj:
            if si != rel_sign * sj:
                self.dead[ri] = True  # forces value = -value, i.e. zero
            return
        self.parent[rj] = ri
        self.sign[rj] = si * rel_sign * sj
        if self.dead[rj]:
            self.dead[ri] = True

    def eliminate(self, i):
        root, _ = self.find(i)
        self.dead[root] = True


class DiscreteSpace:
    """Global scalar solution space over a multipatch domain.

    Holds the per-patch spaces, the constraint list, and the resulting
    local-to-global map with signs.  ``gdof[p][i, j]`` is the global index
    of local DoF (i, j) of patch ``p`` (-1 when eliminated) and
    ``sign[p][i, j]`` the +-1 factor relating local and global coefficients.
    """

    def __init__(self, domain, patch_spaces, constraints=()):
        if len(patch_spaces) != len(domain.patches):
            raise ValueError("one PatchSpace per patch required")
        self.domain = domain
        self.patch_spaces = list(patch_spaces)
        self.constraints = tuple(constraints)
        self._number()

    # -- constraint machinery -------------------------------------------------

    def _offsets(self):
        sizes = [ps.shape[0] * ps.shape[1] for ps in self.patch_spaces]
        return np.concatenate([[0], np.cumsum(sizes)]), int(np.sum(sizes))

    def _flat(self, patch, ij):
        n_v = self.patch_spaces[patch].shape[1]
        return self._off[patch] + ij[0] * n_v + ij[1]

    def _number(self):
        off, total = self._offsets()
        self._off = off
        uf = _Numbering(total)
        for kind, payload in self.constraints:
            if kind == "glue":
                itf = payload
                self._glue_interface(uf, itf)
            elif kind == "dirichlet":
                patch, side = payload
                for ij in self.patch_spaces[patch].edge_dofs(side):
                    uf.eliminate(self._flat(patch, ij))
            elif kind == "antiperiodic":
                (pl, sl), (pr, sr), rev = payload
                left = self.patch_spaces[pl].edge_dofs(sl)
                right = self.patch_spaces[pr].edge_dofs(sr)
                if rev:
                    right = right[::-1]
                if len(left) != len(right):
                    raise NonConformingError(
                        f"anti-periodic sides {pl}/{sl} and {pr}/{sr} differ in DoF count"
                    )
                for ij_l, ij_r in zip(left, right):
                    uf.union(self._flat(pl, ij_l), self._flat(pr, ij_r), -1)
            else:  # pragma: no cover
                raise ValueError(f"unknown constraint kind {kind!r}")
        roots = {}
        self.gdof = []
        self.sign = []
        n_free = 0
        for p, ps in enumerate(self.patch_spaces):
            n_u, n_v = ps.shape
            g = np.empty((n_u, n_v), dtype=np.int64)
            s = np.empty((n_u, n_v), dtype=np.int8)
            for i in range(n_u):
                for j in range(n_v):
                    root, sgn = uf.find(self._flat(p, (i, j)))
                    if uf.dead[root]:
                        g[i, j] = -1
                        s[i, j] = 1
                        continue
                    if root not in roots:
                        roots[root] = n_free
                        n_free += 1
                    g[i, j] = roots[root]
                    s[i, j] = sgn
            self.gdof.append(g)
            self.sign.append(s)
        self.n_dofs = n_free

    def _glue_interface(self, uf, itf):
        ps_a = self.patch_spaces[itf.patch_a]
        ps_b = self.patch_spaces[itf.patch_b]
        kv_a = ps_a.edge_kv(itf.side_a)
        kv_b = ps_b.edge_kv(itf.side_b)
        kv_b_cmp = kv_b if not itf.reversed else KnotVector(kv_b.degree, 1.0 - kv_b.knots[::-1])
        if kv_a != kv_b_cmp:
            raise NonConformingError(
                f"glued interface between patch {itf.patch_a} ({itf.side_a}) and "
                f"patch {itf.patch_b} ({itf.side_b}) has non-matching trace spaces"
            )
        dofs_a = ps_a.edge_dofs(itf.side_a)
        dofs_b = ps_b.edge_dofs(itf.side_b)
        if itf.reversed:
            dofs_b = dofs_b[::-1]
        for ij_a, ij_b in zip(dofs_a, dofs_b):
            uf.union(self._flat(itf.patch_a, ij_a), self._flat(itf.patch_b, ij_b), +1)

    # -- public API ------------------------------------------------------------

    def with_constraints(self, extra):
        merged = list(self.constraints)
        for c in extra:
            if c not in merged:
                merged.append(c)
        return DiscreteSpace(self.domain, self.patch_spaces, merged)

    def local_coeffs(self, patch, u):
        """Per-patch coefficient grid from a global vector (zeros where eliminated)."""
        g = self.gdof[patch]
        c = np.where(g >= 0, u[np.clip(g, 0, None)], 0.0)
        return c * self.sign[patch]

    def constraint_report(self):
        counts = {}
        for kind, _ in self.constraints:
            counts[kind] = counts.get(kind, 0) + 1
        lines = [f"global DoFs: {self.n_dofs}"]
        for kind in sorted(counts):
            lines.append(f"{kind}: {counts[kind]}")
        eliminated = sum(int(np.sum(g < 0)) for g in self.gdof)
        lines.append(f"eliminated local DoFs: {eliminated}")
        return "\n".join(lines)

    def __repr__(self):
        return f"DiscreteSpace({len(self.patch_spaces)} patches, N={self.n_dofs})"


def glue_c0(domain, patch_spaces):
    """Glue per-patch spaces across all domain interfaces (C0)."""
    constraints = [("glue", itf) for itf in domain.interfaces]
    return DiscreteSpace(domain, patch_spaces, constraints)


def apply_dirichlet(space, domain=None):
    """Eliminate DoFs supported on sides tagged ``'dirichlet'``."""
    domain = domain or space.domain
    extra = [("dirichlet", ps) for ps in domain.sides_tagged("dirichlet")]
    return space.with_constraints(extra)


def apply_antiperiodic(space, rotation, tol=1e-10):
    """Identify ``antiperiodic_left`` and ``antiperiodic_right`` trace DoFs.

    ``rotation`` is the angle (radians, about the origin) that maps the left
    sides onto the right sides; each matched DoF pair is tied with sign -1.
    The pairing is established geometrically, so patch ordering is free.
    """
    domain = space.domain
    left = domain.sides_tagged("antiperiodic_left")
    right = domain.sides_tagged("antiperiodic_right")
    if len(left) != len(right):
        raise NonConformingError("anti-periodic side counts differ")
    c, s = np.cos(rotation), np.sin(rotation)
    rot = np.array([[c, -s], [s, c]])
    right_pts = {ps: _edge_points(domain.patches[ps[0]], ps[1]) for ps in right}
    extra = []
    for pl, sl in left:
        pts_l = _edge_points(domain.patches[pl], sl) @ rot.T
        match = None
        for (pr, sr), pts_r in right_pts.items():
            if np.max(np.abs(pts_l - pts_r)) < tol:
                match, rev = (pr, sr), False
                break
            if np.max(np.abs(pts_l - pts_r[::-1])) < tol:
                match, rev = (pr, sr), True
                break
        if match is None:
            raise GeometryError(
                f"no anti-periodic partner found for patch {pl} side {sl} "
                f"under rotation {rotation!r}"
            )
        kv_l = space.patch_spaces[pl].edge_kv(sl)
        kv_r = space.patch_spaces[match[0]].edge_kv(match[1])
        kv_r_cmp = kv_r if not rev else KnotVector(kv_r.degree, 1.0 - kv_r.knots[::-1])
        if kv_l != kv_r_cmp:
            raise NonConformingError(
                f"anti-periodic traces {pl}/{sl} vs {match[0]}/{match[1]} not conforming"
            )
        extra.append(("antiperiodic", ((pl, sl), match, rev)))
        del right_pts[match]
    return space.with_constraints(extra)


# -- traces on the air-gap circle ---------------------------------------------


class TraceEdge:
    """One patch edge lying on the coupling circle."""

    def __init__(self, patch, side, curve, kv, gdofs, signs, center):
        self.patch = patch
        self.side = side
        self.curve = curve
        self.kv = kv
        self.gdofs = gdofs
        self.signs = signs
        self.center = np.asarray(center, dtype=float)
        pts = curve.eval_many(np.linspace(0.0, 1.0, 33))[:, 0, :] - self.center
        radii = np.hypot(pts[:, 0], pts[:, 1])
        self.radius = float(radii.mean())
        ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
        if not (np.all(np.diff(ang) > 0) or np.all(np.diff(ang) < 0)):
            raise GeometryError(f"edge angle not monotone on patch {patch} side {side}")
        self.increasing = bool(ang[-1] > ang[0])
        self.theta_start = float(ang[0])
        self.theta_end = float(ang[-1])
        self.theta_min = min(self.theta_start, self.theta_end)
        self.theta_max = max(self.theta_start, self.theta_end)

    def angle_of(self, t):
        """Angle theta(t) and derivative dtheta/dt at edge parameters ``t``."""
        vals = self.curve.eval_many(np.atleast_1d(t), 1)
        xy = vals[:, 0, :] - self.center
        dxy = vals[:, 1, :]
        r2 = xy[:, 0] ** 2 + xy[:, 1] ** 2
        theta = np.arctan2(xy[:, 1], xy[:, 0])
        # unwrap against the edge's own angular window
        theta = np.where(theta < self.theta_min - 1e-9, theta + 2 * np.pi, theta)
        theta = np.where(theta > self.theta_max + 1e-9, theta - 2 * np.pi, theta)
        dtheta = (xy[:, 0] * dxy[:, 1] - xy[:, 1] * dxy[:, 0]) / r2
        return theta, dtheta

    def param_of_angle(self, theta, tol=1e-13, max_iter=60):
        """Edge parameter with angle ``theta`` (1D Newton with bisection guard)."""
        lo, hi = 0.0, 1.0
        f_lo = self.theta_start - theta
        t = np.clip((theta - self.theta_start) / (self.theta_end - self.theta_start), 0.0, 1.0)
        for _ in range(max_iter):
            th, dth = self.angle_of(t)
            f = th[0] - theta
            if abs(f) < tol:
                return float(t)
            if (f > 0) == (f_lo > 0):
                lo = t
            else:
                hi = t
            step = f / dth[0]
            t_new = t - step
            if not (lo < t_new < hi):
                t_new = 0.5 * (lo + hi)
            t = t_new
        return float(t)


class TraceSpace:
    """1D restriction of a discrete space to the air-gap circle.

    Edges are ordered by increasing angle; each trace basis function is
    recorded by ``(edge, local index) -> (global DoF, sign)``.
    """

    def __init__(self, edges, n_dofs):
        if not edges:
            raise GeometryError("no air-gap edges found")
        radius = edges[0].radius
        for e in edges:
            if abs(e.radius - radius) > 1e-9 * max(1.0, radius):
                raise GeometryError("air-gap edges lie at inconsistent radii")
        self.edges = sorted(edges, key=lambda e: e.theta_min)
        self.n_dofs = int(n_dofs)
        self.radius = radius
        self.theta_min = self.edges[0].theta_min
        self.theta_max = self.edges[-1].theta_max
        gd = np.concatenate([e.gdofs for e in self.edges])
        self.dof_indices = np.unique(gd[gd >= 0])

    @property
    def arc_extent(self):
        return self.theta_max - self.theta_min

    def edge_at(self, theta):
        for e in self.edges:
            if e.theta_min - 1e-12 <= theta <= e.theta_max + 1e-12:
                return e
        raise ValueError(f"angle {theta} outside the trace arc")

    def eval(self, thetas, u):
        """Trace field values at angles ``thetas`` for global coefficients ``u``."""
        from .splines import bspline_eval

        out = np.empty(len(thetas))
        for k, theta in enumerate(np.asarray(thetas, dtype=float)):
            e = self.edge_at(theta)
            t = e.param_of_angle(theta)
            first, ders = bspline_eval(e.kv, t, 0)
            acc = 0.0
            for a in range(e.kv.degree + 1):
                g = e.gdofs[first + a]
                if g >= 0:
                    acc += ders[0, a] * e.signs[first + a] * u[g]
            out[k] = acc
        return out

    def breakpoint_angles(self):
        """Angles of all trace-element boundaries, sorted ascending."""
        angles = []
        for e in self.edges:
            for b in e.kv.breakpoints:
                t = b if e.increasing else 1.0 - b
                th, _ = e.angle_of(t)
                angles.append(th[0])
        return np.unique(np.round(np.sort(np.asarray(angles)), 12))


def trace_on_airgap(space, domain=None, center=(0.0, 0.0)):
    """Collect the air-gap trace of ``space`` as a :class:`TraceSpace`."""
    domain = domain or space.domain
    sides = domain.sides_tagged("airgap")
    if not sides:
        raise GeometryError("domain has no sides tagged 'airgap'")
    edges = []
    for p, side in sides:
        ps = space.patch_spaces[p]
        kv = ps.edge_kv(side)
        ij = ps.edge_dofs(side)
        gd = np.array([space.gdof[p][i, j] for i, j in ij], dtype=np.int64)
        sg = np.array([space.sign[p][i, j] for i, j in ij], dtype=np.int8)
        solution_curve = _edge_solution_curve(domain.patches[p], side)
        edges.append(TraceEdge(p, side, solution_curve, kv, gd, sg, center))
    return TraceSpace(edges, space.n_dofs)


def _edge_solution_curve(patch, side):
    """Geometry curve of a patch edge (edge-parameter orientation)."""
    return patch.edge_curve(side)


def interpolate(space, fn):
    """Greville interpolation of ``fn(x, y)`` onto the global space.

    Intended for unconstrained or conforming spaces used in tests and for
    Dirichlet lifts; coefficient values assigned through different patches
    must agree (the tensor interpolant restricts consistently to edges).
    Returns a dense vector over the global DoFs; eliminated DoFs are dropped.
    """
    from scipy.linalg import solve as dense_solve

    from .splines import collocation_matrix

    u = np.zeros(space.n_dofs)
    filled = np.zeros(space.n_dofs, dtype=bool)
    for p, ps in enumerate(space.patch_spaces):
        gu = ps.kv_u.greville()
        gv = ps.kv_v.greville()
        G = space.domain.patches[p].grid_eval(gu, gv, deriv=0)["x"]
        vals = fn(G[..., 0], G[..., 1])
        Au = collocation_matrix(ps.kv_u, gu)
        Av = collocation_matrix(ps.kv_v, gv)
        C = dense_solve(Au, np.asarray(vals))
        C = dense_solve(Av, C.T).T
        g = space.gdof[p]
        s = space.sign[p]
        for i in range(ps.shape[0]):
            for j in range(ps.shape[1]):
                if g[i, j] >= 0:
                    u[g[i, j]] = s[i, j] * C[i, j]
                    filled[g[i, j]] = True
    if not filled.all():  # pragma: no cover - all free DoFs have support somewhere
        raise RuntimeError("interpolation left unset DoFs")
    return u
