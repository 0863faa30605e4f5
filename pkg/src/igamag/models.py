"""Benchmark problem builders: quarter-ring verification case and PMSM pole.

The verification case is a quarter ring (radii 1 m and 2 m) split along an
interior circle into two deliberately non-conforming multipatch annuli, with
a polynomial manufactured solution whose interface flux contains only
harmonic orders +-1 and +-3.

The machine builder produces one 60-degree pole of a 6-pole permanent
magnet synchronous machine from its geometric/material parameter set: a
12-patch rotor with one buried rectangular magnet and a stator with six
trapezoidal slots (two winding layers each), both bounded by exact circular
arcs at the air-gap coupling radius.  All lengths are SI (meters, radians)
internally; the config loader accepts mm/degree keys.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .assembly import MU0, Material, MaterialMap
from .errors import GeometryError
from .multipatch import MultiPatchDomain
from .splines import (
    annulus_patch,
    make_circular_arc,
    make_line_quadratic,
    ruled_patch,
)

__all__ = [
    "VerificationModel",
    "MachineModel",
    "build_quarter_ring",
    "manufactured_rhs",
    "manufactured_solution",
    "manufactured_gradient",
    "default_machine",
    "load_machine_config",
    "build_pmsm_pole",
    "magnet_excitation",
    "winding_excitation",
    "machine_materials",
    "WINDING_LAYOUT",
]


# --------------------------------------------------------------------------
# manufactured verification problem
# --------------------------------------------------------------------------


def manufactured_rhs(x, y):
    """Source term of the verification problem (polynomial, exact)."""
    return 2.0 * x * (22.0 * x**2 * y**2 + 21.0 * y**4 - 45.0 * y**2 + x**4 - 5.0 * x**2 + 4.0)


def manufactured_solution(x, y):
    """Closed-form solution: vanishes on r=1, r=2, x=0 and y=0."""
    r2 = x**2 + y**2
    return -x * y**2 * (r2 - 1.0) * (r2 - 4.0)


def manufactured_gradient(x, y):
    """Cartesian gradient of :func:`manufactured_solution`."""
    r2 = x**2 + y**2
    q = (r2 - 1.0) * (r2 - 4.0)
    dq = 2.0 * r2 - 5.0  # d/d(r2) of q
    ux = -y**2 * q - x * y**2 * dq * 2.0 * x
    uy = -2.0 * x * y * q - x * y**2 * dq * 2.0 * y
    return ux, uy


@dataclass(frozen=True)
class VerificationModel:
    """Quarter-ring domain pair with manufactured source and solution."""

    inner_domain: MultiPatchDomain
    outer_domain: MultiPatchDomain
    r_split: float
    r_inner: float = 1.0
    r_outer: float = 2.0

    @property
    def source(self):
        return manufactured_rhs

    @property
    def exact(self):
        return manufactured_solution

    @property
    def exact_gradient(self):
        return manufactured_gradient

    def exact_interface_flux(self, theta):
        """Exact multiplier function on the split circle (angle measure).

        The coupling integrals use the pure angle measure, so the
        multipliers represent ``r * grad(u) . n_st`` with the normal
        pointing from the outer toward the inner domain (``-du/dr``); the
        constant radius factor is part of that normalization.
        """
        r = self.r_split
        x, y = r * np.cos(theta), r * np.sin(theta)
        ux, uy = manufactured_gradient(x, y)
        return -r * (ux * np.cos(theta) + uy * np.sin(theta))


def _ring_tagger(r_in, r_out, r_gap):
    def tag(p, side, mid):
        r = np.hypot(mid[0], mid[1])
        if abs(r - r_gap) < 1e-12 * max(1.0, r_gap):
            return "airgap"
        return "dirichlet"

    return tag


def build_quarter_ring(r_split=1.5):
    """Verification geometry: non-conforming split of the quarter ring.

    The inner annulus is built from two 45-degree patches, the outer from
    three 30-degree patches, so interface knot lines of the two sides meet
    only at the arc ends.  The whole outer boundary of the union carries
    homogeneous Dirichlet conditions; the split circle is tagged ``airgap``.
    """
    if not 1.0 < r_split < 2.0:
        raise GeometryError("split radius must lie strictly between 1 and 2")
    q = np.pi / 2
    inner = [
        annulus_patch(1.0, r_split, 0.0, q / 2),
        annulus_patch(1.0, r_split, q / 2, q),
    ]
    outer = [
        annulus_patch(r_split, 2.0, 0.0, q / 3),
        annulus_patch(r_split, 2.0, q / 3, 2 * q / 3),
        annulus_patch(r_split, 2.0, 2 * q / 3, q),
    ]
    tag = _ring_tagger(1.0, 2.0, r_split)
    dom_in = MultiPatchDomain.from_patches(inner, tag)
    dom_out = MultiPatchDomain.from_patches(outer, tag)
    return VerificationModel(inner_domain=dom_in, outer_domain=dom_out, r_split=r_split)


# --------------------------------------------------------------------------
# machine parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MachineModel:
    """All machine parameters in SI units (meters, radians, Tesla, S/m).

    Slot dimensioning: the slots are semi-closed with an opening of arc
    width ``l1`` at the bore; the tooth-tip zone flares to the slot-body
    width ``delta5``, the two winding layers have heights ``l2`` (inner,
    widening to ``delta4``) and ``l3`` (outer, reaching ``delta3``), and
    ``l4`` is the yoke thickness.  (The drawing's exact l/delta pairing is
    not fully recoverable; this reading gives a physically plausible yoke,
    nearly straight slot walls, and the weak slotting the reported EMF
    spectra imply.)  ``delta1``/``delta2`` describe the magnet pocket in
    the original drawing; the simplified one-magnet rotor is fully
    determined by the magnet width/height/depth and they are carried only
    as data.
    """

    # rotor
    r_rotor_inner: float = 16e-3
    r_rotor_outer: float = 44e-3
    magnet_width: float = 19e-3      # d1
    magnet_height: float = 7e-3      # d2
    magnet_depth: float = 7e-3       # d3, outer rotor surface to magnet top
    delta1: float = np.deg2rad(8.5)
    delta2: float = np.deg2rad(42.0)
    # stator
    r_stator_inner: float = 45e-3
    r_stator_outer: float = 67.5e-3
    n_turns: int = 12                # per half slot
    delta3: float = np.deg2rad(7.0)
    delta4: float = np.deg2rad(5.7)
    delta5: float = np.deg2rad(4.0)
    l1: float = 0.6e-3
    l2: float = 5.4e-3
    l3: float = 5.0e-3
    l4: float = 8.2e-3
    skew_angle: float = np.deg2rad(0.52)   # not representable in 2D; ignored
    # air gap
    r_airgap: float = 44.7e-3
    # machine
    axial_length: float = 0.1
    pole_count: int = 6
    # materials
    sigma_fe: float = 0.0
    sigma_cu: float = 4.3e7
    sigma_pm: float = 6667.0
    mu_r_fe: float = 500.0
    mu_r_cu: float = 1.0
    mu_r_pm: float = 1.5
    remanence: float = 0.94

    def __post_init__(self):
        if not self.r_rotor_outer < self.r_airgap < self.r_stator_inner:
            raise ValueError("air-gap radius must lie between rotor and stator surfaces")
        for name in ("r_rotor_inner", "magnet_width", "magnet_height", "magnet_depth",
                     "axial_length", "l1", "l2", "l3", "l4"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.skew_angle != 0.0:
            warnings.warn("skew angle is ignored by the 2D model", stacklevel=2)

    @property
    def pole_pitch(self):
        return 2.0 * np.pi / self.pole_count

    @property
    def slots_per_pole(self):
        return 6

    @property
    def h_source_magnitude(self):
        """|H_pm| = B_r / (mu0 mu_r,PM)."""
        return self.remanence / (MU0 * self.mu_r_pm)


def default_machine():
    """Machine of the application study (6-pole interior-magnet PMSM)."""
    return MachineModel()


_MM_KEYS = {
    ("rotor", "inner_radius_mm"): "r_rotor_inner",
    ("rotor", "outer_radius_mm"): "r_rotor_outer",
    ("rotor", "magnet_width_mm"): "magnet_width",
    ("rotor", "magnet_height_mm"): "magnet_height",
    ("rotor", "magnet_depth_mm"): "magnet_depth",
    ("stator", "inner_radius_mm"): "r_stator_inner",
    ("stator", "outer_radius_mm"): "r_stator_outer",
    ("stator", "l1_mm"): "l1",
    ("stator", "l2_mm"): "l2",
    ("stator", "l3_mm"): "l3",
    ("stator", "l4_mm"): "l4",
    ("airgap", "radius_mm"): "r_airgap",
    ("machine", "axial_length_mm"): "axial_length",
}
_DEG_KEYS = {
    ("rotor", "delta1_deg"): "delta1",
    ("rotor", "delta2_deg"): "delta2",
    ("stator", "delta3_deg"): "delta3",
    ("stator", "delta4_deg"): "delta4",
    ("stator", "delta5_deg"): "delta5",
    ("stator", "skew_deg"): "skew_angle",
}
_PLAIN_KEYS = {
    ("stator", "turns_per_half_slot"): "n_turns",
    ("machine", "pole_count"): "pole_count",
    ("materials", "sigma_fe_S_per_m"): "sigma_fe",
    ("materials", "sigma_cu_S_per_m"): "sigma_cu",
    ("materials", "sigma_pm_S_per_m"): "sigma_pm",
    ("materials", "mu_r_fe"): "mu_r_fe",
    ("materials", "mu_r_cu"): "mu_r_cu",
    ("materials", "mu_r_pm"): "mu_r_pm",
    ("materials", "remanence_T"): "remanence",
}


def load_machine_config(path):
    """Machine parameters from a TOML file (mm/degree keys, see data/pmsm6.toml).

    Missing keys keep the default machine's values; unknown keys raise.
    """
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib

    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    updates = {}
    for section, table in raw.items():
        if not isinstance(table, dict):
            raise ValueError(f"top-level key {section!r} must be a section")
        for key, value in table.items():
            if (section, key) in _MM_KEYS:
                updates[_MM_KEYS[(section, key)]] = float(value) * 1e-3
            elif (section, key) in _DEG_KEYS:
                updates[_DEG_KEYS[(section, key)]] = float(np.deg2rad(value))
            elif (section, key) in _PLAIN_KEYS:
                field = _PLAIN_KEYS[(section, key)]
                updates[field] = int(value) if field in ("n_turns", "pole_count") else float(value)
            else:
                raise ValueError(f"unknown machine config key [{section}] {key}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return replace(default_machine(), **updates)


# --------------------------------------------------------------------------
# machine geometry
# --------------------------------------------------------------------------


def _polar(r, theta):
    return np.array([r * np.cos(theta), r * np.sin(theta)])


def _check_patches(patches, names, scale):
    """Reject patch sets with non-positive Jacobians (named error)."""
    from numpy.polynomial.legendre import leggauss

    x, _ = leggauss(6)
    x = 0.5 * (x + 1.0)
    for patch, name in zip(patches, names):
        det = patch.grid_eval(x, x)["det"]
        if np.any(det <= 1e-10 * scale**2):
            raise GeometryError(f"patch {name!r} is degenerate or inverted")


def _rotor_patches(m):
    """One rotor pole: 12 patches around a buried rectangular magnet."""
    tau = m.pole_pitch
    mid = 0.5 * tau
    e = np.array([np.cos(mid), np.sin(mid)])
    t = np.array([-np.sin(mid), np.cos(mid)])
    r_top = m.r_rotor_outer - m.magnet_depth
    r_bot = r_top - m.magnet_height
    if r_bot <= m.r_rotor_inner:
        raise GeometryError("magnet reaches below the rotor bore")
    half_w = 0.5 * m.magnet_width
    bl = r_bot * e - half_w * t
    br = r_bot * e + half_w * t
    tl = r_top * e - half_w * t
    tr = r_top * e + half_w * t
    q1 = float(np.hypot(*bl))            # radius of bottom corners
    q2 = float(np.hypot(*tl))            # radius of top corners
    a_bl = mid - np.arctan2(half_w, r_bot)
    a_tl = mid - np.arctan2(half_w, r_top)
    if a_bl <= 0.0 or a_tl <= 0.0:
        raise GeometryError("magnet too wide for one pole pitch")
    q0, q3, q4 = m.r_rotor_inner, m.r_rotor_outer, m.r_airgap
    arc = make_circular_arc
    chord = make_line_quadratic
    patches = [
        # inner iron band
        annulus_patch(q0, q1, 0.0, a_bl),
        ruled_patch(arc(q0, a_bl, tau - a_bl), chord(bl, br)),
        annulus_patch(q0, q1, tau - a_bl, tau),
        # magnet band
        ruled_patch(arc(q1, 0.0, a_bl), arc(q2, 0.0, a_tl)),
        ruled_patch(chord(bl, br), chord(tl, tr)),
        ruled_patch(arc(q1, tau - a_bl, tau), arc(q2, tau - a_tl, tau)),
        # outer iron band
        annulus_patch(q2, q3, 0.0, a_tl),
        ruled_patch(chord(tl, tr), arc(q3, a_tl, tau - a_tl)),
        annulus_patch(q2, q3, tau - a_tl, tau),
        # rotor-side air ring up to the coupling circle
        annulus_patch(q3, q4, 0.0, a_tl),
        annulus_patch(q3, q4, a_tl, tau - a_tl),
        annulus_patch(q3, q4, tau - a_tl, tau),
    ]
    names = [
        "rotor_iron_in_left", "rotor_iron_in_mid", "rotor_iron_in_right",
        "rotor_iron_mid_left", "rotor_magnet", "rotor_iron_mid_right",
        "rotor_iron_out_left", "rotor_iron_out_mid", "rotor_iron_out_right",
        "rotor_air_left", "rotor_air_mid", "rotor_air_right",
    ]
    regions = [
        "rotor_iron", "rotor_iron", "rotor_iron",
        "rotor_iron", "magnet", "rotor_iron",
        "rotor_iron", "rotor_iron", "rotor_iron",
        "air_rt", "air_rt", "air_rt",
    ]
    _check_patches(patches, names, m.r_rotor_outer)
    return patches, regions


def _rotor_tagger(m):
    tau = m.pole_pitch
    tol = 1e-9 * m.r_rotor_outer

    def tag(p, side, mid):
        r = np.hypot(mid[0], mid[1])
        ang = np.arctan2(mid[1], mid[0])
        if abs(r - m.r_airgap) < tol:
            return "airgap"
        if abs(r - m.r_rotor_inner) < tol:
            return "dirichlet"
        if abs(ang) < 1e-9:
            return "antiperiodic_left"
        if abs(ang - tau) < 1e-9:
            return "antiperiodic_right"
        raise GeometryError(f"untagged rotor boundary at r={r:.6g}, ang={ang:.6g}")

    return tag


def _stator_band_patches(m, r_bot, r_top, hw_bot, hw_top):
    """One radial stator band: (left tooth, slot, right tooth) per slot column."""
    tau = m.pole_pitch
    pitch = tau / m.slots_per_pole
    arc = make_circular_arc
    patches, kinds = [], []
    for k in range(m.slots_per_pole):
        a = k * pitch
        b = a + pitch
        c = a + 0.5 * pitch
        patches.append(ruled_patch(arc(r_bot, a, c - hw_bot), arc(r_top, a, c - hw_top)))
        patches.append(
            ruled_patch(arc(r_bot, c - hw_bot, c + hw_bot), arc(r_top, c - hw_top, c + hw_top))
        )
        patches.append(ruled_patch(arc(r_bot, c + hw_bot, b), arc(r_top, c + hw_top, b)))
        kinds.extend([("tooth", k), ("slot", k), ("tooth", k)])
    return patches, kinds


def _stator_patches(m):
    """One stator pole: five radial bands times six slot columns.

    Radial build-up from the bore: a semi-closed slot opening of arc width
    ``l1`` flaring through the tooth-tip zone to the slot-body width
    ``delta5``, then the two winding layers of heights ``l2`` (inner,
    reaching ``delta4``) and ``l3`` (outer, reaching ``delta3``), and a
    yoke of thickness ``l4`` up to the outer radius.  The three body
    widths lie on a nearly straight wall line, so the slot sides are
    straight chords.
    """
    s0, s1 = m.r_airgap, m.r_stator_inner
    s6 = m.r_stator_outer
    s5 = s6 - m.l4            # yoke inner radius
    s4 = s5 - m.l3            # outer winding layer bottom
    s3 = s4 - m.l2            # inner winding layer bottom / tip-zone top
    if not s0 < s1 < s3 < s4 < s5 < s6:
        raise GeometryError("stator radial build-up exceeds the outer radius")
    h_open = 0.5 * m.l1 / s1  # half angular width of the slot opening
    h5, h4, h3 = 0.5 * m.delta5, 0.5 * m.delta4, 0.5 * m.delta3
    pitch = m.pole_pitch / m.slots_per_pole
    if 2 * h3 >= pitch:
        raise GeometryError("slot top width must stay below the slot pitch")
    if h_open >= h5:
        raise GeometryError("slot opening must stay below the slot-body width")
    bands = [
        ("air", s0, s1, h_open, h_open, "air"),
        ("tip", s1, s3, h_open, h5, "air"),
        ("lay_in", s3, s4, h5, h4, "winding_in"),
        ("lay_out", s4, s5, h4, h3, "winding_out"),
        ("yoke", s5, s6, h3, h3, "iron"),
    ]
    patches, regions, names = [], [], []
    for band, r_bot, r_top, hw_bot, hw_top, slot_kind in bands:
        band_patches, kinds = _stator_band_patches(m, r_bot, r_top, hw_bot, hw_top)
        for patch, (kind, k) in zip(band_patches, kinds):
            patches.append(patch)
            names.append(f"stator_{band}_{kind}{k}")
            if band == "air":
                regions.append("air_st")
            elif kind == "tooth" or slot_kind == "iron":
                regions.append("stator_iron")
            elif slot_kind == "air":
                regions.append("air_st")
            elif slot_kind == "winding_in":
                regions.append(f"slot{k}_in")
            else:
                regions.append(f"slot{k}_out")
    _check_patches(patches, names, m.r_stator_outer)
    return patches, regions


def _stator_tagger(m):
    tau = m.pole_pitch
    tol = 1e-9 * m.r_stator_outer

    def tag(p, side, mid):
        r = np.hypot(mid[0], mid[1])
        ang = np.arctan2(mid[1], mid[0])
        if abs(r - m.r_airgap) < tol:
            return "airgap"
        if abs(r - m.r_stator_outer) < tol:
            return "dirichlet"
        if abs(ang) < 1e-9:
            return "antiperiodic_left"
        if abs(ang - tau) < 1e-9:
            return "antiperiodic_right"
        raise GeometryError(f"untagged stator boundary at r={r:.6g}, ang={ang:.6g}")

    return tag


def build_pmsm_pole(params=None):
    """Rotor and stator multipatch domains of one machine pole.

    Returns ``(rotor_domain, stator_domain)`` with region tags attached;
    both domains carry an exact-arc ``airgap`` boundary at ``r_airgap``,
    Dirichlet tags on the rotor bore / stator back, and anti-periodic tags
    on the two radial cuts.
    """
    m = params or default_machine()
    rotor_patches, rotor_regions = _rotor_patches(m)
    stator_patches, stator_regions = _stator_patches(m)
    rotor = MultiPatchDomain.from_patches(
        rotor_patches, _rotor_tagger(m), regions=rotor_regions, tol=1e-9 * m.r_rotor_outer
    )
    stator = MultiPatchDomain.from_patches(
        stator_patches, _stator_tagger(m), regions=stator_regions, tol=1e-9 * m.r_stator_outer
    )
    return rotor, stator


# --------------------------------------------------------------------------
# excitations and materials
# --------------------------------------------------------------------------


def magnet_excitation(params, sign=1.0):
    """Permanent-magnet source field per magnet region.

    Magnitude ``B_r / (mu0 mu_r,PM)``, directed along the pole axis
    (perpendicular to the magnet's long side); the sign alternates from
    pole to pole, which the one-pole model expresses through ``sign``.
    """
    mid = 0.5 * params.pole_pitch
    direction = np.array([np.cos(mid), np.sin(mid)])
    h = sign * params.h_source_magnitude * direction
    return {"magnet": (float(h[0]), float(h[1]))}


#: double-layer phase pattern over the six slots of one pole: inner layer,
#: and outer layer shifted by one slot (anti-periodic continuation fills
#: slot 0 of the outer layer with the negated last inner belt).
WINDING_LAYOUT = {
    "in": (("a", 1), ("a", 1), ("c", -1), ("c", -1), ("b", 1), ("b", 1)),
    "out": (("b", -1), ("a", 1), ("a", 1), ("c", -1), ("c", -1), ("b", 1)),
}


def winding_excitation(currents, params, areas):
    """Current density per half-slot region for given phase currents.

    Parameters
    ----------
    currents : mapping
        Phase currents in ampere, keys ``'a', 'b', 'c'``.
    params : MachineModel
    areas : mapping
        Cross-section area per half-slot region name (m^2), as integrated
        from the actual geometry.

    Returns
    -------
    dict region -> J (A/m^2), ``J = sign * N_w * i_phase / area``.
    """
    out = {}
    for layer in ("in", "out"):
        for k, (phase, sgn) in enumerate(WINDING_LAYOUT[layer]):
            region = f"slot{k}_{layer}"
            out[region] = sgn * params.n_turns * float(currents.get(phase, 0.0)) / areas[region]
    return out


def machine_materials(params, side, currents=None, areas=None, magnet_sign=1.0):
    """Material map of one machine side (``'rt'`` or ``'st'``).

    Rotor: iron, magnet (with its source field), air ring.  Stator: iron,
    air (gap ring, opening, wedge), and the twelve half-slot copper regions
    with current densities from ``currents`` (zero for the no-load case).
    """
    nu_air = 1.0 / MU0
    nu_fe = 1.0 / (MU0 * params.mu_r_fe)
    if side == "rt":
        nu_pm = 1.0 / (MU0 * params.mu_r_pm)
        h = magnet_excitation(params, sign=magnet_sign)["magnet"]
        return MaterialMap(
            {
                "rotor_iron": Material(nu=nu_fe, conductivity=params.sigma_fe),
                "magnet": Material(nu=nu_pm, h_source=h, conductivity=params.sigma_pm),
                "air_rt": Material(nu=nu_air),
            }
        )
    if side == "st":
        nu_cu = 1.0 / (MU0 * params.mu_r_cu)
        mats = {
            "stator_iron": Material(nu=nu_fe, conductivity=params.sigma_fe),
            "air_st": Material(nu=nu_air),
        }
        j_map = {}
        if currents:
            if areas is None:
                raise ValueError("winding areas required when currents are nonzero")
            j_map = winding_excitation(currents, params, areas)
        for k in range(params.slots_per_pole):
            for layer in ("in", "out"):
                region = f"slot{k}_{layer}"
                mats[region] = Material(
                    nu=nu_cu,
                    current_density=j_map.get(region, 0.0),
                    conductivity=params.sigma_cu,
                )
        return MaterialMap(mats)
    raise ValueError("side must be 'rt' or 'st'")
