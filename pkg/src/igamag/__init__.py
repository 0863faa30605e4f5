"""2D isogeometric magnetostatics with harmonic stator-rotor coupling.

NURBS multipatch Galerkin solver for the magnetic vector potential with two
interchangeable couplings across a circular air-gap interface: Fourier
(harmonic) Lagrange multipliers assembled into a saddle-point system, and
an iterative Dirichlet-Neumann substructuring scheme.  Includes an inf-sup
stability diagnostic, a manufactured-solution verification setup, and a
permanent-magnet machine application with EMF/THD post-processing.
"""

from . import (
    assembly,
    cli,
    config,
    linsolve,
    models,
    mortar,
    multipatch,
    patchio,
    postproc,
    splines,
    studies,
    substructuring,
)
from .assembly import Material, MaterialMap, QuadratureRule
from .errors import (
    ConfigError,
    GeometryError,
    InverseMapError,
    IterationError,
    NonConformingError,
    SingularSystemError,
)
from .models import MachineModel, VerificationModel, build_pmsm_pole, build_quarter_ring
from .mortar import HarmonicSet, select_harmonics
from .multipatch import DiscreteSpace, MultiPatchDomain, TraceSpace
from .splines import KnotVector, NurbsCurve, NurbsPatch, make_circular_arc

__version__ = "0.1.0"

__all__ = [
    "assembly", "cli", "config", "linsolve", "models", "mortar", "multipatch",
    "patchio", "postproc", "splines", "studies", "substructuring",
    "Material", "MaterialMap", "QuadratureRule",
    "ConfigError", "GeometryError", "InverseMapError", "IterationError",
    "NonConformingError", "SingularSystemError",
    "MachineModel", "VerificationModel", "build_pmsm_pole", "build_quarter_ring",
    "HarmonicSet", "select_harmonics",
    "DiscreteSpace", "MultiPatchDomain", "TraceSpace",
    "KnotVector", "NurbsCurve", "NurbsPatch", "make_circular_arc",
    "__version__",
]
