"""Tessellation-based finite-time differential operators for particle clouds.

Divergence, curl, velocity gradient, and relative helicity of a moving
point-particle cloud, estimated from the volume change of Delaunay dual
cells between two time instants, in periodic or open 2D/3D boxes.
"""

__version__ = "0.1.0"

from . import analysis, experiments, fields, operators, snapshot
from .domain import Domain, ParticleCloud
from .dual_cells import DualCellField, default_dual_kind, dual_volumes
from .errors import (
    BandTooNarrowError,
    ConfigError,
    DegenerateInputError,
    InvariantViolationError,
    SnapshotFormatError,
    TooFewPointsError,
    UnstableStepWarning,
    VoroderivError,
)
from .fields import (
    SyntheticSpectrumField,
    analytic_field,
    list_analytic_fields,
    sample_velocities,
    seed_uniform,
)
from .operators import (
    OperatorField,
    TimePair,
    advect_euler,
    curl_eulerian,
    curl_lagrangian,
    divergence_eulerian,
    divergence_lagrangian,
    gradient_eulerian,
    gradient_green_gauss_2d,
    gradient_lagrangian,
    relative_helicity,
)
from .snapshot import read_snapshot, read_snapshot_pair, write_snapshot
from .tessellation import Tessellation, build_delaunay

__all__ = [
    "__version__",
    "analysis",
    "experiments",
    "fields",
    "operators",
    "snapshot",
    "Domain",
    "ParticleCloud",
    "DualCellField",
    "default_dual_kind",
    "dual_volumes",
    "BandTooNarrowError",
    "ConfigError",
    "DegenerateInputError",
    "InvariantViolationError",
    "SnapshotFormatError",
    "TooFewPointsError",
    "UnstableStepWarning",
    "VoroderivError",
    "SyntheticSpectrumField",
    "analytic_field",
    "list_analytic_fields",
    "sample_velocities",
    "seed_uniform",
    "OperatorField",
    "TimePair",
    "advect_euler",
    "curl_eulerian",
    "curl_lagrangian",
    "divergence_eulerian",
    "divergence_lagrangian",
    "gradient_eulerian",
    "gradient_green_gauss_2d",
    "gradient_lagrangian",
    "relative_helicity",
    "read_snapshot",
    "read_snapshot_pair",
    "write_snapshot",
    "Tessellation",
    "build_delaunay",
]
