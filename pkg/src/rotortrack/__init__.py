"""Singularity-free orientation tracking control for a planar rigid rotor.

Compute the pair of orthogonal control fields that steer the expectation
values <cos phi>, <sin phi> of a planar dipole rotor along designated
trajectories, by inverting the orientation dynamics at every time step
while self-consistently propagating the wave function.
"""

from .engine import (
    SimParams,
    SimulationRecord,
    StudyCell,
    convergence_study,
    run_replay,
    run_tracking,
    step,
)
from .errors import (
    BasisLeakage,
    BasisMismatch,
    CommutingObservable,
    ConfigError,
    ConsistencyError,
    GridMismatch,
    NonConvergent,
    NonFinite,
    NonUniformSampling,
    PointOutsideDisk,
    RotorTrackError,
    Singularity,
    SingularityGuard,
    TooFewPoints,
    TrackDataError,
)
from .fields import (
    FieldSample,
    GuardConfig,
    OrientationMoments,
    boundary_margin,
    determinant,
    generic_field_k0,
    orientation_moments,
    solve_fields,
    solve_from_moments,
)
from .rotor import (
    AngularOperator,
    BasisSpec,
    RotorState,
    accel_ops,
    build_basis,
    cos_op,
    expectation,
    kinetic_op,
    operator_table,
    sin_op,
)
from .tracks import (
    BlendedTrack,
    ConsistencyReport,
    DataTrack,
    GaussianTrack,
    SpiralTrack,
    TrackSample,
    TrackSpec,
    blend_in,
    consistency_check,
    data_track,
    gaussian_track,
    lowpass_filter,
    read_points_csv,
    second_derivative,
    spiral_track,
)
from .units import UnitSystem

__version__ = "0.1.0"

__all__ = [
    "AngularOperator", "BasisLeakage", "BasisMismatch", "BasisSpec",
    "BlendedTrack", "CommutingObservable", "ConfigError", "ConsistencyError",
    "ConsistencyReport", "DataTrack", "FieldSample", "GaussianTrack",
    "GridMismatch", "GuardConfig", "NonConvergent", "NonFinite",
    "NonUniformSampling", "OrientationMoments", "PointOutsideDisk",
    "RotorState", "RotorTrackError", "SimParams", "SimulationRecord",
    "Singularity", "SingularityGuard", "SpiralTrack", "StudyCell",
    "TooFewPoints", "TrackDataError", "TrackSample", "TrackSpec",
    "UnitSystem", "accel_ops", "blend_in", "boundary_margin", "build_basis",
    "consistency_check", "convergence_study", "cos_op", "data_track",
    "determinant", "expectation", "gaussian_track", "generic_field_k0",
    "kinetic_op", "lowpass_filter", "operator_table", "orientation_moments",
    "read_points_csv", "run_replay", "run_tracking", "second_derivative",
    "sin_op", "solve_fields", "solve_from_moments", "spiral_track", "step",
]
