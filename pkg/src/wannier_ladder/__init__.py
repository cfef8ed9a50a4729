"""Exponentially localized generalized Wannier functions for finite
two-dimensional tight-binding insulators, built by diagonalizing projected
position operators, plus charge-center winding diagnostics of the
topological obstruction."""

__version__ = "0.1.0"

from . import errors
from .lattice import (
    BoundaryCondition,
    DisorderSpec,
    HaldaneParams,
    HermitianOperator,
    LatticeGeometry,
    PositionLabel,
    PositionOperator,
    build_haldane,
    build_position,
    rotated_pair,
    standard_pair,
    topological_predicate,
)
from .localization import (
    DecayFit,
    amplitude_map,
    fit_decay,
    frame_checks,
    gwf_decay_fits,
    kernel_decay_fit,
    size_stability,
)
from .pipeline import (
    BandCluster,
    BandProjector,
    GeneralizedWannierFunction,
    GwfSet,
    UniformGapReport,
    band_projectors,
    cluster_spectrum,
    gwf_from_band,
    project_operator,
    run_pipeline,
    validate_alt_position,
)
from .spectral import (
    FermiProjection,
    SpectralDecomposition,
    eigh,
    fermi_projection,
    phase_align,
    spectral_gap,
)
from .topology import (
    BlochFamily,
    ChargeCenterFlow,
    MendResult,
    TransportFrame,
    bloch_blocks,
    charge_center_flow,
    mend_from_params,
    mend_periodic,
    transport_berry_phase,
    transport_frame,
    winding_number,
)
