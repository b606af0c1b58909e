"""Magneto-inductive near-field integrated sensing and communication:
channel model, estimation bounds, link simulation, and analysis sweeps.
"""

__version__ = "0.1.0"

from .analysis import (
    GainRecord,
    MonteCarloSweep,
    ResolutionRecord,
    SweepCell,
    find_resolution_crossover,
    isac_gain,
    resolution_sweep,
    run_crb_validation,
    tof_resolution,
)
from .backend import BACKEND_NAME, available_backends
from .comms import (
    Frame,
    RxObservation,
    bpsk_ber,
    demodulate_and_nda_estimate,
    estimate_channel_pilot,
    make_frame,
    nda_efficiency,
    noise_variance_for_snr,
    per_symbol_snr,
    simulate_frame,
)
from .errors import (
    AmbiguousDirection,
    ConfigError,
    MiIsacError,
    NoCrossover,
    NonFiniteGeometry,
    NonUnitDirection,
    NotIdentifiable,
    RankDeficientPilots,
    SingularCurvature,
    ZeroChannel,
)
from .estimation import (
    EstimationResult,
    FisherInfo,
    FrameSpec,
    NoiseModel,
    crb_range_analytic,
    effective_noise_variance,
    estimate_direction_eigen,
    estimate_range_closed_form,
    fim_numeric,
    mle_refine,
)
from .physics import (
    MU0,
    CarrierSpec,
    ChannelMatrix,
    CoilSpec,
    CouplingTensor,
    DipoleRegimeWarning,
    LinkGeometry,
    MediumModel,
    attenuation,
    channel_matrix,
    coil_constant,
    condition_number,
    coupling_tensor,
    eigenmodes,
    random_rotation_matrix,
    skin_depth,
    unit_direction,
)

__all__ = [name for name in dir() if not name.startswith("_")]
