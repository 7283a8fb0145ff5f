"""csqpt: homodyne-detection simulation and maximum-likelihood quantum state
and process tomography for lossy phase channels in truncated Fock space."""

from .analysis import (
    PhaseFit,
    block_mean_phase,
    diagonal_block,
    fit_global_phase,
    fit_phase_line,
    fit_transmissivity,
    phase_map,
    predict_output,
    process_fidelity,
)
from .errors import (
    ConfigError,
    ConvergenceWarning,
    CsqptError,
    DegenerateBlock,
    DimensionMismatch,
    EdgeOrderError,
    EmptyMap,
    FileFormatError,
    InsufficientProbes,
    TruncationError,
)
from .estimators import ProcessTomography, StateTomography
from .fock import (
    ChannelModel,
    DensityMatrix,
    ProcessTensor,
    WignerGrid,
    apply_process,
    coherent_density,
    fock_density,
    loss_channel_tensor,
    mean_photon_number,
    state_fidelity,
    superposition_density,
    truncate_process_tensor,
    wigner,
)
from .homodyne import (
    HomodynePovm,
    QuadratureDataset,
    QuadratureSample,
    build_povm,
    quadrature_pdf,
    quadrature_wavefunction,
    sample_dataset,
)
from .mle import (
    BinnedCounts,
    MleConfig,
    ProcessMleResult,
    StateMleResult,
    bin_dataset,
    log_likelihood,
    process_mle,
    process_mle_from_frequencies,
    state_mle,
)
from .pipeline import ExperimentSpec, cmd_predict, cmd_process_tomo, cmd_simulate, cmd_state_tomo

__version__ = "0.1.0"
