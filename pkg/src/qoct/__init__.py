"""Quantum optical coherence tomography of lossy multilayer samples.

Forward model: wave-transfer matrices give the sample's spectral reflection
response; Hong-Ou-Mandel coincidence interferograms follow by quadrature
over the biphoton joint spectrum, or analytically for single layers.
Inverse model: a genetic algorithm searches layer distances, reflectivities,
and losses against a target trace, with layer-count selection on top.
"""

from .engine import (
    DEFAULT_QUAD,
    FIT_QUAD,
    ArtifactRecord,
    Contribution,
    Interferogram,
    LabeledPosition,
    QuadratureSettings,
    add_shot_noise,
    artifact_tuning_curve,
    background_level,
    closed_form_single_layer,
    closed_form_trace,
    coincidence_trace_numeric,
    default_delay_grid,
    delay_grid_um,
    effective_reflectivities,
    feature_separation,
    label_trace,
    pulsed_limit_trace,
    tuning_markers,
    visibilities,
)
from .errors import (
    DegeneratePairError,
    GainNotSupportedError,
    InvalidInterfaceError,
    NumericalError,
    QoctError,
    QuadratureResolutionError,
    SampleSpecError,
    SingularStackError,
    TraceFileError,
    UnsupportedProfileError,
    ValidationError,
)
from .fileio import (
    BUNDLED_SAMPLES,
    load_sample,
    load_trace,
    resolve_sample,
    save_sample,
    save_trace,
)
from .ga import (
    GAConfig,
    Parameter,
    RetrievalResult,
    SearchSpace,
    decode,
    default_search_space,
    dip_positions,
    encode,
    evolve,
    fine_polish,
    fitness,
    known_front_space,
    local_refine,
    model_select,
    seed_candidates,
    thin_gap_scan,
)
from .spectral import SpectralModel, from_wavelengths, jsi, pump_nm_to_omega0
from .stack import (
    Interface,
    PathFeature,
    Sample,
    Segment,
    count_effective_parameters,
    enumerate_paths,
    sample_matrix,
    scattering_amplitudes,
    seconds_to_um,
    transfer_function,
    transfer_function_spectrum,
    um_to_seconds,
)

__version__ = "0.1.0"
