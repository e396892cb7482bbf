"""Simulation toolkit for Rydberg atomic radio-frequency receivers."""

from .exceptions import *  # noqa: F401,F403
from .registry import (
    RydbergState,
    StateRegistry,
    Transition,
    default_registry,
    load_registry,
    lookup_transition,
    multiband_registry,
    register_transition,
)
from .quantum import (
    Coupling,
    Decay,
    DensityMatrix,
    LevelSystem,
    evolve,
    ladder,
    liouvillian,
    rydberg_ladder,
    rydberg_multiband,
    steady_state,
)
from .eit import (
    EitTrace,
    ProbeSweep,
    detector_noise,
    peak_splitting,
    rabi_readout,
    readout_pipeline,
    response_bandwidth,
    transmission_spectrum,
)
from .transduction import (
    BPSK,
    QPSK,
    FieldEnvelope,
    ReferenceField,
    demod_am,
    demod_fm,
    demod_pm,
    fdm_demod,
    fdm_modulate,
    heterodyne_superpose,
    quasi_static_receive,
    rabi_from_field,
)
from .sensitivity import (
    AtomSensorParams,
    ClassicAntennaParams,
    advantage_db,
    sensitivity_curve,
    sql_sensitivity,
    thermal_sensitivity,
)
from .mimo import DetectOptions, MimoChannel, exhaustive_detect, gs_detect, magnitude_observe, simo_combine
from .config import ExperimentConfig, default_config, load_config
from .experiments import (
    run_eit_spectrum,
    run_link,
    run_mimo,
    run_msac,
    run_multiband,
    run_sensitivity_figure,
    run_vibration_sensing,
)

__version__ = "0.1.0"
