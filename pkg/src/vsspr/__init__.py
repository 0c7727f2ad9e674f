"""Variable step-size partial rank adaptive filtering and channel equalization."""

__version__ = "0.1.0"

from .adaptive_filters import (
    AlgorithmSpec,
    FilterState,
    PsiMode,
    StepRecord,
    SysIdScenario,
    Variant,
    filter_step,
    init_state,
)
from .comms import Constellation, make_constellation
from .config import RunConfig, parse_config
from .equalizer import (
    ExperimentConfig,
    LearningCurve,
    RealizationTrace,
    SerCurve,
    average_learning_curve,
    paper_algorithms,
    run_equalizer_realization,
    run_learning_experiment,
    run_ser_sweep,
)
from .errors import ConfigurationError, NumericError, ParameterError, VssprError

__all__ = [
    "AlgorithmSpec",
    "ConfigurationError",
    "Constellation",
    "ExperimentConfig",
    "FilterState",
    "LearningCurve",
    "NumericError",
    "ParameterError",
    "PsiMode",
    "RealizationTrace",
    "RunConfig",
    "SerCurve",
    "StepRecord",
    "SysIdScenario",
    "Variant",
    "VssprError",
    "average_learning_curve",
    "filter_step",
    "init_state",
    "make_constellation",
    "paper_algorithms",
    "parse_config",
    "run_equalizer_realization",
    "run_learning_experiment",
    "run_ser_sweep",
]
