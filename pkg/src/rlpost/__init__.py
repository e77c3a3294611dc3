"""Reinforcement-learned thresholds and median windows for audio event detectors."""
from .events import (
    ClassScores,
    CollarConfig,
    Event,
    ScoreReport,
    decode_events,
    evaluate,
    events_match,
    macro_f1,
    match_events,
)
from .postproc import (
    ParamGrid,
    PostProcParams,
    apply_stack,
    apply_thresholds,
    default_params,
    median_filter_column,
)

__version__ = "0.1.0"
