"""Recurrent policy network and its policy-gradient trainer."""
from .policy import (
    ActionSample,
    PolicyOutput,
    PolicyParams,
    actions_to_params,
    categorical_entropy,
    init_policy,
    policy_forward,
    sample_actions,
)
from .trainer import (
    ExtractedParams,
    TrainerConfig,
    TrainingError,
    TrainingLog,
    TrajectoryStep,
    compute_advantages,
    extract_best_params,
    load_checkpoint,
    pg_objective,
    save_checkpoint,
    train,
)
