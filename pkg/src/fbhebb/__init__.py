"""Feedback-Hebbian network with local plasticity and continual-learning diagnostics."""

from .core import (
    Architecture,
    Injection,
    Network,
    NoFeedbackPathway,
    PropagationError,
    WeightMatrix,
    activation,
    feedback_step,
    forward_step,
    init_weights,
    load_snapshot,
    probe_prediction,
    probe_regeneration,
    save_snapshot,
)
from .metrics import Direction, MatrixId, connectivity, peak_weight, retention, retention_index, selectivity
from .plasticity import RuleParams, RuleVariant, delta_w, train_step, update_means
from .protocols import PAIR_A, PAIR_B, ProtocolSpec, make_sample, run_protocol

__version__ = "0.1.0"
