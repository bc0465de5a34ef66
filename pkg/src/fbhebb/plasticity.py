"""The local update rule: centred covariance + Oja decay + supervised drive.

For a matrix mapping input ``x`` to output ``y`` with target ``t``::

    dw[r, c] = lr * ( (y[r] - <y>[r]) * (x[c] - <x>[c])
                      - beta * (y[r] - <y>[r])**2 * w[r, c]
                      + (t[r] - y[r]) * x[c] )

``<x>`` and ``<y>`` are exponential running means owned by the matrix.
Every entry depends only on its own pre/post activity, so one update costs
O(|W|).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from .core import Network, WeightMatrix, feedback_step, forward_step, site_vector


class RuleVariant(str, Enum):
    FULL = "full"
    NO_DECAY = "no-decay"
    NO_COVARIANCE = "no-cov"
    NO_SUPERVISED = "no-sup"


class Supervision(str, Enum):
    TASK_OUTPUT = "task-output"
    PAIRED_LAYER_INPUT = "paired-layer-input"
    NONE = "none"


class FeedbackTarget(str, Enum):
    """What a feedback matrix is trained to reconstruct.

    ``drive`` is the paired forward layer's input as that layer saw it
    (after context injection); ``activity`` is the un-injected activity of
    the layer below (the external input for the first pair).
    """

    DRIVE = "drive"
    ACTIVITY = "activity"


class Granularity(str, Enum):
    SAMPLE = "sample"
    EPOCH_MEAN = "epoch-mean"


@dataclass(frozen=True)
class RuleParams:
    lr: float = 0.001
    beta: float = 1.0
    alpha: float = 0.01

    def __post_init__(self) -> None:
        # lr == 0 is allowed: it freezes weights while the means still advance
        if not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


def supervision_of(net: Network, role: str, k: int) -> Supervision:
    """Target source for the matrix at 0-based position ``k`` of ``role``."""
    if role == "feedback":
        return Supervision.PAIRED_LAYER_INPUT
    if k == len(net.forward) - 1:
        return Supervision.TASK_OUTPUT
    return Supervision.NONE


def update_means(m: WeightMatrix, x: np.ndarray, y: np.ndarray, alpha: float) -> WeightMatrix:
    """Advance ``<x>`` and ``<y>`` in place by one exponential-smoothing step."""
    m.mean_in[:] = (1.0 - alpha) * m.mean_in + alpha * x
    m.mean_out[:] = (1.0 - alpha) * m.mean_out + alpha * y
    return m


def delta_w(
    m: WeightMatrix,
    x: np.ndarray,
    y: np.ndarray,
    t: np.ndarray,
    params: RuleParams,
    variant: RuleVariant = RuleVariant.FULL,
) -> np.ndarray:
    """Update for ``m`` given activities; the running means must already be advanced.

    Pass ``t = y`` for unsupervised matrices. ``NO_SUPERVISED`` substitutes
    ``t = y`` itself, so the supervised term vanishes exactly.
    """
    x, y, t = site_vector(x), site_vector(y), site_vector(t)
    variant = RuleVariant(variant)
    if variant is RuleVariant.NO_SUPERVISED:
        t = y
    cy = y - m.mean_out
    cx = x - m.mean_in
    dw = np.outer(t - y, x)
    if variant is not RuleVariant.NO_COVARIANCE:
        dw += np.outer(cy, cx)
    if variant is not RuleVariant.NO_DECAY:
        dw -= params.beta * (cy * cy)[:, None] * m.w
    return params.lr * dw


@dataclass
class StepTrace:
    """Everything one ``train_step`` computed, for inspection and epoch-mean mode."""

    drives: List[np.ndarray]
    activities: List[np.ndarray]
    reconstructions: List[np.ndarray]
    forward_deltas: List[np.ndarray]
    feedback_deltas: List[np.ndarray]


def train_step(
    net: Network,
    x: np.ndarray,
    target: np.ndarray,
    params: RuleParams,
    variant: RuleVariant = RuleVariant.FULL,
    feedback_target: FeedbackTarget = FeedbackTarget.DRIVE,
    apply: bool = True,
) -> StepTrace:
    """Present one sample: forward, feedback, then one local update per matrix.

    Running means always advance. With ``apply=False`` the weight deltas are
    computed but not added (epoch-mean granularity applies them later).
    """
    target = site_vector(target)
    fwd = forward_step(net, x)
    recs = feedback_step(net, fwd.activities)
    fb_target = FeedbackTarget(feedback_target)

    f_deltas = []
    for k, m in enumerate(net.forward):
        xk, yk = fwd.drives[k], fwd.activities[k]
        tk = target if supervision_of(net, "forward", k) is Supervision.TASK_OUTPUT else yk
        update_means(m, xk, yk, params.alpha)
        f_deltas.append(delta_w(m, xk, yk, tk, params, variant))

    b_deltas = []
    for k, m in enumerate(net.feedback):
        if fb_target is FeedbackTarget.DRIVE:
            tk = fwd.drives[k]
        else:
            tk = fwd.activities[k - 1] if k > 0 else site_vector(x)
        xk, yk = fwd.activities[k], recs[k]
        update_means(m, xk, yk, params.alpha)
        b_deltas.append(delta_w(m, xk, yk, tk, params, variant))

    if apply:
        apply_deltas(net, f_deltas, b_deltas)
    return StepTrace(fwd.drives, fwd.activities, recs, f_deltas, b_deltas)


def apply_deltas(
    net: Network,
    forward_deltas: List[np.ndarray],
    feedback_deltas: List[np.ndarray],
    scale: Optional[float] = None,
) -> None:
    for m, d in zip(net.forward, forward_deltas):
        m.w += d if scale is None else scale * d
    for m, d in zip(net.feedback, feedback_deltas):
        m.w += d if scale is None else scale * d
