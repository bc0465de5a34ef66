"""Two-pair association task and the sequential / interleaved training schedules."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import cycle, islice
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Tuple

import numpy as np

from .core import Network, NoFeedbackPathway, one_hot, probe_prediction, probe_regeneration
from .plasticity import (
    FeedbackTarget,
    Granularity,
    RuleParams,
    RuleVariant,
    apply_deltas,
    train_step,
)


class ProtocolError(RuntimeError):
    """An inner operation failed; carries the (phase, epoch, sample) coordinate."""

    def __init__(self, phase: int, epoch: int, sample: int, cause: BaseException):
        self.phase, self.epoch, self.sample = phase, epoch, sample
        super().__init__(f"phase {phase}, epoch {epoch}, sample {sample}: {cause}")


@dataclass(frozen=True)
class AssociationPair:
    label: str
    input_site: int
    target_sites: FrozenSet[int]


PAIR_A = AssociationPair("A", 3, frozenset({8, 9}))
PAIR_B = AssociationPair("B", 7, frozenset({5, 6}))
PAIRS: Dict[str, AssociationPair] = {"A": PAIR_A, "B": PAIR_B}


def make_sample(pair: AssociationPair) -> Tuple[np.ndarray, np.ndarray]:
    """Binary (input, target) vectors; identical on every call."""
    return one_hot(pair.input_site), one_hot(*sorted(pair.target_sites))


class Regime(str, Enum):
    SEQUENTIAL = "sequential"
    INTERLEAVED = "interleaved"


@dataclass(frozen=True)
class Phase:
    """``pattern`` is cycled to fill each epoch, e.g. ("A",) or ("A", "B")."""

    pattern: Tuple[str, ...]
    samples_per_epoch: int
    epochs: int

    def epoch_sequence(self) -> List[str]:
        return list(islice(cycle(self.pattern), self.samples_per_epoch))


@dataclass(frozen=True)
class ProtocolSpec:
    regime: Optional[Regime]
    phases: Tuple[Phase, ...]

    @property
    def total_epochs(self) -> int:
        return sum(p.epochs for p in self.phases)

    @property
    def phase_end_epochs(self) -> List[int]:
        ends, e = [], 0
        for p in self.phases:
            e += p.epochs
            ends.append(e)
        return ends

    @property
    def snapshot_epochs(self) -> List[int]:
        return list(range(self.total_epochs + 1))

    @classmethod
    def sequential(cls, epochs: int = 10, samples_per_epoch: int = 50) -> "ProtocolSpec":
        return cls(
            Regime.SEQUENTIAL,
            (Phase(("A",), samples_per_epoch, epochs), Phase(("B",), samples_per_epoch, epochs)),
        )

    @classmethod
    def interleaved(cls, epochs: int = 10, samples_per_epoch: int = 100) -> "ProtocolSpec":
        return cls(Regime.INTERLEAVED, (Phase(("A", "B"), samples_per_epoch, epochs),))

    @classmethod
    def for_regime(cls, regime, epochs: int = 10) -> "ProtocolSpec":
        regime = Regime(regime)
        if regime is Regime.SEQUENTIAL:
            return cls.sequential(epochs)
        return cls.interleaved(epochs)


def presentations(spec: ProtocolSpec) -> Iterator[Tuple[int, int, int, str]]:
    """Yield ``(phase, epoch, sample, label)``; phases/samples 0-based, epochs 1-based."""
    epoch = 0
    for pi, phase in enumerate(spec.phases):
        seq = phase.epoch_sequence()
        for _ in range(phase.epochs):
            epoch += 1
            for si, label in enumerate(seq):
                yield pi, epoch, si, label


def pair_counts(spec: ProtocolSpec) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for *_, label in presentations(spec):
        counts[label] = counts.get(label, 0) + 1
    return counts


def standard_probes() -> Dict[str, Callable[[Network], np.ndarray]]:
    """Forward prediction per pair input, and regeneration per pair output pattern."""
    probes: Dict[str, Callable[[Network], np.ndarray]] = {}
    for label, pair in PAIRS.items():
        x, t = make_sample(pair)
        probes[f"predict:{label}"] = lambda n, x=x: probe_prediction(n, x)
        probes[f"regenerate:{label}"] = lambda n, t=t: probe_regeneration(n, t)
    return probes


Recorder = Callable[[int, Network], None]


def run_protocol(
    net: Network,
    spec: ProtocolSpec,
    params: RuleParams = RuleParams(),
    variant: RuleVariant = RuleVariant.FULL,
    recorder: Optional[Recorder] = None,
    granularity: Granularity = Granularity.SAMPLE,
    feedback_target: FeedbackTarget = FeedbackTarget.DRIVE,
    input_noise: float = 0.0,
    noise_seed: int = 0,
    check_bounds: bool = True,
) -> Network:
    """Train ``net`` in place following ``spec``.

    ``recorder(epoch, net)`` fires once before training (epoch 0) and after
    the last sample of every epoch. Means, contexts and the step counter
    carry over phase boundaries.
    """
    granularity = Granularity(granularity)
    samples = {label: make_sample(p) for label, p in PAIRS.items()}
    noise_rng = np.random.default_rng(noise_seed) if input_noise > 0 else None
    if recorder is not None:
        recorder(0, net)

    acc_f: List[np.ndarray] = []
    acc_b: List[np.ndarray] = []
    n_acc = 0
    for pi, epoch, si, label in presentations(spec):
        x, t = samples[label]
        if noise_rng is not None:
            x = np.clip(x + noise_rng.normal(0.0, input_noise, x.shape), 0.0, 1.0)
        try:
            trace = train_step(
                net, x, t, params, variant, feedback_target,
                apply=granularity is Granularity.SAMPLE,
            )
            if check_bounds:
                for a in (*trace.activities, *trace.reconstructions):
                    if not np.all((a > 0.0) & (a < 1.0)):
                        raise FloatingPointError("activity left the open interval (0, 1)")
        except Exception as exc:
            raise ProtocolError(pi + 1, epoch, si, exc) from exc

        if granularity is Granularity.EPOCH_MEAN:
            if n_acc == 0:
                acc_f = [d.copy() for d in trace.forward_deltas]
                acc_b = [d.copy() for d in trace.feedback_deltas]
            else:
                for a, d in zip(acc_f, trace.forward_deltas):
                    a += d
                for a, d in zip(acc_b, trace.feedback_deltas):
                    a += d
            n_acc += 1
            if si == spec.phases[pi].samples_per_epoch - 1:
                apply_deltas(net, acc_f, acc_b, scale=1.0 / n_acc)
                n_acc = 0

        if si == spec.phases[pi].samples_per_epoch - 1:
            if recorder is not None:
                recorder(epoch, net)
    return net


def safe_probe(fn: Callable[[Network], np.ndarray], net: Network) -> Optional[np.ndarray]:
    """Run a probe; ``None`` means the architecture does not support it."""
    try:
        return fn(net)
    except NoFeedbackPathway:
        return None
