"""Network state and propagation dynamics (no learning).

Sites are numbered 1..10 in every user-facing place (reports, CSV, CLI);
arrays are 0-indexed internally, so site ``s`` lives at ``v[s - 1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

N_SITES = 10
FAN_IN = N_SITES
INIT_BOUND = float(np.sqrt(6.0 / FAN_IN))

SNAPSHOT_FORMAT = "fbhebb-snapshot"
SNAPSHOT_VERSION = 1


class PropagationError(RuntimeError):
    """Raised when a layer receives or produces non-finite activity."""


class NoFeedbackPathway(RuntimeError):
    """Raised when a feedback probe is requested from a forward-only network."""


class Injection(str, Enum):
    """Where the previous step's reconstruction re-enters a forward layer."""

    INPUT = "input"  # z_k = W_k (a_{k-1} + r_k)
    PREACTIVATION = "preactivation"  # z_k = W_k a_{k-1} + r_k


class Architecture(str, Enum):
    FF2_FB2 = "2ff2fb"
    FF3_FB3 = "3ff3fb"
    FF2_ONLY = "2ff"

    @property
    def num_forward(self) -> int:
        return 3 if self is Architecture.FF3_FB3 else 2

    @property
    def num_feedback(self) -> int:
        return 0 if self is Architecture.FF2_ONLY else self.num_forward

    @property
    def has_feedback(self) -> bool:
        return self.num_feedback > 0


def site_vector(values: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (N_SITES,):
        raise ValueError(f"site vector must have shape ({N_SITES},), got {v.shape}")
    return v


def one_hot(*sites: int) -> np.ndarray:
    """Binary site vector with 1 at each given (1-based) site."""
    v = np.zeros(N_SITES)
    for s in sites:
        if not 1 <= s <= N_SITES:
            raise ValueError(f"site {s} outside 1..{N_SITES}")
        v[s - 1] = 1.0
    return v


def activation(z: np.ndarray, layer: Optional[str] = None) -> np.ndarray:
    """phi(z) = (1 + tanh z) / 2, elementwise; maps onto [0, 1]."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        where = f" in {layer}" if layer else ""
        raise PropagationError(f"non-finite pre-activation{where}")
    return 0.5 * (1.0 + np.tanh(z))


@dataclass
class WeightMatrix:
    """A learned 10x10 matrix plus the running means that centre its rule.

    Rows index output units, columns index input units.
    """

    w: np.ndarray
    mean_in: np.ndarray = field(default_factory=lambda: np.zeros(N_SITES))
    mean_out: np.ndarray = field(default_factory=lambda: np.zeros(N_SITES))
    supervised: bool = False

    def __post_init__(self) -> None:
        self.w = np.array(self.w, dtype=np.float64)
        if self.w.shape != (N_SITES, N_SITES):
            raise ValueError(f"weight matrix must be {N_SITES}x{N_SITES}, got {self.w.shape}")
        self.mean_in = site_vector(self.mean_in).copy()
        self.mean_out = site_vector(self.mean_out).copy()

    def copy(self) -> "WeightMatrix":
        return WeightMatrix(self.w.copy(), self.mean_in.copy(), self.mean_out.copy(), self.supervised)


def init_weights(
    rng: Union[int, np.random.Generator], supervised: bool = False
) -> WeightMatrix:
    """Kaiming-uniform initialisation, U[-sqrt(6/fan_in), +sqrt(6/fan_in)].

    ``rng`` is either an integer seed or a Generator to draw from.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    w = gen.uniform(-INIT_BOUND, INIT_BOUND, size=(N_SITES, N_SITES))
    return WeightMatrix(w, supervised=supervised)


@dataclass
class ForwardPass:
    """Result of one forward sweep.

    ``drives[k]`` is what forward matrix k actually multiplied (its input
    after any context injection), ``activities[k]`` is its output.
    """

    drives: List[np.ndarray]
    activities: List[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.activities[-1]


@dataclass
class Network:
    arch: Architecture
    forward: List[WeightMatrix]
    feedback: List[WeightMatrix]
    injection: Injection = Injection.INPUT
    context: List[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self) -> None:
        self.arch = Architecture(self.arch)
        self.injection = Injection(self.injection)
        if len(self.forward) != self.arch.num_forward:
            raise ValueError(f"{self.arch.name} needs {self.arch.num_forward} forward matrices")
        if len(self.feedback) != self.arch.num_feedback:
            raise ValueError(f"{self.arch.name} needs {self.arch.num_feedback} feedback matrices")
        if not self.context:
            self.context = [np.zeros(N_SITES) for _ in self.forward]
        if len(self.context) != len(self.forward):
            raise ValueError("one context vector per forward layer required")

    @classmethod
    def build(
        cls,
        arch: Union[Architecture, str] = Architecture.FF2_FB2,
        seed: int = 1,
        injection: Union[Injection, str] = Injection.INPUT,
    ) -> "Network":
        """Fresh network; forward matrices are drawn first, then feedback.

        The draw order means FF2_ONLY and FF2_FB2 share forward weights for
        the same seed.
        """
        arch = Architecture(arch)
        gen = np.random.default_rng(seed)
        n_ff = arch.num_forward
        forward = [init_weights(gen, supervised=(k == n_ff - 1)) for k in range(n_ff)]
        feedback = [init_weights(gen, supervised=True) for _ in range(arch.num_feedback)]
        return cls(arch, forward, feedback, injection=Injection(injection))

    def matrices(self):
        """Yield ``(role, layer, matrix)`` with 1-based layer numbers, forward first."""
        for k, m in enumerate(self.forward):
            yield "forward", k + 1, m
        for k, m in enumerate(self.feedback):
            yield "feedback", k + 1, m

    def copy(self) -> "Network":
        return Network(
            self.arch,
            [m.copy() for m in self.forward],
            [m.copy() for m in self.feedback],
            injection=self.injection,
            context=[c.copy() for c in self.context],
            step=self.step,
        )

    def reset_state(self) -> None:
        for m in (*self.forward, *self.feedback):
            m.mean_in[:] = 0.0
            m.mean_out[:] = 0.0
        for c in self.context:
            c[:] = 0.0
        self.step = 0


def _forward(net: Network, x: np.ndarray, context: Sequence[np.ndarray]) -> ForwardPass:
    drives, acts = [], []
    a = site_vector(x)
    for k, m in enumerate(net.forward):
        ctx = context[k]
        if ctx.shape != (N_SITES,):
            raise ValueError(f"context for forward layer {k + 1} has shape {ctx.shape}")
        if net.injection is Injection.INPUT:
            drive = a + ctx
            z = m.w @ drive
        else:
            drive = a
            z = m.w @ drive + ctx
        a = activation(z, layer=f"forward layer {k + 1}")
        drives.append(drive)
        acts.append(a)
    return ForwardPass(drives, acts)


def forward_step(net: Network, x: np.ndarray) -> ForwardPass:
    """Propagate ``x`` through the forward pathway using the stored context.

    Context is the previous step's reconstruction; it is zero at t=0 and for
    forward-only networks. Weights and context are left untouched.
    """
    return _forward(net, x, net.context)


def feedback_step(net: Network, activities: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Reconstruct each forward layer's input from its output.

    Returns ``r_k = phi(FB_k a_k)`` for every feedback matrix and stores
    ``r_k`` (k >= 1) as the context for the next step. ``r_0`` reconstructs
    the external input and is never injected. Advances the step counter.
    """
    if len(activities) != len(net.forward):
        raise ValueError("need one activity vector per forward layer")
    recs = [
        activation(m.w @ activities[k], layer=f"feedback layer {k + 1}")
        for k, m in enumerate(net.feedback)
    ]
    for k in range(1, len(recs)):
        net.context[k] = recs[k]
    net.step += 1
    return recs


def probe_prediction(net: Network, x: np.ndarray) -> np.ndarray:
    """Final-layer activity for ``x`` with all context forced to zero."""
    zeros = [np.zeros(N_SITES) for _ in net.forward]
    return _forward(net, x, zeros).output


def probe_regeneration(net: Network, output_pattern: np.ndarray) -> np.ndarray:
    """Chain the feedback matrices from the output side down to the input.

    Raises NoFeedbackPathway for forward-only networks.
    """
    if not net.arch.has_feedback:
        raise NoFeedbackPathway(f"{net.arch.value} has no feedback pathway")
    est = site_vector(output_pattern)
    for k in reversed(range(len(net.feedback))):
        est = activation(net.feedback[k].w @ est, layer=f"feedback layer {k + 1}")
    return est


# -- snapshots ---------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "arch": net.arch.value,
        "injection": net.injection.value,
        "step": net.step,
        "context": [c.tolist() for c in net.context],
        "matrices": [
            {
                "role": role,
                "index": layer,
                "supervised": m.supervised,
                "w": m.w.ravel(order="C").tolist(),
                "mean_in": m.mean_in.tolist(),
                "mean_out": m.mean_out.tolist(),
            }
            for role, layer, m in net.matrices()
        ],
    }


def network_from_dict(doc: dict) -> Network:
    if doc.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not a network snapshot")
    forward, feedback = {}, {}
    for entry in doc["matrices"]:
        m = WeightMatrix(
            np.array(entry["w"], dtype=np.float64).reshape(N_SITES, N_SITES),
            entry["mean_in"],
            entry["mean_out"],
            bool(entry["supervised"]),
        )
        target = forward if entry["role"] == "forward" else feedback
        target[int(entry["index"])] = m
    return Network(
        Architecture(doc["arch"]),
        [forward[k] for k in sorted(forward)],
        [feedback[k] for k in sorted(feedback)],
        injection=Injection(doc.get("injection", "input")),
        context=[np.array(c, dtype=np.float64) for c in doc["context"]],
        step=int(doc["step"]),
    )


def save_snapshot(net: Network, path: Union[str, Path]) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")


def load_snapshot(path: Union[str, Path]) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))
