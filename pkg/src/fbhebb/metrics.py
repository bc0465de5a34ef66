"""Post-hoc weight metrics: connectivity profiles, retention index, peaks, selectivity.

Nothing here mutates a network.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .core import N_SITES, Network, NoFeedbackPathway, WeightMatrix

ACTIVITY_THRESHOLD = 0.1
CONNECTIVITY_THRESHOLD = 0.02
RETENTION_EPS = 1e-9

CSV_COLUMNS = ("epoch", "matrix_role", "matrix_index", "direction", "site", "value")


def fmt(value: float) -> str:
    """Fixed float formatting used in every artifact (17 significant digits)."""
    return format(float(value), ".17g")


class Direction(str, Enum):
    INPUT = "input"  # column means: how strongly each input site projects in
    OUTPUT = "output"  # row means: how strongly each output unit integrates


class MatrixId(NamedTuple):
    role: str  # "forward" | "feedback"
    layer: int  # 1-based

    def __str__(self) -> str:
        return f"{self.role} layer {self.layer}"


def connectivity(m: Union[WeightMatrix, np.ndarray], direction: Union[Direction, str]) -> np.ndarray:
    w = m.w if isinstance(m, WeightMatrix) else np.asarray(m, dtype=np.float64)
    if Direction(direction) is Direction.INPUT:
        return w.mean(axis=0)
    return w.mean(axis=1)


def retention_index(c0: float, c_pre: float, c_post: float, eps: float = RETENTION_EPS) -> Optional[float]:
    """(c_post - c_pre) / |c_pre - c0|, or None when the denominator is <= eps."""
    denom = abs(c_pre - c0)
    if denom <= eps:
        return None
    return (c_post - c_pre) / denom


@dataclass(frozen=True)
class RetentionIndex:
    site: int
    c0: float
    c_pre: float
    c_post: float
    value: Optional[float]

    @property
    def defined(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        return {
            "site": self.site,
            "c0": self.c0,
            "c_pre": self.c_pre,
            "c_post": self.c_post,
            "value": self.value,
            "status": "ok" if self.defined else "undefined denominator",
        }


class Selectivity(NamedTuple):
    is_selective: bool
    margin: float


def selectivity(v: np.ndarray, target_sites: Iterable[int], threshold: float = ACTIVITY_THRESHOLD) -> Selectivity:
    """Margin = min over target sites - max over the rest (sites are 1-based)."""
    v = np.asarray(v, dtype=np.float64)
    targets = sorted(set(target_sites))
    if not targets:
        raise ValueError("target set must be nonempty")
    mask = np.zeros(N_SITES, dtype=bool)
    mask[[s - 1 for s in targets]] = True
    margin = float(v[mask].min() - v[~mask].max())
    return Selectivity(margin > threshold, margin)


def peak_weight(net: Network) -> Tuple[float, MatrixId]:
    """Largest |w| over all learned matrices; ties go to forward, then lower layer."""
    best, where = -1.0, None
    for role, layer, m in net.matrices():
        v = float(np.abs(m.w).max())
        if v > best:
            best, where = v, MatrixId(role, layer)
    return best, where


# -- trajectories ------------------------------------------------------------


@dataclass
class EpochSnapshot:
    epoch: int
    profiles: Dict[Tuple[MatrixId, Direction], np.ndarray] = field(default_factory=dict)
    peak: Optional[Tuple[float, MatrixId]] = None
    probes: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    weights: Optional[Dict[MatrixId, np.ndarray]] = None


@dataclass
class TrajectoryRecord:
    meta: dict = field(default_factory=dict)
    epochs: Dict[int, EpochSnapshot] = field(default_factory=dict)

    @property
    def recorded_epochs(self) -> List[int]:
        return sorted(self.epochs)

    def profile(self, matrix_id: MatrixId, direction: Union[Direction, str], epoch: int) -> np.ndarray:
        return self.epochs[epoch].profiles[(MatrixId(*matrix_id), Direction(direction))]

    def rows(self):
        for e in self.recorded_epochs:
            snap = self.epochs[e]
            for (mid, d), prof in sorted(snap.profiles.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
                for i, val in enumerate(prof):
                    yield e, mid.role, mid.layer, d.value, i + 1, val

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for e, role, layer, d, site, val in self.rows():
                writer.writerow([e, role, layer, d, site, fmt(val)])

    @classmethod
    def read_csv(cls, path: Union[str, Path], meta: Optional[dict] = None) -> "TrajectoryRecord":
        """Rebuild the connectivity part of a record from its long-format CSV."""
        raw: Dict[Tuple[int, MatrixId, Direction], Dict[int, float]] = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
            for row in reader:
                key = (int(row["epoch"]), MatrixId(row["matrix_role"], int(row["matrix_index"])), Direction(row["direction"]))
                raw.setdefault(key, {})[int(row["site"])] = float(row["value"])
        rec = cls(meta=dict(meta or {}))
        for (e, mid, d), sites in raw.items():
            if sorted(sites) != list(range(1, N_SITES + 1)):
                raise ValueError(f"{path}: incomplete profile for epoch {e}, {mid}, {d.value}")
            snap = rec.epochs.setdefault(e, EpochSnapshot(e))
            snap.profiles[(mid, d)] = np.array([sites[s] for s in range(1, N_SITES + 1)])
        return rec


def retention(
    traj: TrajectoryRecord,
    matrix_id: MatrixId,
    direction: Union[Direction, str],
    site: int,
    e0: int = 0,
    e_pre: int = 10,
    e_post: int = 20,
    eps: float = RETENTION_EPS,
) -> RetentionIndex:
    for e in (e0, e_pre, e_post):
        if e not in traj.epochs:
            raise KeyError(f"epoch {e} not recorded")
    c0, c_pre, c_post = (float(traj.profile(matrix_id, direction, e)[site - 1]) for e in (e0, e_pre, e_post))
    return RetentionIndex(site, c0, c_pre, c_post, retention_index(c0, c_pre, c_post, eps))


class TrajectoryRecorder:
    """Callable handed to ``run_protocol``; snapshots metrics at each call."""

    def __init__(
        self,
        probes: Optional[Dict[str, Callable[[Network], np.ndarray]]] = None,
        keep_weights: bool = False,
        meta: Optional[dict] = None,
    ):
        self.probes = probes or {}
        self.keep_weights = keep_weights
        self.record = TrajectoryRecord(meta=dict(meta or {}))

    def __call__(self, epoch: int, net: Network) -> None:
        snap = EpochSnapshot(epoch)
        for role, layer, m in net.matrices():
            mid = MatrixId(role, layer)
            for d in Direction:
                snap.profiles[(mid, d)] = connectivity(m, d)
        snap.peak = peak_weight(net)
        for name, fn in self.probes.items():
            try:
                snap.probes[name] = fn(net)
            except NoFeedbackPathway:
                snap.probes[name] = None
        if self.keep_weights:
            snap.weights = {MatrixId(role, layer): m.w.copy() for role, layer, m in net.matrices()}
        self.record.epochs[epoch] = snap
