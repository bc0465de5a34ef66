"""Acceptance criteria evaluated against run artifacts on disk.

Each criterion reads only the artifact it depends on (trajectory CSV for
connectivity and retention, probe CSV for activity probes, summary JSON for
peak weights and unsupported probes), so damage to one file only fails the
criteria built on it.
"""

from __future__ import annotations

import filecmp
import json
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .core import (
    Architecture,
    Network,
    activation,
    network_to_dict,
    one_hot,
    probe_prediction,
    probe_regeneration,
)
from .harness import (
    CONDITIONING_SITES,
    output_layer,
    read_probe_csv,
    run,
    top_feedback_layer,
    write_artifacts,
)
from .metrics import (
    ACTIVITY_THRESHOLD,
    CONNECTIVITY_THRESHOLD,
    Direction,
    TrajectoryRecord,
    connectivity,
    retention,
    retention_index,
    selectivity,
)
from .plasticity import RuleParams, RuleVariant, delta_w, update_means
from .protocols import PAIR_A, PAIR_B, Regime

DEFAULT_SEEDS = (1, 2, 3, 4, 5)

REFERENCE_R_FORWARD = {5: 0.98, 6: 1.68, 8: -1.27, 9: -1.05}
R_MAGNITUDE_TOL = 0.6
R_UNLEARN = -0.5
R_FEEDBACK_MAX = 0.2
FULL_PEAK_RANGE = (0.7, 1.7)
PEAK_LAYER = {
    RuleVariant.FULL: ("forward", 1),
    RuleVariant.NO_DECAY: ("forward", 1),
    RuleVariant.NO_COVARIANCE: ("forward", 2),
    RuleVariant.NO_SUPERVISED: ("forward", 1),
}


class NoArtifacts(FileNotFoundError):
    pass


@dataclass
class RunArtifacts:
    path: Path
    config: RunConfig
    _summary: Optional[dict] = None
    _record: Optional[TrajectoryRecord] = None
    _probes: Optional[dict] = None

    def summary(self) -> dict:
        if self._summary is None:
            self._summary = json.loads((self.path / "summary.json").read_text())
        return self._summary

    def record(self) -> TrajectoryRecord:
        if self._record is None:
            self._record = TrajectoryRecord.read_csv(self.path / "trajectory.csv")
        return self._record

    def probes(self) -> dict:
        if self._probes is None:
            self._probes = read_probe_csv(self.path / "probes.csv")
        return self._probes


RunKey = Tuple[Architecture, RuleVariant, Regime, int]


def load_runs(dirs: Iterable[Path]) -> Dict[RunKey, RunArtifacts]:
    """Find every run directory (one holding ``config.ini``) under ``dirs``."""
    runs: Dict[RunKey, RunArtifacts] = {}
    for d in dirs:
        d = Path(d)
        if not d.exists():
            raise NoArtifacts(f"{d}: no such directory")
        for cfg_path in sorted(d.rglob("config.ini")):
            cfg = RunConfig.load(cfg_path)
            runs[(cfg.arch, cfg.variant, cfg.regime, cfg.seed)] = RunArtifacts(cfg_path.parent, cfg)
    if not runs:
        raise NoArtifacts("no artifacts: no run directories found")
    return runs


@dataclass
class CriterionResult:
    id: str
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    missing: List[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" (missing: {', '.join(self.missing)})" if self.missing else ""
        return f"[{status}] criterion {self.id}: {self.title}{extra}"

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "passed": self.passed, "detail": self.detail, "missing": self.missing}


def _needed(fraction: float, n: int) -> int:
    return math.ceil(fraction * n - 1e-9)


class _Ctx:
    """Lookup helper that collects missing or unreadable artifacts per criterion."""

    def __init__(self, runs: Dict[RunKey, RunArtifacts], seeds: Sequence[int]):
        self.runs, self.seeds = runs, list(seeds)
        self.missing: List[str] = []

    def get(self, arch, variant, regime, seed) -> Optional[RunArtifacts]:
        key = (Architecture(arch), RuleVariant(variant), Regime(regime), seed)
        r = self.runs.get(key)
        if r is None:
            self.missing.append(f"{key[0].value}/{key[1].value}/{key[2].value}/s{seed}")
        return r

    def each(self, arch, variant, regime, fn: Callable[[RunArtifacts], object]) -> Dict[int, object]:
        out: Dict[int, object] = {}
        for s in self.seeds:
            r = self.get(arch, variant, regime, s)
            if r is None:
                continue
            try:
                out[s] = fn(r)
            except (OSError, ValueError, KeyError) as exc:
                self.missing.append(f"{r.path.name}: {type(exc).__name__}: {exc}")
        return out


# -- measurements from artifacts ---------------------------------------------


def _phase_epochs(r: RunArtifacts) -> Tuple[int, int, int]:
    e = r.config.epochs
    return 0, e, 2 * e


def _probe_margin(r: RunArtifacts, epoch: int, kind: str, label: str, targets) -> float:
    return selectivity(r.probes()[(epoch, kind, label)], targets, ACTIVITY_THRESHOLD).margin


def _forward_retention(r: RunArtifacts) -> Dict[int, Optional[float]]:
    rec = r.record()
    mid = output_layer(r.config.arch)
    e0, e1, e2 = _phase_epochs(r)
    return {s: retention(rec, mid, Direction.OUTPUT, s, e0, e1, e2).value for s in (5, 6, 8, 9)}


def _feedback_retention(r: RunArtifacts) -> Dict[int, Optional[float]]:
    rec = r.record()
    mid = top_feedback_layer(r.config.arch)
    e0, e1, e2 = _phase_epochs(r)
    return {s: retention(rec, mid, Direction.INPUT, s, e0, e1, e2).value for s in (8, 9)}


def _co_margins(r: RunArtifacts) -> Dict[str, float]:
    rec = r.record()
    last = max(rec.recorded_epochs)
    out = {"forward": selectivity(rec.profile(output_layer(r.config.arch), Direction.OUTPUT, last),
                                  CONDITIONING_SITES, CONNECTIVITY_THRESHOLD).margin}
    fb = top_feedback_layer(r.config.arch)
    if fb is not None:
        out["feedback"] = selectivity(rec.profile(fb, Direction.INPUT, last), CONDITIONING_SITES,
                                      CONNECTIVITY_THRESHOLD).margin
    return out


def _peaks(r: RunArtifacts) -> Dict[int, dict]:
    return {int(e): v for e, v in r.summary()["peak_weight"].items()}


def _regeneration_status(r: RunArtifacts) -> str:
    end = str(2 * r.config.epochs)
    return r.summary()["probes"][end]["regenerate:B"]["status"]


def _tally(per_seed: Dict[int, bool], need: int, ctx: _Ctx) -> dict:
    hits = sum(bool(v) for v in per_seed.values())
    return {"per_seed": {str(k): bool(v) for k, v in per_seed.items()}, "hits": hits, "needed": need,
            "ok": hits >= need and len(per_seed) == len(ctx.seeds)}


# -- criteria ----------------------------------------------------------------


def _c1(ctx: _Ctx, arch=Architecture.FF2_FB2) -> dict:
    def f(r):
        post = _probe_margin(r, r.config.epochs, "predict", "A", PAIR_A.target_sites)
        pre = _probe_margin(r, 0, "predict", "A", PAIR_A.target_sites)
        return post, pre
    m = ctx.each(arch, "full", "sequential", f)
    n = len(ctx.seeds)
    post = _tally({s: v[0] > ACTIVITY_THRESHOLD for s, v in m.items()}, n, ctx)
    pre = _tally({s: v[1] <= ACTIVITY_THRESHOLD for s, v in m.items()}, n, ctx)
    return {"ok": post["ok"] and pre["ok"], "post_phase1_selective": post, "pretraining_not_selective": pre,
            "margins": {str(s): {"post": v[0], "pre": v[1]} for s, v in m.items()}}


def _c2(ctx: _Ctx, arch=Architecture.FF2_FB2) -> dict:
    def f(r):
        post = _probe_margin(r, r.config.epochs, "regenerate", "A", {PAIR_A.input_site})
        pre = _probe_margin(r, 0, "regenerate", "A", {PAIR_A.input_site})
        return post, pre
    m = ctx.each(arch, "full", "sequential", f)
    n = len(ctx.seeds)
    post = _tally({s: v[0] > ACTIVITY_THRESHOLD for s, v in m.items()}, n, ctx)
    pre = _tally({s: v[1] <= ACTIVITY_THRESHOLD for s, v in m.items()}, n, ctx)
    return {"ok": post["ok"] and pre["ok"], "post_phase1_selective": post, "pretraining_not_selective": pre,
            "margins": {str(s): {"post": v[0], "pre": v[1]} for s, v in m.items()}}


def _c3(ctx: _Ctx, arch=Architecture.FF2_FB2) -> dict:
    m = ctx.each(arch, "full", "sequential", _forward_retention)

    def signs(R):
        vals = [R[k] for k in (5, 6, 8, 9)]
        if any(v is None for v in vals):
            return False
        return R[5] > 0 and R[6] > 0 and R[8] < R_UNLEARN and R[9] < R_UNLEARN

    def close(R):
        return all(R[k] is not None and abs(R[k] - REFERENCE_R_FORWARD[k]) <= R_MAGNITUDE_TOL for k in REFERENCE_R_FORWARD)

    t = _tally({s: signs(R) for s, R in m.items()}, _needed(0.8, len(ctx.seeds)), ctx)
    return {"ok": t["ok"], "signs": t, "R": {str(s): {f"R{k}": v for k, v in R.items()} for s, R in m.items()},
            "informative_magnitude_match_any_seed": any(close(R) for R in m.values())}


def _c4(ctx: _Ctx, arch=Architecture.FF2_FB2) -> dict:
    m = ctx.each(arch, "full", "sequential", _feedback_retention)
    ok = {s: all(v is not None and abs(v) <= R_FEEDBACK_MAX for v in R.values()) for s, R in m.items()}
    t = _tally(ok, _needed(0.8, len(ctx.seeds)), ctx)
    return {"ok": t["ok"], "small_R": t, "R": {str(s): {f"R{k}": v for k, v in R.items()} for s, R in m.items()}}


def _c5(ctx: _Ctx, arch=Architecture.FF2_FB2) -> dict:
    m = ctx.each(arch, "full", "interleaved", _co_margins)
    ok = {s: v["forward"] > CONNECTIVITY_THRESHOLD and v.get("feedback", -np.inf) > CONNECTIVITY_THRESHOLD
          for s, v in m.items()}
    t = _tally(ok, _needed(0.8, len(ctx.seeds)), ctx)
    fwd = _tally({s: v["forward"] > CONNECTIVITY_THRESHOLD for s, v in m.items()}, t["needed"], ctx)
    fb = _tally({s: v.get("feedback", -np.inf) > CONNECTIVITY_THRESHOLD for s, v in m.items()}, t["needed"], ctx)
    return {"ok": t["ok"], "both": t, "forward_only": fwd, "feedback_only": fb,
            "margins": {str(s): v for s, v in m.items()}}


def _c6(ctx: _Ctx) -> dict:
    deep = {name: fn(ctx, Architecture.FF3_FB3) for name, fn in
            (("c1", _c1), ("c2", _c2), ("c3", _c3), ("c4", _c4), ("c5", _c5))}
    deep_ok = all(v["ok"] for v in deep.values())
    need = _needed(0.8, len(ctx.seeds))
    ff = Architecture.FF2_ONLY

    def pred_b(r):
        return _probe_margin(r, 2 * r.config.epochs, "predict", "B", PAIR_B.target_sites) > ACTIVITY_THRESHOLD

    pb = _tally(ctx.each(ff, "full", "sequential", pred_b), need, ctx)
    regen = _tally(ctx.each(ff, "full", "sequential", lambda r: _regeneration_status(r) == "unsupported"),
                   len(ctx.seeds), ctx)
    cond = ctx.each(ff, "full", "interleaved", _co_margins)
    cond_fail = _tally({s: v["forward"] <= CONNECTIVITY_THRESHOLD for s, v in cond.items()}, need, ctx)
    return {"ok": deep_ok and pb["ok"] and regen["ok"] and cond_fail["ok"],
            "ff3_fb3": {k: v["ok"] for k, v in deep.items()}, "ff3_fb3_detail": deep,
            "ff2_only_predict_B": pb, "ff2_only_regeneration_unsupported": regen,
            "ff2_only_conditioning_fails": cond_fail,
            "ff2_only_conditioning_margins": {str(s): v["forward"] for s, v in cond.items()}}


def _c7(ctx: _Ctx) -> dict:
    variants = (RuleVariant.NO_COVARIANCE, RuleVariant.NO_DECAY, RuleVariant.FULL, RuleVariant.NO_SUPERVISED)
    peaks = {v: ctx.each("2ff2fb", v, "sequential", lambda r: _peaks(r)[2 * r.config.epochs]) for v in variants}
    order, full_range, nosup, layer = {}, {}, {}, {}
    for s in ctx.seeds:
        if not all(s in peaks[v] for v in variants):
            continue
        vals = [peaks[v][s]["max_abs"] for v in variants]
        order[s] = all(a > b for a, b in zip(vals, vals[1:]))
        full = peaks[RuleVariant.FULL][s]["max_abs"]
        full_range[s] = FULL_PEAK_RANGE[0] <= full <= FULL_PEAK_RANGE[1]
        nosup[s] = peaks[RuleVariant.NO_SUPERVISED][s]["max_abs"] < full
        layer[s] = all((peaks[v][s]["role"], peaks[v][s]["layer"]) == PEAK_LAYER[v] for v in variants)
    n = len(ctx.seeds)
    t_order, t_range, t_nosup = _tally(order, n, ctx), _tally(full_range, n, ctx), _tally(nosup, n, ctx)
    return {"ok": t_order["ok"] and t_range["ok"] and t_nosup["ok"],
            "ordering": t_order, "full_in_range": t_range, "no_sup_below_full": t_nosup,
            "informative_layer_match": _tally(layer, _needed(0.6, n), ctx),
            "peaks": {v.value: {str(s): p for s, p in d.items()} for v, d in peaks.items()}}


def _c8(ctx: _Ctx) -> dict:
    need = _needed(0.8, len(ctx.seeds))
    seq = ctx.each("2ff2fb", "no-sup", "sequential", _forward_retention)
    no_unlearn = _tally({s: all(R[k] is None or R[k] > R_UNLEARN for k in (8, 9)) for s, R in seq.items()}, need, ctx)
    inter = ctx.each("2ff2fb", "no-sup", "interleaved", _co_margins)
    fails = _tally({s: v["forward"] <= CONNECTIVITY_THRESHOLD for s, v in inter.items()}, need, ctx)
    return {"ok": no_unlearn["ok"] and fails["ok"], "sequential_no_clean_unlearning": no_unlearn,
            "interleaved_fails_co_maintenance": fails,
            "R": {str(s): {f"R{k}": R[k] for k in (8, 9)} for s, R in seq.items()},
            "margins": {str(s): v["forward"] for s, v in inter.items()}}


def _c10(ctx: _Ctx) -> dict:
    full = ctx.each("2ff2fb", "full", "sequential", _peaks)
    nodecay = ctx.each("2ff2fb", "no-decay", "sequential", _peaks)
    ok = {}
    for s in ctx.seeds:
        if s in full and s in nodecay:
            epochs = sorted(set(full[s]) | set(nodecay[s]))
            ok[s] = all(e in full[s] and e in nodecay[s] and full[s][e]["max_abs"] <= nodecay[s][e]["max_abs"]
                        for e in epochs)
    t = _tally(ok, len(ctx.seeds), ctx)
    return {"ok": t["ok"], "every_epoch": t}


CRITERIA: List[Tuple[str, str, Callable[[_Ctx], dict]]] = [
    ("1", "single-association forward prediction", _c1),
    ("2", "feedback regeneration", _c2),
    ("3", "sequential LTD-like unlearning at forward output", _c3),
    ("4", "feedback retention of pair A", _c4),
    ("5", "interleaved co-maintenance", _c5),
    ("6", "architectural controls", _c6),
    ("7", "ablation peak weights", _c7),
    ("8", "no-supervision failure modes", _c8),
    ("10", "Oja directional check", _c10),
]


def evaluate_runs(runs: Dict[RunKey, RunArtifacts], seeds: Sequence[int] = DEFAULT_SEEDS) -> List[CriterionResult]:
    out = []
    for cid, title, fn in CRITERIA:
        ctx = _Ctx(runs, seeds)
        detail = fn(ctx)
        missing = sorted(set(ctx.missing))
        out.append(CriterionResult(cid, title, bool(detail.pop("ok")) and not missing, detail, missing))
    return out


# -- criterion 9: seed-independent property checks ---------------------------


def _scalar_delta(w, x, y, t, mx, my, lr, beta):
    """Entry-by-entry evaluation of the update rule in plain Python floats."""
    out = [[0.0] * 10 for _ in range(10)]
    for r in range(10):
        for c in range(10):
            cov = (y[r] - my[r]) * (x[c] - mx[c])
            oja = beta * (y[r] - my[r]) ** 2 * w[r][c]
            sup = (t[r] - y[r]) * x[c]
            out[r][c] = lr * (cov - oja + sup)
    return out


def property_checks(seed: int = 0) -> Dict[str, bool]:
    rng = np.random.default_rng(seed)
    checks: Dict[str, bool] = {}
    params = RuleParams(lr=0.01, beta=0.7, alpha=0.05)

    def random_state():
        net = Network.build(Architecture.FF2_FB2, int(rng.integers(1 << 30)))
        m = net.forward[1]
        m.mean_in[:] = rng.uniform(0, 1, 10)
        m.mean_out[:] = rng.uniform(0, 1, 10)
        return m, rng.uniform(0, 1, 10), rng.uniform(0, 1, 10), rng.uniform(0, 1, 10)

    ok = True
    for _ in range(20):
        m, x, y, _t = random_state()
        with_t = delta_w(m, x, y, y, params, RuleVariant.FULL)
        cy, cx = y - m.mean_out, x - m.mean_in
        no_sup = params.lr * (np.outer(cy, cx) - params.beta * (cy * cy)[:, None] * m.w)
        ok &= bool(np.array_equal(with_t, no_sup))
    checks["supervision neutrality (t=y)"] = ok

    ok = True
    for _ in range(20):
        m, x, y, _t = random_state()
        m2 = m.copy()
        d = delta_w(m2, x, y, y, RuleParams(lr=0.01, beta=0.0, alpha=0.05), RuleVariant.NO_COVARIANCE)
        ok &= bool(np.all(d == 0.0))
    checks["variant zeroing (no-cov + no-decay + t=y)"] = ok

    z = np.concatenate([rng.normal(0, 5, 50), [-30.0, -20.0, 0.0, 20.0, 30.0]])
    a = activation(z)
    checks["activation bounds"] = bool(np.all((a >= 0) & (a <= 1)) and np.all(np.diff(activation(np.sort(z))) >= 0))

    trained = run(RunConfig(seed=3, epochs=2, snapshots="none")).net
    before = json.dumps(network_to_dict(trained))
    probe_prediction(trained, one_hot(3))
    probe_regeneration(trained, one_hot(8, 9))
    connectivity(trained.forward[0], Direction.INPUT)
    after = json.dumps(network_to_dict(trained))
    checks["probe purity"] = before == after

    alpha = 0.01
    ok = True
    x = rng.uniform(0, 1, 10)
    for n in (1, 10, 100):
        m = Network.build(Architecture.FF2_FB2, 1).forward[0]
        for _ in range(n):
            update_means(m, x, x, alpha)
        ok &= bool(np.max(np.abs(m.mean_in - (1 - (1 - alpha) ** n) * x)) <= 1e-12)
    checks["running-mean closed form"] = ok

    with tempfile.TemporaryDirectory() as tmp:
        cfg = RunConfig(seed=2, snapshots="phases")
        a_dir = write_artifacts(run(cfg), Path(tmp) / "a")
        b_dir = write_artifacts(run(cfg), Path(tmp) / "b")
        names = sorted(p.relative_to(a_dir) for p in a_dir.rglob("*") if p.is_file())
        names_b = sorted(p.relative_to(b_dir) for p in b_dir.rglob("*") if p.is_file())
        checks["determinism (byte-identical artifacts)"] = names == names_b and all(
            filecmp.cmp(a_dir / n, b_dir / n, shallow=False) for n in names)

    w1, w2 = rng.normal(size=(10, 10)), rng.normal(size=(10, 10))
    ok = True
    for d in Direction:
        lhs = connectivity(2.0 * w1 - 0.5 * w2, d)
        rhs = 2.0 * connectivity(w1, d) - 0.5 * connectivity(w2, d)
        ok &= bool(np.allclose(lhs, rhs, rtol=0, atol=1e-12))
    checks["connectivity linearity"] = ok

    ok = True
    for _ in range(50):
        c0, cp, cq = (float(v) for v in rng.integers(-1000, 1000, 3) / 64.0)
        base = retention_index(c0, cp, cq)
        if base is None:
            continue
        k = float(rng.integers(-1000, 1000)) / 64.0
        s = float(2.0 ** rng.integers(-4, 5))
        ok &= retention_index(c0 + k, cp + k, cq + k) == base
        ok &= retention_index(s * c0, s * cp, s * cq) == base
        # the denominator is an absolute value, so a negative scale flips R
        ok &= retention_index(-s * c0, -s * cp, -s * cq) == -base
    checks["retention shift/scale algebra"] = ok

    ok = True
    for _ in range(5):
        m, x, y, t = random_state()
        got = delta_w(m, x, y, t, params, RuleVariant.FULL)
        ref = _scalar_delta(m.w.tolist(), x.tolist(), y.tolist(), t.tolist(), m.mean_in.tolist(),
                            m.mean_out.tolist(), params.lr, params.beta)
        ok &= bool(np.max(np.abs(got - np.array(ref))) <= 1e-12)
    checks["update rule matches scalar oracle"] = ok
    return checks


def property_criterion() -> CriterionResult:
    checks = property_checks()
    return CriterionResult("9", "property suite", all(checks.values()), {"checks": checks})


def evaluate(dirs: Iterable[Path], seeds: Sequence[int] = DEFAULT_SEEDS) -> List[CriterionResult]:
    results = evaluate_runs(load_runs(dirs), seeds)
    results.insert(8, property_criterion())
    return results


def format_report(results: Sequence[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)
