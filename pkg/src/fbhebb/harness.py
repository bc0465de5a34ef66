"""Single runs, their on-disk artifacts, and the built-in experiment grids."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .core import Architecture, Network, save_snapshot
from .metrics import (
    ACTIVITY_THRESHOLD,
    CONNECTIVITY_THRESHOLD,
    Direction,
    MatrixId,
    TrajectoryRecord,
    TrajectoryRecorder,
    fmt,
    retention,
    selectivity,
)
from .plasticity import RuleVariant
from .protocols import PAIRS, ProtocolSpec, Regime, run_protocol, standard_probes

log = logging.getLogger(__name__)

OUTPUT_SITES = (5, 6, 8, 9)
FEEDBACK_SITES = (8, 9)
CONDITIONING_SITES = frozenset({5, 6, 8, 9})
PROBE_COLUMNS = ("epoch", "probe", "pair", "site", "value")


def output_layer(arch: Architecture) -> MatrixId:
    """The forward matrix that drives the task output."""
    return MatrixId("forward", arch.num_forward)


def top_feedback_layer(arch: Architecture) -> Optional[MatrixId]:
    """The feedback matrix that reads the task output, if any."""
    return MatrixId("feedback", arch.num_feedback) if arch.has_feedback else None


@dataclass
class RunResult:
    config: RunConfig
    net: Network
    record: TrajectoryRecord
    summary: dict
    snapshots: Dict[int, Network]


def run(config: RunConfig) -> RunResult:
    spec = ProtocolSpec.for_regime(config.regime, config.epochs)
    net = Network.build(config.arch, config.seed, injection=config.injection)
    recorder = TrajectoryRecorder(standard_probes(), meta={"config": config.to_dict()})
    keep = {"none": set(), "phases": {0, *spec.phase_end_epochs}, "all": set(spec.snapshot_epochs)}[config.snapshots]
    snapshots: Dict[int, Network] = {}

    def record(epoch: int, n: Network) -> None:
        recorder(epoch, n)
        if epoch in keep:
            snapshots[epoch] = n.copy()

    run_protocol(
        net,
        spec,
        config.params,
        config.variant,
        record,
        granularity=config.granularity,
        feedback_target=config.feedback_target,
        input_noise=config.input_noise,
        noise_seed=config.seed,
    )
    summary = summarize(recorder.record, config, spec)
    return RunResult(config, net, recorder.record, summary, snapshots)


def summarize(record: TrajectoryRecord, config: RunConfig, spec: ProtocolSpec) -> dict:
    arch = config.arch
    out_id, fb_id = output_layer(arch), top_feedback_layer(arch)
    ends = spec.phase_end_epochs
    last = spec.total_epochs
    summary: dict = {
        "config": config.to_dict(),
        "recorded_epochs": record.recorded_epochs,
        "phase_end_epochs": ends,
        "peak_weight": {
            str(e): {"max_abs": s.peak[0], "role": s.peak[1].role, "layer": s.peak[1].layer}
            for e, s in sorted(record.epochs.items())
        },
    }

    if config.regime is Regime.SEQUENTIAL and last > 0:
        e0, e_pre, e_post = 0, ends[0], ends[1]
        summary["retention"] = {
            "epochs": [e0, e_pre, e_post],
            "forward_output": {
                "matrix": str(out_id),
                "direction": "output",
                "sites": [retention(record, out_id, Direction.OUTPUT, s, e0, e_pre, e_post).to_dict() for s in OUTPUT_SITES],
            },
        }
        if fb_id is not None:
            summary["retention"]["feedback_input"] = {
                "matrix": str(fb_id),
                "direction": "input",
                "sites": [retention(record, fb_id, Direction.INPUT, s, e0, e_pre, e_post).to_dict() for s in FEEDBACK_SITES],
            }

    if config.regime is Regime.INTERLEAVED and last > 0:
        snap = record.epochs[last]
        co = {"epoch": last, "threshold": CONNECTIVITY_THRESHOLD}
        co["forward_output"] = _co_maintenance(snap.profiles[(out_id, Direction.OUTPUT)], out_id)
        if fb_id is not None:
            co["feedback_input"] = _co_maintenance(snap.profiles[(fb_id, Direction.INPUT)], fb_id)
        summary["co_maintenance"] = co

    probes = {}
    for e in sorted({0, *ends}):
        snap = record.epochs[e]
        entry = {}
        for name, vec in snap.probes.items():
            kind, label = name.split(":")
            pair = PAIRS[label]
            targets = pair.target_sites if kind == "predict" else {pair.input_site}
            if vec is None:
                entry[name] = {"status": "unsupported"}
            else:
                sel = selectivity(vec, targets, ACTIVITY_THRESHOLD)
                entry[name] = {"status": "ok", "selective": sel.is_selective, "margin": sel.margin, "values": vec.tolist()}
        probes[str(e)] = entry
    summary["probes"] = probes
    return summary


def _co_maintenance(profile: np.ndarray, mid: MatrixId) -> dict:
    """Four-site margin plus each pair's own margin over the shared non-target ceiling."""
    sel = selectivity(profile, CONDITIONING_SITES, CONNECTIVITY_THRESHOLD)
    ceiling = max(profile[s - 1] for s in range(1, len(profile) + 1) if s not in CONDITIONING_SITES)
    per_pair = {label: float(min(profile[s - 1] for s in p.target_sites) - ceiling) for label, p in PAIRS.items()}
    return {"matrix": str(mid), "margin": sel.margin, "maintained": sel.is_selective, "pair_margins": per_pair}


def write_artifacts(result: RunResult, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(result.config.dumps())
    result.record.write_csv(out_dir / "trajectory.csv")
    write_probe_csv(result.record, out_dir / "probes.csv")
    (out_dir / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    if result.snapshots:
        snap_dir = out_dir / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for e, net in sorted(result.snapshots.items()):
            save_snapshot(net, snap_dir / f"epoch_{e:03d}.json")
    return out_dir


def write_probe_csv(record: TrajectoryRecord, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROBE_COLUMNS)
        for e in record.recorded_epochs:
            for name, vec in sorted(record.epochs[e].probes.items()):
                if vec is None:
                    continue
                kind, label = name.split(":")
                for i, v in enumerate(vec):
                    writer.writerow([e, kind, label, i + 1, fmt(v)])


def read_probe_csv(path: Path) -> Dict[Tuple[int, str, str], np.ndarray]:
    raw: Dict[Tuple[int, str, str], Dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PROBE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            raw.setdefault((int(row["epoch"]), row["probe"], row["pair"]), {})[int(row["site"])] = float(row["value"])
    return {k: np.array([v[s] for s in sorted(v)]) for k, v in raw.items()}


def format_run_report(summary: dict) -> str:
    lines = []
    ret = summary.get("retention")
    if ret:
        lines.append(f"retention index, epochs {tuple(ret['epochs'])}")
        for key in ("forward_output", "feedback_input"):
            if key not in ret:
                continue
            block = ret[key]
            cells = []
            for s in block["sites"]:
                v = "undef" if s["value"] is None else f"{s['value']:+.3f}"
                cells.append(f"R{s['site']}={v}")
            lines.append(f"  {block['matrix']:<18} {block['direction']:<6} " + "  ".join(cells))
    co = summary.get("co_maintenance")
    if co:
        for key in ("forward_output", "feedback_input"):
            if key in co:
                b = co[key]
                verdict = "maintained" if b["maintained"] else "not maintained"
                lines.append(f"co-maintenance {b['matrix']:<18} margin {b['margin']:+.4f} ({verdict})")
    last = str(max(int(e) for e in summary["peak_weight"]))
    pk = summary["peak_weight"][last]
    lines.append(f"peak |w| at epoch {last}: {pk['max_abs']:.4f} in {pk['role']} layer {pk['layer']}")
    return "\n".join(lines)


# -- experiment grids --------------------------------------------------------

CONTROL_ARCHS = (Architecture.FF2_FB2, Architecture.FF3_FB3, Architecture.FF2_ONLY)
ABLATION_VARIANTS = (RuleVariant.FULL, RuleVariant.NO_DECAY, RuleVariant.NO_COVARIANCE, RuleVariant.NO_SUPERVISED)
REGIMES = (Regime.SEQUENTIAL, Regime.INTERLEAVED)


def matrix_cells(name: str) -> List[Dict[str, object]]:
    """Config deltas for a built-in grid: ``controls``, ``ablations`` or ``acceptance`` (their union)."""
    if name == "controls":
        return [{"arch": a, "regime": r} for a in CONTROL_ARCHS for r in REGIMES]
    if name == "ablations":
        return [{"variant": v, "regime": r} for v in ABLATION_VARIANTS for r in REGIMES]
    if name == "acceptance":
        cells, seen = [], set()
        for cell in matrix_cells("controls") + matrix_cells("ablations"):
            cfg = RunConfig().with_overrides(**cell)
            key = (cfg.arch, cfg.variant, cfg.regime)
            if key not in seen:
                seen.add(key)
                cells.append(cell)
        return cells
    raise KeyError(f"unknown matrix {name!r}; expected controls, ablations or acceptance")


def parse_seeds(text: str) -> List[int]:
    """``"1-5"`` or ``"1,3,7"`` (or a mix) to a sorted list of seeds."""
    seeds = set()
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.update(range(int(lo), int(hi) + 1))
        else:
            seeds.add(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return sorted(seeds)


def _run_cell(args) -> Tuple[str, dict, Optional[str]]:
    config, out_root = args
    try:
        result = run(config)
        write_artifacts(result, Path(out_root) / config.run_name)
        return config.run_name, result.summary, None
    except Exception as exc:  # recorded per cell, never aborts the grid
        return config.run_name, {"config": config.to_dict()}, f"{type(exc).__name__}: {exc}"


def run_matrix(
    name: str,
    seeds: Sequence[int],
    out_root: Path,
    base: RunConfig = RunConfig(),
    workers: int = 1,
) -> dict:
    configs = [base.with_overrides(seed=s, **cell) for cell in matrix_cells(name) for s in seeds]
    jobs = [(c, str(out_root)) for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    summaries = {rn: s for rn, s, err in results if err is None}
    errors = {rn: err for rn, s, err in results if err is not None}
    for rn, err in errors.items():
        log.warning("cell %s failed: %s", rn, err)
    report = grid_report(name, configs, summaries, errors)
    Path(out_root).mkdir(parents=True, exist_ok=True)
    (Path(out_root) / f"grid_{name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _forward_prediction_verdict(summary: dict) -> dict:
    end = str(summary["phase_end_epochs"][-1])
    p = summary["probes"][end]["predict:B"]
    return {"selective": p["selective"], "margin": p["margin"]}


def _regeneration_verdict(summary: dict) -> dict:
    end = str(summary["phase_end_epochs"][-1])
    p = summary["probes"][end]["regenerate:B"]
    if p["status"] == "unsupported":
        return {"outcome": "unsupported"}
    return {"outcome": "selective" if p["selective"] else "not selective", "margin": p["margin"]}


def _conditioning_verdict(summary: dict) -> dict:
    co = summary["co_maintenance"]["forward_output"]
    up = [label for label, m in sorted(co["pair_margins"].items()) if m > CONNECTIVITY_THRESHOLD]
    if co["maintained"]:
        outcome = "both maintained"
    elif up:
        outcome = "one target set dominates"
    else:
        outcome = "neither maintained"
    return {"outcome": outcome, "margin": co["margin"], "pair_margins": co["pair_margins"]}


def grid_report(name: str, configs: Sequence[RunConfig], summaries: Dict[str, dict], errors: Dict[str, str]) -> dict:
    cells: Dict[str, dict] = {}
    for c in configs:
        key = f"{c.arch.value}/{c.variant.value}/{c.regime.value}"
        cell = cells.setdefault(key, {"arch": c.arch.value, "variant": c.variant.value, "regime": c.regime.value, "seeds": {}})
        rn = c.run_name
        if rn in errors:
            cell["seeds"][str(c.seed)] = {"error": errors[rn]}
            continue
        s = summaries[rn]
        entry: dict = {}
        last = str(max(int(e) for e in s["peak_weight"]))
        entry["peak_weight"] = s["peak_weight"][last]
        if c.regime is Regime.SEQUENTIAL:
            entry["forward_prediction"] = _forward_prediction_verdict(s)
            entry["regeneration"] = _regeneration_verdict(s)
            fo = {f"R{x['site']}": x["value"] for x in s["retention"]["forward_output"]["sites"]}
            entry["retention_forward_output"] = fo
            entry["clean_unlearning"] = all(fo[k] is not None and fo[k] < -0.5 for k in ("R8", "R9"))
            if "feedback_input" in s["retention"]:
                entry["retention_feedback_input"] = {f"R{x['site']}": x["value"] for x in s["retention"]["feedback_input"]["sites"]}
        else:
            entry["conditioning"] = _conditioning_verdict(s)
        cell["seeds"][str(c.seed)] = entry
    return {"matrix": name, "cells": cells, "errors": errors}


def format_grid(report: dict) -> str:
    lines = [f"grid: {report['matrix']}"]
    for key, cell in report["cells"].items():
        for seed, e in sorted(cell["seeds"].items(), key=lambda kv: int(kv[0])):
            if "error" in e:
                lines.append(f"{key:<32} seed {seed}: ERROR {e['error']}")
                continue
            pk = e["peak_weight"]
            bits = [f"peak {pk['max_abs']:.3f} ({pk['role'][:2]}{pk['layer']})"]
            if "forward_prediction" in e:
                fp = e["forward_prediction"]
                bits.append("predB " + ("ok" if fp["selective"] else "no"))
                bits.append("regen " + e["regeneration"]["outcome"])
                bits.append("unlearn " + ("yes" if e["clean_unlearning"] else "no"))
            if "conditioning" in e:
                bits.append("cond " + e["conditioning"]["outcome"])
            lines.append(f"{key:<32} seed {seed}: " + ", ".join(bits))
    return "\n".join(lines)
