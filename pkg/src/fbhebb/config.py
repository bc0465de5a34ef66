"""Run configuration: an INI-style text file (``[run]`` / ``[rule]`` sections) plus flag overrides."""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .core import Architecture, Injection
from .plasticity import FeedbackTarget, Granularity, RuleParams, RuleVariant
from .protocols import Regime

OUT_ENV = "FBHEBB_OUT"
DEFAULT_OUT = "runs"

SNAPSHOT_MODES = ("none", "phases", "all")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    arch: Architecture = Architecture.FF2_FB2
    variant: RuleVariant = RuleVariant.FULL
    regime: Regime = Regime.SEQUENTIAL
    epochs: int = 10  # per phase
    injection: Injection = Injection.INPUT
    granularity: Granularity = Granularity.SAMPLE
    feedback_target: FeedbackTarget = FeedbackTarget.DRIVE
    snapshots: str = "phases"
    input_noise: float = 0.0
    lr: float = 0.001
    beta: float = 1.0
    alpha: float = 0.01

    def __post_init__(self) -> None:
        coerce = {
            "arch": Architecture,
            "variant": RuleVariant,
            "regime": Regime,
            "injection": Injection,
            "granularity": Granularity,
            "feedback_target": FeedbackTarget,
        }
        for name, kind in coerce.items():
            value = getattr(self, name)
            try:
                object.__setattr__(self, name, kind(value))
            except ValueError:
                choices = ", ".join(k.value for k in kind)
                raise ConfigError(f"{name}: {value!r} is not one of {choices}") from None
        for name, kind in (("seed", int), ("epochs", int), ("input_noise", float),
                           ("lr", float), ("beta", float), ("alpha", float)):
            try:
                object.__setattr__(self, name, kind(getattr(self, name)))
            except (TypeError, ValueError):
                raise ConfigError(f"{name}: expected {kind.__name__}, got {getattr(self, name)!r}") from None
        if self.epochs < 0:
            raise ConfigError(f"epochs: must be >= 0, got {self.epochs}")
        if self.snapshots not in SNAPSHOT_MODES:
            raise ConfigError(f"snapshots: {self.snapshots!r} is not one of {', '.join(SNAPSHOT_MODES)}")
        if self.input_noise < 0:
            raise ConfigError("input_noise: must be >= 0")
        try:
            self.params
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def params(self) -> RuleParams:
        return RuleParams(lr=self.lr, beta=self.beta, alpha=self.alpha)

    @property
    def run_name(self) -> str:
        return f"{self.arch.value}_{self.variant.value}_{self.regime.value}_s{self.seed}"

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        return {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(self).items()}

    def dumps(self) -> str:
        d = self.to_dict()
        cp = configparser.ConfigParser()
        cp["run"] = {k: str(d[k]) for k in d if k not in _RULE_KEYS}
        cp["rule"] = {k: repr(d[k]) for k in _RULE_KEYS}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from None
        values: Dict[str, Any] = {}
        for section in cp.sections():
            if section not in ("run", "rule"):
                raise ConfigError(f"unknown section [{section}]")
            values.update(cp[section])
        return cls().with_overrides(**values)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.loads(Path(path).read_text())


_RULE_KEYS = ("lr", "beta", "alpha")


def load_or_default(path: Optional[Union[str, Path]]) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()
