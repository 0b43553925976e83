"""Flat dotted-key experiment configuration.

Config files are plain text, one `key = value` per line, `#` comments, with
section prefixes spelled into the key (target.*, sampler.*, chain.*, study.*,
acf.*, output.*).  Unknown keys and out-of-range values are hard errors;
syntax problems report the offending line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .conditional import InterpScheme
from .errors import GriddyError

__all__ = [
    "ConfigParseError",
    "ConfigValidationError",
    "ExperimentConfig",
    "REGISTRY",
    "parse_config_text",
    "resolve_config",
    "load_config_file",
]


class ConfigParseError(GriddyError):
    """Config text that does not scan as `key = value` lines."""

    exit_code = 2


class ConfigValidationError(GriddyError):
    """Structurally valid config with an unknown key or bad field value."""

    exit_code = 3


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_float(raw: str) -> float:
    value = float(raw)
    if np.isnan(value):
        raise ValueError("nan is not a number here")
    return value


def _parse_str(raw: str) -> str:
    return raw


def _parse_int_list(raw: str) -> tuple[int, ...]:
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p, 10) for p in parts)


def _check_scheme(value: str) -> Optional[str]:
    try:
        InterpScheme.parse(value)
    except GriddyError as exc:
        return str(exc)
    return None


@dataclass(frozen=True)
class Field:
    key: str
    parse: Callable
    default: object
    help: str
    choices: Optional[tuple] = None
    minimum: Optional[float] = None
    check: Optional[Callable[[object], Optional[str]]] = None

    def resolve(self, raw: Optional[str]):
        if raw is None:
            return self.default
        try:
            value = self.parse(raw)
        except ValueError as exc:
            raise ConfigValidationError(
                f"field '{self.key}': cannot parse {raw!r} ({exc})"
            ) from None
        if self.choices is not None and value not in self.choices:
            opts = ", ".join(str(c) for c in self.choices)
            raise ConfigValidationError(
                f"field '{self.key}': {value!r} is not one of {{{opts}}}"
            )
        if self.minimum is not None:
            floor = min(value) if isinstance(value, tuple) else value
            if floor < self.minimum:
                raise ConfigValidationError(
                    f"field '{self.key}': value {value} is below the minimum {self.minimum}"
                )
        if self.check is not None:
            problem = self.check(value)
            if problem:
                raise ConfigValidationError(f"field '{self.key}': {problem}")
        return value


_FIELDS = [
    Field("target.name", _parse_str, "beta_mixture",
          "target density to sample", choices=("beta_mixture",)),
    Field("sampler.kind", _parse_str, "griddy",
          "chain kind", choices=("gibbs", "griddy", "metropolized")),
    Field("sampler.grid_n", _parse_int, 11,
          "conditional grid points per axis", minimum=2),
    Field("sampler.scheme", _parse_str, "pl",
          "conditional interpolation: pc, pl, or poly:k", check=_check_scheme),
    Field("sampler.clamp_eps_rel", _parse_float, 1e-8,
          "clamp floor relative to the per-update raw maximum", minimum=0.0,
          check=lambda v: "must be positive" if v <= 0 else None),
    Field("sampler.clamp_m_rel", _parse_float, 10.0,
          "clamp cap relative to the per-update raw maximum", minimum=0.0,
          check=lambda v: "must be positive" if v <= 0 else None),
    Field("chain.n_steps", _parse_int, 1000, "full coordinate sweeps", minimum=1),
    Field("chain.burn_in", _parse_int, None,
          "discarded leading sweeps (default: n_steps / 10)", minimum=0),
    Field("chain.seed", _parse_int, 0, "stream seed", minimum=0),
    Field("study.grid_sizes", _parse_int_list, (6, 11, 21, 41, 81),
          "comma-separated grid sizes for the convergence study", minimum=2),
    Field("study.replicates", _parse_int, 1, "chains averaged per study point",
          minimum=1),
    Field("study.norm_p", _parse_float, 2.0,
          "norm index for kernel reports", choices=(2.0, 4.0, float("inf"))),
    Field("study.state_grid", _parse_int, 16,
          "kernel-lab cells per axis", minimum=2),
    Field("acf.coordinate", _parse_int, 0, "chain coordinate to analyze",
          minimum=0),
    Field("acf.max_lag", _parse_int, None,
          "largest autocorrelation lag (default: min(n/10 - 1, 1000))", minimum=1),
    Field("output.dir", _parse_str, "runs", "directory for run artifacts"),
]

REGISTRY: dict[str, Field] = {f.key: f for f in _FIELDS}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved, validated configuration values keyed by dotted name."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def updated(self, **overrides) -> "ExperimentConfig":
        merged = dict(self.values)
        for key, value in overrides.items():
            if key not in REGISTRY:
                raise ConfigValidationError(f"unknown config key '{key}'")
            merged[key] = value
        cfg = ExperimentConfig(merged)
        _cross_validate(cfg)
        return cfg

    def as_dict(self) -> dict:
        out = {}
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, float) and np.isinf(value):
                value = "inf"
            elif isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Scan config text into a raw key -> string map, checking syntax only."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, eq, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not eq or not key:
            raise ConfigParseError(
                f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}"
            )
        if key in raw:
            raise ConfigParseError(f"{source}:{lineno}: duplicate key '{key}'")
        raw[key] = value
    return raw


def _cross_validate(cfg: ExperimentConfig) -> None:
    burn_in = cfg["chain.burn_in"]
    if burn_in is not None and burn_in >= cfg["chain.n_steps"]:
        raise ConfigValidationError(
            f"field 'chain.burn_in': burn-in {burn_in} must be below "
            f"chain.n_steps = {cfg['chain.n_steps']}"
        )
    if cfg["sampler.clamp_eps_rel"] >= cfg["sampler.clamp_m_rel"]:
        raise ConfigValidationError(
            "field 'sampler.clamp_eps_rel': clamp floor must stay below the cap"
        )


def resolve_config(raw: dict[str, str]) -> ExperimentConfig:
    """Validate a raw key -> string map against the registry, fill defaults."""
    for key in raw:
        if key not in REGISTRY:
            raise ConfigValidationError(f"unknown config key '{key}'")
    values = {key: spec.resolve(raw.get(key)) for key, spec in REGISTRY.items()}
    cfg = ExperimentConfig(values)
    _cross_validate(cfg)
    return cfg


def load_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=path)
