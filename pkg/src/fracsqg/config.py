"""Experiment configuration: strict YAML loading, dotted-key overrides, round-tripping."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

import yaml

from .bounds import UniversalConstants
from .solver import SolverConfig


class ConfigError(ValueError):
    """Parse or validation failure; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Mode:
    k: tuple[int, int]
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class InitialDatumSpec:
    """``modes``: sum of a cos(2 pi k.x + phase); ``random_spectrum``: |c(k)| ~ |k|^-slope."""

    kind: str = "modes"
    modes: tuple[Mode, ...] = (Mode((1, 0), 1.0, 0.0),)
    slope: float = 4.0
    k_max: int = 8
    seed: Optional[int] = None
    # Overall factor: scales the mode sum, or sets ||theta0||_L2 for random_spectrum.
    amplitude: float = 1.0


@dataclass(frozen=True)
class ProbeConfig:
    alpha: float = 0.5
    xi_schedule: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/default"
    cadence_steps: Optional[int] = None
    cadence_dt: Optional[float] = 0.05
    snapshots: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    datum: InitialDatumSpec = field(default_factory=InitialDatumSpec)
    probes: tuple[ProbeConfig, ...] = (ProbeConfig(),)
    theory: UniversalConstants = field(default_factory=UniversalConstants)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def violations(self) -> list[str]:
        out = list(self.solver.violations())
        d = self.datum
        if d.kind not in ("modes", "random_spectrum"):
            out.append(f"datum.kind must be 'modes' or 'random_spectrum', got {d.kind!r}")
        if d.kind == "modes":
            for i, m in enumerate(d.modes):
                if tuple(m.k) == (0, 0):
                    out.append(f"datum.modes[{i}]: k = (0, 0) would break zero mean")
                if max(abs(m.k[0]), abs(m.k[1])) * 2 >= self.solver.n:
                    out.append(f"datum.modes[{i}]: k={tuple(m.k)} not below Nyquist")
        if d.kind == "random_spectrum" and d.k_max < 1:
            out.append("datum.k_max must be >= 1")
        if not math.isfinite(d.amplitude):
            out.append("datum.amplitude must be finite")
        for i, p in enumerate(self.probes):
            if not 0 < p.alpha < 1:
                out.append(f"probes[{i}].alpha {p.alpha} out of (0, 1)")
        o = self.output
        if o.cadence_steps is None and o.cadence_dt is None:
            out.append("output needs cadence_steps or cadence_dt")
        if o.cadence_steps is not None and o.cadence_steps <= 0:
            out.append("output.cadence_steps must be > 0")
        if o.cadence_dt is not None and o.cadence_dt <= 0:
            out.append("output.cadence_dt must be > 0")
        if not 0 <= self.seed < 2**64:
            out.append("seed must be a 64-bit unsigned integer")
        return out

    def validate(self) -> "ExperimentConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self


def to_plain(obj: Any) -> Any:
    """Dataclass tree to plain dicts/lists (tuples become lists)."""
    if is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def _build(tp, data, path: str, problems: list[str]):
    origin = get_origin(tp)
    if is_dataclass(tp):
        if not isinstance(data, dict):
            problems.append(f"{path or '<root>'}: expected a mapping")
            return None
        hints = get_type_hints(tp)
        names = {f.name for f in fields(tp)}
        for key in data:
            if key not in names:
                problems.append(f"{path + '.' if path else ''}{key}: unknown key")
        kwargs = {}
        for f in fields(tp):
            if f.name in data:
                kwargs[f.name] = _build(hints[f.name], data[f.name],
                                        f"{path + '.' if path else ''}{f.name}", problems)
        try:
            return tp(**kwargs)
        except (TypeError, ValueError) as exc:
            problems.append(f"{path or '<root>'}: {exc}")
            return None
    if origin is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        if data is None:
            return None
        return _build(args[0], data, path, problems)
    if origin is tuple:
        args = get_args(tp)
        if not isinstance(data, (list, tuple)):
            problems.append(f"{path}: expected a list")
            return None
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_build(args[0], v, f"{path}[{i}]", problems) for i, v in enumerate(data))
        if len(data) != len(args):
            problems.append(f"{path}: expected {len(args)} entries")
            return None
        return tuple(_build(a, v, f"{path}[{i}]", problems) for i, (a, v) in enumerate(zip(args, data)))
    if tp is bool:
        if not isinstance(data, bool):
            problems.append(f"{path}: expected true/false, got {data!r}")
        return data
    if tp is int:
        if isinstance(data, bool) or not isinstance(data, int):
            problems.append(f"{path}: expected an integer, got {data!r}")
        return data
    if tp is float:
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            problems.append(f"{path}: expected a number, got {data!r}")
            return data
        return float(data)
    if tp is str:
        if not isinstance(data, str):
            problems.append(f"{path}: expected a string, got {data!r}")
        return data
    return data


def from_dict(data: dict) -> ExperimentConfig:
    problems: list[str] = []
    cfg = _build(ExperimentConfig, data or {}, "", problems)
    if cfg is not None and not problems:
        problems.extend(cfg.violations())
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Parse and validate a YAML config; unknown keys are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError([f"{path}: YAML parse error{where}: {exc}"]) from exc
    return from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_plain(cfg), sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(to_plain(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _parse_value(text: str):
    return yaml.safe_load(text)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``dotted.key=value`` overrides; every key must already exist."""
    data = to_plain(cfg)
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not KEY=VALUE")
            continue
        key, value = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        ok = True
        for p in parts[:-1]:
            if isinstance(node, list) and p.isdigit() and int(p) < len(node):
                node = node[int(p)]
            elif isinstance(node, dict) and p in node:
                node = node[p]
            else:
                ok = False
                break
        last = parts[-1]
        if ok and isinstance(node, dict) and last in node:
            node[last] = _parse_value(value)
        elif ok and isinstance(node, list) and last.isdigit() and int(last) < len(node):
            node[int(last)] = _parse_value(value)
        else:
            problems.append(f"override key {key!r} does not exist")
    if problems:
        raise ConfigError(problems)
    return from_dict(data)


def replace_in(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Programmatic single-key replacement (used by sweeps)."""
    head, _, rest = dotted.partition(".")
    if not rest:
        return dataclasses.replace(cfg, **{head: value})
    return dataclasses.replace(cfg, **{head: replace_in(getattr(cfg, head), rest, value)})
