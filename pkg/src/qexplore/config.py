"""Run configuration: TOML file, environment and command-line overrides.

Sections mirror the experiment types::

    [model]       B C D K gamma sigma kappa eta A0_mean Sigma0 T x0
    [experiment]  q lam N n_paths seed modes latent_scheme reference_steps chunk_size threads
    [qlearn]      mdp n_states n_actions zeta mdp_seed q lam tol max_iters
    [verify]      points candidates nodes q

Overrides use dotted keys (``experiment.n_paths=500``) with TOML value
syntax; environment variables ``QEXPLORE_<SECTION>__<KEY>`` behave the same.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .params import ModelParams
from .sim import ExperimentConfig

ENV_PREFIX = "QEXPLORE_"
EXECUTION_KEYS = ("threads", "chunk_size")


@dataclass(frozen=True)
class QLearnConfig:
    mdp: str = ""
    n_states: int = 5
    n_actions: int = 3
    zeta: float = 0.9
    mdp_seed: int = 0
    q: float = 2.0
    lam: float = 0.5
    tol: float = 1e-10
    max_iters: int = 10000


@dataclass(frozen=True)
class VerifyConfig:
    points: int = 50
    candidates: int = 200
    nodes: int = 2001
    q: tuple = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ExperimentSection:
    q: tuple = (2.0,)
    lam: tuple = (0.5,)
    N: tuple = (10,)
    n_paths: int = 100
    seed: int = 0
    modes: tuple = ("exploratory", "classical")
    latent_scheme: str = "euler"
    reference_steps: int = 20000
    chunk_size: int = 1000
    threads: int = 1


SECTIONS = {
    "model": ModelParams,
    "experiment": ExperimentSection,
    "qlearn": QLearnConfig,
    "verify": VerifyConfig,
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    qlearn: QLearnConfig = field(default_factory=QLearnConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def to_dict(self) -> dict:
        return {name: _jsonable(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def config_hash(self) -> str:
        """Digest of every key that can change outputs; worker layout is excluded."""
        d = self.to_dict()
        for key in EXECUTION_KEYS:
            d["experiment"].pop(key)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def experiment_config(self) -> ExperimentConfig:
        e = self.experiment
        try:
            return ExperimentConfig(self.model, e.q, e.lam, e.N, e.n_paths, e.seed, e.modes,
                                    e.latent_scheme, e.reference_steps, e.threads, e.chunk_size)
        except ValueError as exc:
            raise ConfigError(str(exc), field="experiment") from exc


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _coerce(value, default, path: str):
    """Cast ``value`` to the type of ``default``; tuples take scalars or lists."""
    try:
        if isinstance(default, tuple):
            items = value if isinstance(value, (list, tuple)) else [value]
            kind = type(default[0]) if default else str
            return tuple(_coerce(v, kind(), path) for v in items)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}", field=path)


def _build_section(name: str, raw: Mapping) -> object:
    cls = SECTIONS[name]
    if not isinstance(raw, Mapping):
        raise ConfigError(f"section [{name}] must be a table", field=name)
    defaults = cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in known:
            raise ConfigError(f"unknown key {path!r}", field=path)
        kwargs[key] = _coerce(value, getattr(defaults, key), path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}", field=name) from exc


def from_mapping(raw: Mapping) -> RunConfig:
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}", field=str(key))
    return RunConfig(**{name: _build_section(name, raw.get(name, {})) for name in SECTIONS})


def parse_value(text: str):
    """TOML scalar/array syntax, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, dotted: str, value) -> None:
    parts = dotted.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"override key must be 'section.key', got {dotted!r}", field=dotted)
    section, key = parts
    if section not in SECTIONS:
        raise ConfigError(f"unknown section {section!r}", field=dotted)
    raw.setdefault(section, {})[key] = value


def env_overrides(environ: Mapping[str, str]) -> list[tuple[str, str]]:
    out = []
    for name, text in sorted(environ.items()):
        if name.startswith(ENV_PREFIX) and "__" in name[len(ENV_PREFIX):]:
            section, key = name[len(ENV_PREFIX):].split("__", 1)
            out.append((f"{section.lower()}.{key}", text))
    return out


def read_raw(path) -> dict:
    """A TOML config or a run manifest (whose ``config`` entry is used)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="--config")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}", field="--config") from exc
        return dict(data.get("config", data))
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}", field="--config") from exc


def _env_key(dotted: str) -> str:
    # environment names are case-insensitive on the section but keys like ``N`` keep their case
    section, key = dotted.split(".", 1)
    cls = SECTIONS.get(section)
    if cls is not None:
        for f in fields(cls):
            if f.name.lower() == key.lower():
                return f"{section}.{f.name}"
    return dotted


def load(path=None, overrides=(), environ: Mapping[str, str] | None = None) -> RunConfig:
    """Resolve a config: file, then environment, then ``overrides`` (``"key=value"`` strings)."""
    raw = read_raw(path) if path else {}
    raw = {k: dict(v) if isinstance(v, Mapping) else v for k, v in raw.items()}
    env = os.environ if environ is None else environ
    for dotted, text in env_overrides(env):
        apply_override(raw, _env_key(dotted), parse_value(text))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}", field=item)
        key, text = item.split("=", 1)
        apply_override(raw, key, parse_value(text.strip()))
    return from_mapping(raw)
