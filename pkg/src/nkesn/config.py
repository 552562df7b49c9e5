"""Experiment configuration and its INI-style file format.

A config file has up to three sections; every key is optional and defaults to
the N=20 double-pole baseline::

    [network]
    n_outputs = 20
    k = 3
    neighborhood = adjacent

    [physics]
    mu_cart = 0.0005

    [experiment]
    runs = 100
    solver = dp
    top_m = 20
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dynamics import PhysicsParams
from .landscape import MAX_EXHAUSTIVE_N, SolverKind
from .network import NetworkConfig, Neighborhood

OUTPUT_DIR_ENV = "NKESN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    t_max: int = 1000
    steps_per_action: int = 1
    runs: int = 100
    solver: SolverKind = SolverKind.DP
    top_m: int | None = None
    ls_restarts: int = 50
    base_seed: int = 0
    output_dir: str = "results"
    save_artifacts: bool = False
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "solver", SolverKind(self.solver))
        if self.t_max < 1:
            raise ConfigError("experiment.t_max must be >= 1")
        if self.steps_per_action < 1:
            raise ConfigError("experiment.steps_per_action must be >= 1")
        if self.runs < 1:
            raise ConfigError("experiment.runs must be >= 1")
        if self.ls_restarts < 1:
            raise ConfigError("experiment.ls_restarts must be >= 1")
        if self.jobs < 1:
            raise ConfigError("experiment.jobs must be >= 1")
        n = self.network.n_outputs
        if self.top_m is not None and not 1 <= self.top_m <= n:
            raise ConfigError(f"experiment.top_m must lie in [1, {n}], got {self.top_m}")
        if self.solver is SolverKind.DP and self.network.neighborhood is not Neighborhood.ADJACENT:
            raise ConfigError("experiment.solver: dp requires network.neighborhood = adjacent "
                              f"(got {self.network.neighborhood.value})")
        if self.solver is SolverKind.EXHAUSTIVE and n > MAX_EXHAUSTIVE_N:
            raise ConfigError(f"experiment.solver: exhaustive refused for N={n} > "
                              f"{MAX_EXHAUSTIVE_N}; use local_search")

    def identity(self) -> dict:
        """Everything that influences results (excludes output_dir and jobs)."""
        d = {
            "network": self.network.to_dict(),
            "physics": self.physics.to_dict(),
            "t_max": self.t_max,
            "steps_per_action": self.steps_per_action,
            "runs": self.runs,
            "solver": self.solver.value,
            "top_m": self.top_m,
            "ls_restarts": self.ls_restarts,
            "base_seed": self.base_seed,
        }
        d["network"].pop("seed")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_EXPERIMENT_KEYS = {f.name: f for f in fields(ExperimentConfig) if f.name not in ("network", "physics")}


def _convert(section: str, key: str, raw: str, target):
    name = f"{section}.{key}"
    text = raw.strip()
    try:
        if target in ("int", int):
            return int(text)
        if target in ("float", float):
            return float(text)
        if target in ("bool", bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if target in ("int | None",):
            return None if text.lower() in ("", "none") else int(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {target}") from None
    return text


def _section(parser, section: str, allowed: dict) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in allowed:
            raise ConfigError(f"{section}.{key}: unknown field")
        out[key] = _convert(section, key, raw, allowed[key].type)
    return out


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in ("network", "physics", "experiment"):
            raise ConfigError(f"[{section}]: unknown section")

    net_fields = {f.name: f for f in fields(NetworkConfig)}
    phys_fields = {f.name: f for f in fields(PhysicsParams)}
    net_kw = _section(parser, "network", net_fields)
    phys_kw = _section(parser, "physics", phys_fields)
    exp_kw = _section(parser, "experiment", _EXPERIMENT_KEYS)
    if "seed" in net_kw:
        raise ConfigError("network.seed: set experiment.base_seed instead")
    if "output_dir" not in exp_kw and os.environ.get(OUTPUT_DIR_ENV):
        exp_kw["output_dir"] = os.environ[OUTPUT_DIR_ENV]

    try:
        network = NetworkConfig(**net_kw)
    except ValueError as exc:
        raise ConfigError(f"network: {exc}") from None
    try:
        physics = PhysicsParams(**phys_kw)
    except ValueError as exc:
        raise ConfigError(f"physics: {exc}") from None
    try:
        return ExperimentConfig(network=network, physics=physics, **exp_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def config_from_identity(doc: dict, **overrides) -> ExperimentConfig:
    """Rebuild a config from the ``identity()`` dict embedded in result records."""
    doc = json.loads(json.dumps(doc))
    network = NetworkConfig(**doc.pop("network"))
    physics = PhysicsParams(**doc.pop("physics"))
    return dataclasses.replace(ExperimentConfig(network=network, physics=physics, **doc),
                               **overrides)
