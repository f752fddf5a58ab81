"""Run configuration: JSON schema validation with unknown-key rejection."""
from __future__ import annotations

import importlib.resources as resources
import json
from dataclasses import dataclass, field

from .lattice import LatticeSpec

SCHEMA_RESOURCE = "runconfig.schema.json"


def load_schema() -> dict:
    with resources.files("hubvqe").joinpath(SCHEMA_RESOURCE).open() as fh:
        return json.load(fh)


class ConfigError(ValueError):
    pass


def _validate(node, schema, path="config"):
    kind = schema.get("type")
    if kind == "object":
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: expected an object")
        allowed = schema.get("properties", {})
        unknown = set(node) - set(allowed)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        for key, sub in allowed.items():
            if key in node:
                _validate(node[key], sub, f"{path}.{key}")
        for key in schema.get("required", []):
            if key not in node:
                raise ConfigError(f"{path}: missing required key {key!r}")
    elif kind == "number":
        if not isinstance(node, (int, float)) or isinstance(node, bool):
            raise ConfigError(f"{path}: expected a number")
        if "minimum" in schema and node < schema["minimum"]:
            raise ConfigError(f"{path}: below minimum {schema['minimum']}")
        if "exclusiveMinimum" in schema and node <= schema["exclusiveMinimum"]:
            raise ConfigError(f"{path}: must exceed {schema['exclusiveMinimum']}")
    elif kind == "integer":
        if not isinstance(node, int) or isinstance(node, bool):
            raise ConfigError(f"{path}: expected an integer")
        if "minimum" in schema and node < schema["minimum"]:
            raise ConfigError(f"{path}: below minimum {schema['minimum']}")
    elif kind == "string":
        if not isinstance(node, str):
            raise ConfigError(f"{path}: expected a string")
        if "enum" in schema and node not in schema["enum"]:
            raise ConfigError(f"{path}: must be one of {schema['enum']}")
    elif kind == "boolean":
        if not isinstance(node, bool):
            raise ConfigError(f"{path}: expected a boolean")
    else:
        raise ConfigError(f"{path}: unsupported schema node")


@dataclass
class RunConfig:
    """Validated run options shared by the CLI subcommands."""

    lattice: LatticeSpec
    n_blk: int
    gate_set: str = "silicon"
    ordering: str = "horizontal"
    prep_scheme: str = "simple"
    mu: float = 2.0
    lam: float = 2.0
    seed: int = 0
    shots: int = 2000
    n_qpu: int = 200
    n_iter: int = 100
    step_size: float = 0.05
    threshold: float = 1e-6
    max_iter: int = 500
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        _validate(cfg, load_schema())
        lattice = LatticeSpec.from_config(cfg.get("lattice", {"rows": 1, "cols": 2}))
        v = lattice.n_sites
        mit = cfg.get("mitigation", {})
        budget = cfg.get("budget", {})
        opt = cfg.get("optimizer", {})
        return cls(
            lattice=lattice,
            n_blk=cfg.get("n_blk", v),
            gate_set=cfg.get("gate_set", "silicon"),
            ordering=cfg.get("ordering", "horizontal"),
            prep_scheme=cfg.get("prep_scheme", "simple"),
            mu=mit.get("mu", 2.0),
            lam=mit.get("lam", 2.0),
            seed=cfg.get("seed", 0),
            shots=cfg.get("shots", 2000),
            n_qpu=budget.get("n_qpu", 200),
            n_iter=budget.get("n_iter", 100),
            step_size=opt.get("step_size", 0.05),
            threshold=opt.get("threshold", 1e-6),
            max_iter=opt.get("max_iter", 500),
            raw=cfg,
        )

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
