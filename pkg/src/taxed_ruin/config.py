"""JSON run configuration shared by the command-line tools.

A config has five sections::

    {
      "model":  {"variant": "CramerLundberg", "drift": 1.5, "jump_rate": 1.0, "claims": [[1.0, 1.0]]},
      "tax":    {"x": 2.0, "pieces": [[0.0, 0.2], [3.0, 0.5]]},
      "query":  {"functional": "exit", "q": 0.05, "x": 2.0, "a": {"start": 3, "stop": 8, "num": 6}},
      "sim":    {"n_paths": 100000, "rng_seed": 7},
      "output": {"csv": "exit.csv"}
    }

Grid-valued query fields accept a number, a list of numbers or a
``{"start", "stop", "num"}`` linspace.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .errors import ConfigError, TaxedRuinError
from .levy import LevyModel
from .montecarlo import SimConfig
from .tax import TaxRule

FUNCTIONALS = ("exit", "npv", "gs_density", "gs_creep", "gs_mass", "ruin", "scale")
GRID_FIELDS = ("q", "a", "alpha", "beta", "theta", "y", "z", "grid_x")


def expand_grid(raw, path: str) -> np.ndarray:
    """Values of a grid field as a 1-d float array."""
    if isinstance(raw, bool):
        raise ConfigError(f"{path}: expected a number, list or linspace")
    if isinstance(raw, (int, float)):
        return np.array([float(raw)])
    if isinstance(raw, list):
        try:
            return np.array([float(v) for v in raw])
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: list entries must be numbers") from None
    if isinstance(raw, dict):
        try:
            num = int(raw["num"])
            out = np.linspace(float(raw["start"]), float(raw["stop"]), num)
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{path}: linspace needs numeric start, stop and num") from None
        if num < 1:
            raise ConfigError(f"{path}.num: must be >= 1")
        return out
    raise ConfigError(f"{path}: expected a number, list or linspace")


@dataclass(frozen=True)
class Query:
    functional: str = "exit"
    x: float | None = None
    q: Any = 0.0
    a: Any = None
    alpha: Any = None
    beta: Any = None
    theta: Any = None
    y: Any = None
    z: Any = None
    grid_x: Any = None
    # box for gs_mass: [lo, hi] pairs, null for unbounded
    theta_range: list | None = None
    y_range: list | None = None
    z_range: list | None = None
    creep: bool = False
    scale_method: str = "closed_form"

    def grid(self, name: str) -> np.ndarray:
        return expand_grid(getattr(self, name), f"query.{name}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}


@dataclass(frozen=True)
class Output:
    csv: str | None = None
    report: str | None = None
    paths: str | None = None
    tolerance: float = 1e-9
    scenarios: str = "default"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}


@dataclass(frozen=True)
class RunConfig:
    model: LevyModel | None = None
    tax: TaxRule | None = None
    query: Query = field(default_factory=Query)
    sim: SimConfig = field(default_factory=SimConfig)
    output: Output = field(default_factory=Output)

    def to_dict(self) -> dict:
        out = {"query": self.query.to_dict(), "sim": self.sim.to_dict(),
               "output": self.output.to_dict()}
        if self.model is not None:
            out["model"] = self.model.to_dict()
        if self.tax is not None:
            out["tax"] = self.tax.to_dict()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>: expected a JSON object")
        unknown = set(d) - {"model", "tax", "query", "sim", "output"}
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
        model = _section(LevyModel.from_dict, d["model"], "model") if "model" in d else None
        tax = _section(TaxRule.from_dict, d["tax"], "tax") if "tax" in d else None
        query = _section(lambda s: _from_fields(Query, s, "query"), d.get("query", {}), "query")
        sim = _section(lambda s: _from_fields(SimConfig, s, "sim"), d.get("sim", {}), "sim")
        output = _section(lambda s: _from_fields(Output, s, "output"), d.get("output", {}), "output")
        cfg = cls(model, tax, query, sim, output)
        cfg.validate()
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<root>: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"<file>: cannot read {path} ({exc.strerror})") from None
        return cls.loads(text)

    def validate(self) -> None:
        q = self.query
        if q.functional not in FUNCTIONALS:
            raise ConfigError(f"query.functional: must be one of {', '.join(FUNCTIONALS)}")
        if not self.output.tolerance > 0:
            raise ConfigError("output.tolerance: must be > 0")
        if q.x is not None and self.tax is not None and abs(q.x - self.tax.x) > 1e-12 * max(1.0, q.x):
            raise ConfigError("query.x: must equal tax.x")
        for name in GRID_FIELDS:
            if getattr(q, name) is not None:
                q.grid(name)

    def require_query(self) -> None:
        """Check that the sections needed by ``query.functional`` are present."""
        q = self.query
        if self.model is None:
            raise ConfigError("model: section is required")
        if q.functional != "scale" and self.tax is None:
            raise ConfigError("tax: section is required for this functional")
        needs = {"exit": ("q", "a"), "npv": ("q",), "gs_density": ("alpha", "beta", "theta", "y", "z"),
                 "gs_creep": ("alpha", "beta", "theta"), "gs_mass": ("alpha", "beta"),
                 "ruin": ("q",), "scale": ("q", "grid_x")}[q.functional]
        for name in needs:
            if getattr(q, name) is None:
                raise ConfigError(f"query.{name}: required for functional {q.functional!r}")

    @property
    def x(self) -> float:
        return self.query.x if self.query.x is not None else self.tax.x


def _section(build, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    try:
        return build(data)
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}: missing field") from None
    except (TaxedRuinError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _from_fields(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    for k in data:
        if k not in known:
            raise ConfigError(f"{path}.{k}: unknown field")
    return cls(**data)
