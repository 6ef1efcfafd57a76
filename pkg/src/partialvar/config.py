"""Run configuration read from a YAML file.

Every key is optional; the defaults reproduce the benchmark parameter block
(r = 3%, T = 10, x0 = 100, gamma = 3, beta = 5%, L = 120, three equally likely
market prices of risk 0.15 / 0.25 / 0.35).  Probabilities may be written as
fractions such as ``1/3``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, PartialVarError
from .filter import Prior
from .market import BeliefMeasure, MarketParams
from .solver import ConstraintSpec
from .utility import Utility

DEFAULTS: dict[str, Any] = {
    "market": {"r": 0.03, "sigma": 0.2, "T": 10.0, "x0": 100.0},
    "prior": {"values": [0.15, 0.25, 0.35], "probs": ["1/3", "1/3", "1/3"]},
    "utility": {"kind": "power", "gamma": 3.0},
    "constraint": {"kind": "var", "beta": 0.05},
    "L": 120.0,
    "output_dir": "out",
    "seed": 0,
    "paths": 1_000_000,
    "grid": {"xi_min": 0.05, "xi_max": 4.0, "n": 400},
    "strategy_grid": {"t": [0.0, 2.5, 5.0, 7.5, 9.5], "y": {"min": -10.0, "max": 15.0, "n": 51}},
    "replication": {"paths": 2000, "steps": [100, 200, 400]},
    "scenarios": [],
}

_TOP_KEYS = set(DEFAULTS)


def _num(x: Any, what: str) -> float:
    try:
        if isinstance(x, str):
            return float(Fraction(x.strip()))
        return float(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: cannot read {x!r} as a number") from exc


def _nums(xs: Any, what: str) -> list[float]:
    if not isinstance(xs, (list, tuple)):
        raise ConfigError(f"{what}: expected a list, got {xs!r}")
    return [_num(x, what) for x in xs]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class Scenario:
    name: str
    utility: Utility
    constraint: ConstraintSpec


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> RunConfig:
        data: dict = {}
        if path is not None:
            try:
                data = yaml.safe_load(Path(path).read_text()) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, **overrides)

    @classmethod
    def from_dict(cls, data: dict, **overrides: Any) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        raw = _merge(DEFAULTS, data)
        # an explicit constraint replaces the default wholesale
        if "constraint" in data:
            raw["constraint"] = copy.deepcopy(data["constraint"])
        raw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Build every object once so that bad input fails before any computation."""
        try:
            prior = self.prior
            self.params
            self.L
            for sc in self.scenarios():
                for b in sc.constraint.beliefs:
                    b.check_support(prior)
            g = self.raw["grid"]
            if not (0 < _num(g["xi_min"], "grid") < _num(g["xi_max"], "grid")) or int(g["n"]) < 2:
                raise ConfigError(f"bad xi grid {g}")
            if int(self.raw["paths"]) < 1:
                raise ConfigError("paths must be >= 1")
        except ConfigError:
            raise
        except (PartialVarError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @property
    def prior(self) -> Prior:
        p = self.raw["prior"]
        return Prior(_nums(p["values"], "prior.values"), _nums(p["probs"], "prior.probs"))

    @property
    def params(self) -> MarketParams:
        m = self.raw["market"]
        return MarketParams(**{k: _num(m[k], f"market.{k}") for k in ("r", "sigma", "T", "x0")})

    @property
    def L(self) -> float:
        L = _num(self.raw["L"], "L")
        if not L > 0:
            raise ConfigError("L must be > 0")
        return L

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def paths(self) -> int:
        return int(self.raw["paths"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def xi_grid(self) -> tuple[float, float, int]:
        g = self.raw["grid"]
        return _num(g["xi_min"], "grid"), _num(g["xi_max"], "grid"), int(g["n"])

    def utility_from(self, spec: dict) -> Utility:
        kind = spec.get("kind", "power")
        if kind == "log":
            return Utility.log()
        return Utility.power(_num(spec.get("gamma", 3.0), "utility.gamma"))

    @property
    def utility(self) -> Utility:
        return self.utility_from(self.raw["utility"])

    def constraint_from(self, spec: dict) -> ConstraintSpec:
        prior = self.prior
        kind = spec.get("kind", "var")
        if kind == "unconstrained":
            return ConstraintSpec.unconstrained()
        if kind == "insurance":
            return ConstraintSpec.insurance()
        beta = _num(spec.get("beta", 0.05), "constraint.beta")
        raw_beliefs = spec.get("beliefs") or [prior.probs]
        beliefs = [BeliefMeasure(prior.values, _nums(b, "constraint.beliefs")) for b in raw_beliefs]
        if kind == "var":
            if beta == 1.0:
                return ConstraintSpec.unconstrained()
            if beta == 0.0:
                return ConstraintSpec.insurance()
            return ConstraintSpec.var(beliefs[0], beta)
        if kind == "robust_min":
            return ConstraintSpec.robust_min(beliefs, beta)
        if kind == "weighted":
            return ConstraintSpec.weighted(_nums(spec.get("alphas", []), "constraint.alphas"), beliefs, beta)
        raise ConfigError(f"unknown constraint kind {kind!r}")

    @property
    def constraint(self) -> ConstraintSpec:
        return self.constraint_from(self.raw["constraint"])

    def scenarios(self) -> list[Scenario]:
        """Configured scenarios; the base (utility, constraint) when none are listed."""
        items = self.raw.get("scenarios") or []
        if not items:
            return [Scenario("base", self.utility, self.constraint)]
        out = []
        for i, sc in enumerate(items):
            u = dict(self.raw["utility"])
            if "gamma" in sc:
                u = {"kind": "power", "gamma": sc["gamma"]}
            u.update(sc.get("utility", {}))
            c = sc.get("constraint", self.raw["constraint"])
            out.append(Scenario(str(sc.get("name", f"scenario{i}")), self.utility_from(u), self.constraint_from(c)))
        return out
