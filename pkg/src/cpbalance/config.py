"""Experiment configuration: strict JSON validated against a schema.

Every section is optional; omitted values fall back to the running example
(omega = 3.2 1/s, k = 2 on the capture-point line, 1 cm error spans).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from .core_model import SystemParams
from .errors import ConfigError, CpBalanceError
from .gain_design import UncertaintyBudget
from .intervals import Interval
from .simulator import DISTURBANCE_KINDS, FootstepPlan
from .stability import Gains

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, **extra) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **extra}


SCHEMA = _obj({
    "system": _obj({
        "omega": _pos,
        "tau": _nonneg,
        "tau_grid": {"oneOf": [
            {"type": "array", "items": _pos, "minItems": 1},
            _obj({"start": _pos, "stop": _pos, "step": _pos}, required=["start", "stop", "step"]),
        ]},
        "base_tick": _pos,
    }),
    "gains": _obj({
        "k": {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]},
        "lambda": {"oneOf": [_num, {"const": "cp-line"}]},
    }),
    "budget": _obj({"xi_hat_span": _nonneg, "n_hat_span": _nonneg}),
    "sets": _obj({
        "support_polygon": _interval,
        "n_set": _interval,
        "w": {"oneOf": [_interval, {"type": "null"}]},
        "p_ref_range": _interval,
    }),
    "simulation": _obj({
        "plan": {"oneOf": [
            {"const": "default"},
            {"const": "standing"},
            _obj({
                "axis": {"enum": ["lateral", "sagittal"]},
                "steps": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            }, required=["steps"]),
        ]},
        "disturbance": _obj({
            "kind": {"enum": list(DISTURBANCE_KINDS)},
            "freq": _pos,
            "level": {"type": "number", "minimum": -1, "maximum": 1},
            "horizon": {"type": "integer", "minimum": 1},
        }),
        "taus": {"type": "array", "items": _pos, "minItems": 1},
        "trials": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "divergence_limit": _pos,
    }),
    "region": _obj({"resolution": {"type": "integer", "minimum": 2}}),
    "verify": _obj({
        "checks": {"type": "array", "items": {"type": "string"}},
        "samples": {"type": "integer", "minimum": 1},
    }),
    "output": _obj({"dir": {"type": "string"}, "format": {"enum": ["csv", "svg", "both"]}}),
})

DEFAULTS: dict[str, Any] = {
    "system": {"omega": 3.2, "tau": 0.1, "tau_grid": {"start": 0.01, "stop": 0.34, "step": 0.001},
               "base_tick": 0.001},
    "gains": {"k": 2.0, "lambda": "cp-line"},
    "budget": {"xi_hat_span": 0.01, "n_hat_span": 0.01},
    "sets": {"support_polygon": [-0.045, 0.045], "n_set": [0.0, 0.0], "w": None, "p_ref_range": [0.0, 0.0]},
    "simulation": {"plan": "default", "disturbance": {"kind": "worst_case_sign", "freq": 0.5, "level": 1.0},
                   "taus": [0.051, 0.12, 0.216, 0.232], "trials": 3, "seed": 0, "divergence_limit": 1.0},
    "region": {"resolution": 400},
    "verify": {"checks": [], "samples": 500},
    "output": {"dir": "out", "format": "both"},
}


# values that are replaced wholesale instead of merged key by key
_ATOMIC_KEYS = {"plan", "tau_grid"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key not in _ATOMIC_KEYS:
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate(raw: Any, source: str = "<config>") -> None:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{source}: field '{_path(e)}': {e.message}")


def _reject_constant(name: str):
    raise ValueError(f"{name} is not valid JSON")


def load_text(text: str, source: str = "<config>") -> dict:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from None
    validate(raw, source)
    return raw


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "ExperimentConfig":
        raw = {}
        if path is not None:
            p = Path(path)
            try:
                text = p.read_text()
            except OSError as e:
                raise ConfigError(f"{path}: {e.strerror}") from None
            raw = load_text(text, str(path))
        merged = _merge(DEFAULTS, raw)
        if overrides:
            merged = _merge(merged, overrides)
        validate(merged, str(path) if path else "<defaults>")
        cfg = cls(merged)
        cfg.check()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def check(self) -> None:
        """Module-level invariants that the schema cannot express."""
        try:
            self.params()
            self.budget()
            for name in ("support_polygon", "n_set", "p_ref_range"):
                self.interval(name)
            if self.data["sets"]["w"] is not None:
                self.interval("w")
            self.plan()
            self.tau_grid()
            for k in self.k_values():
                if not math.isfinite(k):
                    raise ConfigError("gains.k must be finite")
        except ConfigError:
            raise
        except CpBalanceError as e:
            raise ConfigError(f"invalid value: {e}") from None

    # accessors -------------------------------------------------------------

    @property
    def omega(self) -> float:
        return float(self.data["system"]["omega"])

    def params(self, tau: float | None = None) -> SystemParams:
        return SystemParams(self.omega, float(self.data["system"]["tau"] if tau is None else tau))

    def k_values(self) -> list[float]:
        k = self.data["gains"]["k"]
        return [float(v) for v in (k if isinstance(k, list) else [k])]

    @property
    def k(self) -> float:
        return self.k_values()[0]

    def gains(self, k: float | None = None) -> Gains:
        k = self.k if k is None else k
        lam = self.data["gains"]["lambda"]
        return Gains.cp_line(k, self.omega) if lam == "cp-line" else Gains(k, float(lam))

    @property
    def cp_line(self) -> bool:
        return self.data["gains"]["lambda"] == "cp-line"

    def budget(self) -> UncertaintyBudget:
        b = self.data["budget"]
        return UncertaintyBudget(float(b["xi_hat_span"]), float(b["n_hat_span"]))

    def interval(self, name: str) -> Interval:
        lo, hi = self.data["sets"][name]
        return Interval(float(lo), float(hi))

    def w(self, k: float | None = None) -> Interval:
        if self.data["sets"]["w"] is not None:
            return self.interval("w")
        return Interval.symmetric(self.budget().disturbance_span(self.k if k is None else k))

    def tau_grid(self) -> list[float]:
        g = self.data["system"]["tau_grid"]
        if isinstance(g, list):
            return [float(t) for t in g]
        n = int(math.floor((g["stop"] - g["start"]) / g["step"] + 1e-9)) + 1
        if n < 1:
            raise ConfigError("system.tau_grid: stop must be >= start")
        return [round(g["start"] + i * g["step"], 12) for i in range(n)]

    def plan(self) -> FootstepPlan:
        p = self.data["simulation"]["plan"]
        if p == "default":
            return FootstepPlan.alternating()
        if p == "standing":
            return FootstepPlan.standing(6.0)
        return FootstepPlan(tuple(tuple(s) for s in p["steps"]), p.get("axis", "lateral"))

    @property
    def base_tick(self) -> float:
        return float(self.data["system"]["base_tick"])

    @property
    def out_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    @property
    def formats(self) -> set[str]:
        f = self.data["output"]["format"]
        return {"csv", "svg"} if f == "both" else {f}
