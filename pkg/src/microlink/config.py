"""Run-configuration schema, defaults and (de)serialization."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .model import elicit_network_hypers, HyperParams
from .priors import ABPSpec, EPPSpec, NBDPSpec, NBNBPSpec, PriorSpec, UPSpec

__all__ = [
    "default_config",
    "table3_sweep_grid",
    "load_config",
    "save_config",
    "config_hash",
    "prior_from_config",
    "hypers_from_config",
    "validate_config",
]

_PRIOR_SCHEMAS = {
    "ABP": {
        "type": "object",
        "properties": {
            "type": {"const": "ABP"},
            "M": {"type": "integer", "minimum": 1},
            "pi": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "cv": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["type", "M", "pi", "cv"],
        "additionalProperties": False,
    },
    "EPP": {
        "type": "object",
        "properties": {
            "type": {"const": "EPP"},
            "a_theta": {"type": "number", "exclusiveMinimum": 0},
            "b_theta": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["type"],
        "additionalProperties": False,
    },
    "NBNBP": {
        "type": "object",
        "properties": {
            "type": {"const": "NBNBP"},
            "a_eta": {"type": "number", "exclusiveMinimum": 0},
            "b_eta": {"type": "number", "exclusiveMinimum": 0},
            "a_theta": {"type": "number", "exclusiveMinimum": 0},
            "b_theta": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["type"],
        "additionalProperties": False,
    },
    "NBDP": {
        "type": "object",
        "properties": {
            "type": {"const": "NBDP"},
            "alpha": {"type": "number", "exclusiveMinimum": 0},
            "mu0_param": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
        "required": ["type"],
        "additionalProperties": False,
    },
    "UP": {
        "type": "object",
        "properties": {"type": {"const": "UP"}},
        "required": ["type"],
        "additionalProperties": False,
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "prior": {"oneOf": list(_PRIOR_SCHEMAS.values())},
        "sampler": {
            "type": "object",
            "properties": {
                "burn_in": {"type": "integer", "minimum": 0},
                "samples": {"type": "integer", "minimum": 1},
                "thin": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "network_kernel": {"enum": ["RW", "SGHMC"]},
                "rw_target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "record_scan_order": {"enum": ["sequential", "shuffled"]},
                "sghmc": {
                    "type": "object",
                    "properties": {
                        "epsilon": {"type": "number", "exclusiveMinimum": 0},
                        "L": {"type": "integer", "minimum": 1},
                        "minibatch_frac": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "mass": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["burn_in", "samples", "thin", "seed", "network_kernel"],
            "additionalProperties": False,
        },
        "hypers": {
            "type": "object",
            "properties": {
                "omega": {"type": "number", "exclusiveMinimum": 0},
                "a_sigma": {"type": "number", "exclusiveMinimum": 0},
                "b_sigma": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "a_dist": {"type": "number", "exclusiveMinimum": 0},
                "b_dist": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "fields": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "sweep": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "a": {"type": "number", "exclusiveMinimum": 0},
                    "b": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["a", "b"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["prior", "sampler", "hypers"],
    "additionalProperties": False,
}


def table3_sweep_grid() -> list[dict]:
    """The published sensitivity grid over the distortion Beta(a, b) prior."""
    fixed_mean = [(0.004, 1.996), (0.010, 4.990), (0.020, 9.980),
                  (0.040, 19.960), (0.100, 49.900), (0.200, 99.800)]
    sum_100 = [(0.030, 99.970), (0.100, 99.900), (0.300, 99.700),
               (1.0, 99.0), (3.0, 97.0), (10.0, 90.0)]
    sum_10 = [(0.003, 9.997), (0.010, 9.990), (0.030, 9.970),
              (0.100, 9.900), (0.300, 9.700), (1.0, 9.0)]
    return [{"a": a, "b": b} for a, b in fixed_mean + sum_100 + sum_10]


def default_config() -> dict:
    """Defaults reproduce the published hyperparameter elicitation."""
    return {
        "prior": {"type": "ABP", "M": 2, "pi": 0.8, "cv": 0.5},
        "sampler": {
            "burn_in": 10_000,
            "samples": 10_000,
            "thin": 1,
            "seed": 0,
            "network_kernel": "RW",
            "rw_target_accept": 0.35,
            "record_scan_order": "shuffled",
            "sghmc": {"epsilon": 0.001, "L": 5, "minibatch_frac": 0.2, "mass": 1.0},
        },
        "hypers": {
            "omega": 100.0,
            "a_sigma": 6.0,
            "b_sigma": None,   # elicited from (I, K) at fit time
            "alpha": 1.0,
            "a_dist": 1.0,
            "b_dist": 99.0,
            "K": 2,
        },
        "fields": ["by", "bm", "bd"],
        "sweep": table3_sweep_grid(),
    }


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"config invalid at {pointer or '/'}: {exc.message}") from None
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return validate_config(cfg)


def save_config(cfg: dict, path) -> None:
    validate_config(cfg)
    Path(path).write_text(
        json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def prior_from_config(block: dict, I: int) -> PriorSpec:
    kind = block.get("type")
    if kind == "ABP":
        return ABPSpec.from_targets(block["pi"], block["cv"], M=block["M"])
    if kind == "EPP":
        return EPPSpec(
            a_theta=block.get("a_theta", 1.0),
            b_theta=block.get("b_theta", 1.0),
            theta=block.get("a_theta", 1.0) / block.get("b_theta", 1.0),
        )
    if kind == "NBNBP":
        return NBNBPSpec.for_records(
            I,
            a_eta=block.get("a_eta", 1.0),
            b_eta=block.get("b_eta", 1.0),
            a_theta=block.get("a_theta", 2.0),
            b_theta=block.get("b_theta", 2.0),
        )
    if kind == "NBDP":
        return NBDPSpec.for_records(
            I, alpha=block.get("alpha", 1.0), mu0_param=block.get("mu0_param", 0.5)
        )
    if kind == "UP":
        return UPSpec()
    raise ConfigError(f"unknown prior type {kind!r}")


def hypers_from_config(block: dict, I: int, K: int | None = None) -> HyperParams:
    block = copy.deepcopy(block)
    K = int(block.pop("K", K or 2))
    elicited = elicit_network_hypers(I, K)
    b_sigma = block.pop("b_sigma", None)
    return HyperParams(
        omega=block.pop("omega", 100.0),
        a_sigma=block.pop("a_sigma", elicited.a_sigma),
        b_sigma=elicited.b_sigma if b_sigma is None else b_sigma,
        alpha=block.pop("alpha", 1.0),
        a_dist=block.pop("a_dist", 1.0),
        b_dist=block.pop("b_dist", 99.0),
        K=K,
    )
