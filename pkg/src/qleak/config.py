"""Experiment configuration: JSON documents validated against a schema, with
physical quantities in MHz / kHz / ns / us and converted to rad/s and s."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .lrb import LrbConfig, SpamModel
from .operators import ValidationError
from .transmon import PULSE_KINDS, TransmonParams

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}

_LENGTHS = {
    "oneOf": [
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3},
        {
            "type": "object",
            "properties": {
                "start": {"type": "integer", "minimum": 1},
                "stop": {"type": "integer", "minimum": 1},
                "step": {"type": "integer", "minimum": 1},
            },
            "required": ["start", "stop", "step"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "anharmonicity_mhz": _NUM,
                "kappa_khz": _NONNEG,
                "nbar": _NONNEG,
                "levels": {"type": "integer", "minimum": 3, "maximum": 10},
                "measurement_time_us": _NONNEG,
            },
        },
        "pulses": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "types": {"type": "array", "items": {"enum": list(PULSE_KINDS)}, "minItems": 1, "uniqueItems": True},
                "durations_ns": {"type": "array", "items": _POS, "minItems": 1},
                "gap_ns": _NONNEG,
                "dt_ns": _POS,
                "sigma_fraction": _POS,
            },
        },
        "lrb": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["sweep", "seeds", "curves"]},
                "lengths": _LENGTHS,
                "seeds": {"type": "integer", "minimum": 1},
                "shots": {"type": "integer", "minimum": 0},
                "master_seed": {"type": "integer", "minimum": 0},
                "bootstrap_resamples": {"type": "integer", "minimum": 1},
                "direct_leakage_measurement": {"type": "boolean"},
                "spam": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"q1": _PROB, "q2": _PROB, "p_l": _PROB},
                },
                "seed_counts": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                "seeds_pulse": {"enum": list(PULSE_KINDS)},
                "seeds_duration_ns": _POS,
                "curve_pulse": {"enum": list(PULSE_KINDS)},
                "curve_durations_ns": {"type": "array", "items": _POS, "minItems": 1},
            },
        },
        "models": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fig4_dt": _POS,
                "fig4_depol_p": {"type": "array", "items": _PROB, "minItems": 1},
                "fig4_m_max": {"type": "integer", "minimum": 1},
                "fig5_durations_ns": {"type": "array", "items": _POS, "minItems": 1},
                "fig5_alphas": {"type": "array", "items": _NUM, "minItems": 1},
                "thermal_nbar": {"type": "array", "items": _NONNEG, "minItems": 1},
                "thermal_kappa_dt": {"type": "array", "items": _NONNEG, "minItems": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
            },
        },
    },
}

DEFAULTS = {
    "system": {"anharmonicity_mhz": -300.0, "kappa_khz": 10.0, "nbar": 0.01, "levels": 3, "measurement_time_us": 5.0},
    "pulses": {"types": list(PULSE_KINDS), "durations_ns": [8, 14, 30], "gap_ns": 4.0, "dt_ns": 0.05, "sigma_fraction": 0.25},
    "lrb": {
        "mode": "sweep",
        "lengths": {"start": 1, "stop": 1001, "step": 100},
        "seeds": 30,
        "shots": 0,
        "master_seed": 0,
        "bootstrap_resamples": 1000,
        "direct_leakage_measurement": False,
        "spam": {"q1": 0.0, "q2": 0.0, "p_l": 0.0},
        "seed_counts": [5, 10, 20, 40, 80],
        "seeds_pulse": "GAUSS",
        "seeds_duration_ns": 16.0,
        "curve_pulse": "GAUSS",
        "curve_durations_ns": [8, 14, 30],
    },
    "models": {
        "fig4_dt": 0.1,
        "fig4_depol_p": [0.0, 0.1, 1.0],
        "fig4_m_max": 200,
        "fig5_durations_ns": [4, 6, 8, 10, 14, 20, 30, 40],
        "fig5_alphas": [0.0, 0.5, 1.0],
        "thermal_nbar": [float(x) for x in np.round(np.linspace(0.0, 0.1, 21), 12)],
        "thermal_kappa_dt": [1e-4, 1e-3, 1e-2],
    },
    "outputs": {"directory": "out", "formats": ["csv", "json"]},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "lengths":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc: dict) -> None:
    """Raise ``ValidationError`` listing every schema violation by field path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors]
        raise ValidationError("invalid configuration:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict  # validated document with defaults filled in

    @classmethod
    def from_dict(cls, doc: dict | None = None) -> "ExperimentConfig":
        doc = {} if doc is None else doc
        validate(doc)
        full = _merge(DEFAULTS, doc)
        validate(full)
        cfg = cls(full)
        _ = cfg.lengths  # range checks the schema cannot express
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls.from_dict({})
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @property
    def lengths(self) -> tuple[int, ...]:
        spec = self.doc["lrb"]["lengths"]
        if isinstance(spec, dict):
            if spec["stop"] < spec["start"]:
                raise ValidationError("lrb/lengths: stop must be >= start")
            vals = tuple(range(spec["start"], spec["stop"] + 1, spec["step"]))
        else:
            vals = tuple(spec)
        if len(vals) < 3:
            raise ValidationError("lrb/lengths: at least 3 lengths are required for the decay fits")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("lrb/lengths: lengths must be strictly increasing")
        return vals

    def transmon_params(self) -> TransmonParams:
        s, p = self.doc["system"], self.doc["pulses"]
        return TransmonParams(
            anharmonicity=2 * np.pi * 1e6 * s["anharmonicity_mhz"],
            kappa=1e3 * s["kappa_khz"],
            nbar=s["nbar"],
            dim=s["levels"],
            gap=1e-9 * p["gap_ns"],
            dt=1e-9 * p["dt_ns"],
            measurement_time=1e-6 * s["measurement_time_us"],
            sigma_fraction=p["sigma_fraction"],
        )

    def lrb_config(self, threads: int = 1, master_seed: int | None = None) -> LrbConfig:
        lr = self.doc["lrb"]
        return LrbConfig(
            self.lengths,
            seeds=lr["seeds"],
            shots=lr["shots"],
            master_seed=lr["master_seed"] if master_seed is None else master_seed,
            spam=SpamModel(**lr["spam"]),
            direct_leakage_measurement=lr["direct_leakage_measurement"],
            threads=threads,
        )

    @property
    def durations(self) -> list[float]:
        return [1e-9 * t for t in self.doc["pulses"]["durations_ns"]]

    @property
    def output_dir(self) -> Path:
        return Path(self.doc["outputs"]["directory"])

    @property
    def formats(self) -> list[str]:
        return list(self.doc["outputs"]["formats"])
