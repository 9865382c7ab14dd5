"""Experiment configuration: one JSON document, schema-validated before any work.

Example::

    {
      "version": 1,
      "signal": {"kind": "coherent", "params": {"mean": 0.5}},
      "reference": {"kind": "coherent", "mean": 0.5},
      "bs1": "auto",
      "cutoff": 14,
      "n_max": 4,
      "mode": "smeared",
      "efficiency": 0.9
    }

``bs1`` is ``"auto"`` or one of ``{"t_over_r_sq": x}``, ``{"mixing_angle": x}``,
``{"transmission": x}``. ``reference.mean`` may also be ``"auto"`` (|alpha|^2 =
lam/2 per element). ``efficiency`` is a scalar applied to all three detectors
or ``{"a": .., "b": .., "c": ..}``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ValidationError
from .fock import DensityMatrix, TEST_STATE_KINDS, make_test_states
from .imperfection import DEFAULT_INVERSION_BOUND, ReferenceModel
from .optics import BeamSplitterSpec
from .scheme import DEFAULT_NORM_FLOOR, optimal_params

SCHEMA_VERSION = 1
MODES = ("exact", "smeared", "sampled")

_number = {"type": "number"}
_unit = {"type": "number", "minimum": 0, "maximum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "signal"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "signal": {
            "type": "object",
            "additionalProperties": False,
            "oneOf": [{"required": ["kind"]}, {"required": ["matrix_file"]}],
            "properties": {
                "kind": {"enum": list(TEST_STATE_KINDS)},
                "params": {"type": "object"},
                "seed": {"type": "integer", "minimum": 0},
                "matrix_file": {"type": "string"},
            },
        },
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["coherent", "phase-diffused", "explicit"]},
                "mean": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "auto"}]},
                "phase": _number,
                "sigma": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]},
                "matrix_file": {"type": "string"},
            },
        },
        "bs1": {
            "oneOf": [
                {"const": "auto"},
                {"type": "object", "additionalProperties": False, "minProperties": 1,
                 "maxProperties": 1,
                 "properties": {
                     "t_over_r_sq": {"type": "number", "minimum": 0},
                     "mixing_angle": {"type": "number", "minimum": 0, "maximum": math.pi / 2},
                     "transmission": _unit,
                 }},
            ]
        },
        "cutoff": {"type": "integer", "minimum": 0, "maximum": 60},
        "total_cutoff": {"type": ["integer", "null"], "minimum": 0, "maximum": 80},
        "n_max": {"type": "integer", "minimum": 0},
        "efficiency": {
            "oneOf": [
                _unit,
                {"type": "object", "additionalProperties": False, "required": ["a", "b", "c"],
                 "properties": {"a": _unit, "b": _unit, "c": _unit}},
            ]
        },
        "mode": {"enum": list(MODES)},
        "shots": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "invert_efficiency": {"type": "boolean"},
        "inversion_bound": {"type": "number", "exclusiveMinimum": 0},
        "norm_floor": {"type": "number", "minimum": 0},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "format": {"enum": ["json", "csv", "both"]},
            },
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "reference": {"kind": "coherent", "mean": 0.5},
    "bs1": "auto",
    "cutoff": 14,
    "total_cutoff": None,
    "n_max": 4,
    "efficiency": 1.0,
    "mode": "exact",
    "shots": 1_000_000,
    "seed": 0,
    "invert_efficiency": False,
    "inversion_bound": DEFAULT_INVERSION_BOUND,
    "norm_floor": DEFAULT_NORM_FLOOR,
    "output": {"dir": "out", "format": "both"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the layout."""

    doc: dict = field(repr=False)
    base_dir: Path = Path(".")

    def __post_init__(self):
        doc = copy.deepcopy(self.doc)
        try:
            jsonschema.validate(doc, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ValidationError(f"config {where}: {exc.message}") from None
        merged = copy.deepcopy(DEFAULTS)
        for k, v in doc.items():
            if isinstance(v, dict) and isinstance(merged.get(k), dict) and k != "reference":
                merged[k].update(v)
            else:
                merged[k] = v
        object.__setattr__(self, "doc", merged)
        self._check()

    def _check(self):
        d = self.doc
        if d["n_max"] > d["cutoff"]:
            raise ValidationError(f"n_max={d['n_max']} exceeds cutoff={d['cutoff']}")
        ref = d["reference"]
        kind = ref.get("kind", "coherent")
        if kind == "explicit" and "matrix_file" not in ref:
            raise ValidationError("explicit reference needs matrix_file")
        if kind != "explicit" and "matrix_file" in ref:
            raise ValidationError("matrix_file is only valid for an explicit reference")
        if kind == "phase-diffused" and "sigma" not in ref:
            raise ValidationError("phase-diffused reference needs sigma")
        if kind == "explicit" and ref.get("mean") == "auto":
            raise ValidationError("an explicit reference cannot use mean 'auto'")
        if d["total_cutoff"] is not None and d["total_cutoff"] < d["cutoff"]:
            raise ValidationError("total_cutoff must be at least cutoff")

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "ExperimentConfig":
        return cls(doc, Path(base_dir))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path}: invalid JSON ({exc})") from None
        return cls(doc, path.parent)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """New config with top-level keys replaced (``None`` values are ignored)."""
        doc = copy.deepcopy(self.doc)
        doc.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(doc, self.base_dir)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    # -- accessors ----------------------------------------------------------

    def __getattr__(self, name):
        doc = self.__dict__.get("doc")
        if doc is not None and name in doc:
            return doc[name]
        raise AttributeError(name)

    @property
    def efficiencies(self) -> tuple[float, float, float]:
        e = self.doc["efficiency"]
        if isinstance(e, dict):
            return (float(e["a"]), float(e["b"]), float(e["c"]))
        return (float(e),) * 3

    @property
    def ideal_detectors(self) -> bool:
        return all(e == 1.0 for e in self.efficiencies)

    def signal_state(self) -> DensityMatrix:
        sig = self.doc["signal"]
        if "matrix_file" in sig:
            from .io import load_density

            rho = load_density(self.base_dir / sig["matrix_file"])
            if rho.cutoff > self.cutoff:
                raise ValidationError(f"signal matrix cutoff {rho.cutoff} exceeds cutoff {self.cutoff}")
            return rho.embed(self.cutoff)
        return make_test_states(sig["kind"], sig.get("params"), self.cutoff, sig.get("seed"))

    @property
    def auto_bs1(self) -> bool:
        return self.doc["bs1"] == "auto"

    def diagonal_ratio(self) -> float:
        """(t/r)^2 used for lam = 0 under "auto".

        The compromise 2 n_max / lam_max; the full matrix reaches lam_max = n_max,
        so this is 2 whatever n_max is.
        """
        return 2.0

    def bs1_for(self, N: int, lam: int) -> BeamSplitterSpec:
        spec = self.doc["bs1"]
        if spec == "auto":
            if lam == 0:
                return BeamSplitterSpec.from_ratio(self.diagonal_ratio())
            return BeamSplitterSpec.from_ratio(optimal_params(N, lam)[1])
        (key, value), = spec.items()
        if key == "t_over_r_sq":
            return BeamSplitterSpec.from_ratio(value)
        if key == "mixing_angle":
            return BeamSplitterSpec(value)
        return BeamSplitterSpec.from_transmission(value)

    def reference_for(self, lam: int) -> ReferenceModel:
        ref = self.doc["reference"]
        kind = ref.get("kind", "coherent")
        if kind == "explicit":
            from .io import load_density

            return ReferenceModel.explicit(load_density(self.base_dir / ref["matrix_file"]))
        mean = ref.get("mean", 0.5)
        if mean == "auto":
            mean = optimal_params(0, lam)[0]
        alpha = math.sqrt(mean) * complex(math.cos(ref.get("phase", 0.0)), math.sin(ref.get("phase", 0.0)))
        if kind == "phase-diffused":
            sigma = ref["sigma"]
            return ReferenceModel.phase_diffused(alpha, math.inf if sigma == "inf" else float(sigma))
        return ReferenceModel.coherent(alpha)

    def total_cutoff_for(self, reference: ReferenceModel) -> int:
        """Photon-number cutoff for joint count distributions (smeared and sampled modes)."""
        if self.doc["total_cutoff"] is not None:
            return self.doc["total_cutoff"]
        mu = reference.mean_photons
        return int(self.cutoff + math.ceil(mu + 6.0 * math.sqrt(mu)) + 2)
