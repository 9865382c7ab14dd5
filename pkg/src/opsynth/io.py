"""File formats: density matrices (JSON and CSV), sampled counts, run reports.

Every writer stages to a temporary file in the target directory and moves it
into place with ``os.replace``, so readers never see a half-written file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ValidationError
from .fock import DensityMatrix
from .imperfection import SampledCounts

DENSITY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["cutoff", "re", "im"],
    "properties": {
        "cutoff": {"type": "integer", "minimum": 0},
        "re": {"type": "array", "items": {"type": "array", "items": {"type": ["number", "null"]}}},
        "im": {"type": "array", "items": {"type": "array", "items": {"type": ["number", "null"]}}},
        "tail": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(x: float):
    # NaN marks an element that could not be measured; JSON has no NaN
    return None if math.isnan(x) else float(x)


def density_to_dict(rho: DensityMatrix) -> dict:
    e = rho.entries
    out = {
        "cutoff": rho.cutoff,
        "re": [[_num(v) for v in row] for row in e.real],
        "im": [[_num(v) for v in row] for row in e.imag],
    }
    if rho.tail:
        out["tail"] = float(rho.tail)
    return out


def density_from_dict(doc: dict, validate: bool = True) -> DensityMatrix:
    try:
        jsonschema.validate(doc, DENSITY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"density matrix document: {exc.message}") from None
    D = doc["cutoff"]
    re = np.array(doc["re"], dtype=float)
    im = np.array(doc["im"], dtype=float)
    if re.shape != (D + 1, D + 1) or im.shape != re.shape:
        raise ValidationError(f"density matrix arrays must be {D + 1}x{D + 1}")
    entries = re + 1j * im
    tail = float(doc.get("tail", 0.0))
    if validate:
        return DensityMatrix(entries, tail=tail)
    return DensityMatrix.estimate(entries, tail=tail)


def density_to_csv(rho: DensityMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "n", "re", "im"])
    e = rho.entries
    for m in range(e.shape[0]):
        for n in range(e.shape[1]):
            w.writerow([m, n, repr(float(e[m, n].real)), repr(float(e[m, n].imag))])
    return buf.getvalue()


def density_from_csv(text: str, validate: bool = True) -> DensityMatrix:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(rows[0]) != {"m", "n", "re", "im"}:
        raise ValidationError("density CSV needs the header m,n,re,im")
    D = max(max(int(r["m"]), int(r["n"])) for r in rows)
    entries = np.zeros((D + 1, D + 1), dtype=complex)
    for r in rows:
        entries[int(r["m"]), int(r["n"])] = float(r["re"]) + 1j * float(r["im"])
    return DensityMatrix(entries) if validate else DensityMatrix.estimate(entries)


def save_density(path, rho: DensityMatrix, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "json":
        return atomic_write_text(path, json.dumps(density_to_dict(rho), indent=1) + "\n")
    if fmt == "csv":
        return atomic_write_text(path, density_to_csv(rho))
    raise ValidationError(f"unknown density matrix format {fmt!r}")


def load_density(path, validate: bool = True) -> DensityMatrix:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    if path.suffix == ".csv":
        return density_from_csv(text, validate)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return density_from_dict(doc, validate)


def counts_to_csv(counts: SampledCounts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_a", "n_b", "n_c", "count"])
    w.writerows(counts.rows())
    return buf.getvalue()


def save_counts(path, counts: SampledCounts) -> Path:
    return atomic_write_text(path, counts_to_csv(counts))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj)) if math.isfinite(obj) or math.isnan(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def save_report(path, report: dict) -> Path:
    return atomic_write_text(path, json.dumps(_jsonable(report), indent=1) + "\n")
