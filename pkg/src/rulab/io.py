"""JSON encodings shared by every module and the CLI.

Matrices are ``{"dim": n, "entries": [[re, im], ...]}`` in row-major order;
a vector uses the same layout with ``len(entries) == dim``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .qlinalg import ValidationError

SCHEMA = "rulab/1"


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex).reshape(-1)
    return [[_clean(z.real), _clean(z.imag)] for z in a]


def _clean(x: float) -> float:
    x = float(x)
    return 0.0 if x == 0.0 else x   # drop negative zero so reruns print identically


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        return {"dim": int(m.shape[0]), "entries": _pairs(m)}
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"only square matrices and vectors are serialisable, got shape {m.shape}")
    return {"dim": int(m.shape[0]), "entries": _pairs(m)}


def matrix_from_json(doc) -> np.ndarray:
    if not isinstance(doc, dict):
        raise ValidationError("matrix document must be an object with 'dim' and 'entries'")
    extra = set(doc) - {"dim", "entries"}
    if extra:
        raise ValidationError(f"unknown keys in matrix document: {sorted(extra)}")
    try:
        dim = int(doc["dim"])
        entries = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"matrix document needs integer 'dim' and list 'entries' ({exc})") from None
    if dim <= 0:
        raise ValidationError(f"matrix dimension must be positive, got {dim}")
    try:
        vals = np.array([complex(float(re), float(im)) for re, im in entries])
    except (TypeError, ValueError):
        raise ValidationError("matrix entries must be [re, im] pairs of numbers") from None
    if not np.all(np.isfinite(vals)):
        raise ValidationError("matrix entries must be finite")
    if len(vals) == dim:
        return vals
    if len(vals) == dim * dim:
        return vals.reshape(dim, dim)
    raise ValidationError(f"matrix document has {len(vals)} entries; expected {dim} or {dim * dim}")


def read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def read_matrix(path) -> np.ndarray:
    return matrix_from_json(read_json(path))


def write_matrix(path, m) -> None:
    Path(path).write_text(dumps(matrix_to_json(m)), encoding="utf-8")


def to_plain(obj):
    """Recursively convert numpy scalars/arrays so that ``json`` can encode them."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return matrix_to_json(obj)
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return _clean(x)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, shortest round-trip floats."""
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dumps_line(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
