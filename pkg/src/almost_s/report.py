"""Deterministic JSON reports: ``{meta, config, results, verdict}``.

Floats are written with 17 significant digits; non-finite floats become the
strings ``"nan"``, ``"inf"`` and ``"-inf"``.  Keys keep insertion order and no
timestamps or host data are recorded, so identical inputs give identical bytes.
"""
from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .geometry import CONVENTIONS

TOOL = "almost-s"


def _float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, ".17g")
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent=2):
    return _emit(obj, indent, 0) + "\n"


def meta(structure=None, seed=None):
    return {
        "tool": TOOL,
        "version": __version__,
        "conventions": dict(CONVENTIONS),
        "structure": structure,
        "seed": seed,
    }


def result(name, max_abs, mean_abs=None, tol=None, passed=None, **extra):
    out = {"name": name, "max_abs": max_abs, "mean_abs": mean_abs, "tol": tol, "pass": passed}
    out.update(extra)
    return out


def verdict(results, warnings=()):
    failures = [r["name"] for r in results if r.get("pass") is False and r.get("gating", True)]
    return {"pass": not failures, "failures": failures, "warnings": list(warnings)}


def build(structure, seed, config, results, warnings=()):
    return {
        "meta": meta(structure, seed),
        "config": config,
        "results": list(results),
        "verdict": verdict(results, warnings),
    }
