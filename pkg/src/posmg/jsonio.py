"""JSON rendering with 17-significant-digit floats and ``num/den`` rationals."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite float {x!r}")
    s = format(x, ".17g")
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    """Deterministic JSON text.  Keys keep insertion order."""
    return "".join(_encode(obj, indent, 0))


def _encode(obj, indent, level):
    if obj is None or isinstance(obj, bool):
        yield json.dumps(obj)
    elif isinstance(obj, (int, np.integer)):
        yield str(int(obj))
    elif isinstance(obj, (float, np.floating)):
        yield _float(float(obj))
    elif isinstance(obj, Fraction):
        yield json.dumps(f"{obj.numerator}/{obj.denominator}")
    elif isinstance(obj, str):
        yield json.dumps(obj)
    elif isinstance(obj, dict):
        if not obj:
            yield "{}"
            return
        pad, sep, end = _layout(indent, level)
        yield "{" + pad
        for i, (k, v) in enumerate(obj.items()):
            if i:
                yield sep
            yield json.dumps(str(k)) + ": "
            yield from _encode(v, indent, level + 1)
        yield end + "}"
    elif isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            yield "[]"
            return
        pad, sep, end = _layout(indent, level)
        yield "[" + pad
        for i, v in enumerate(obj):
            if i:
                yield sep
            yield from _encode(v, indent, level + 1)
        yield end + "]"
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def _layout(indent, level):
    if indent is None:
        return "", ", ", ""
    inner = "\n" + " " * (indent * (level + 1))
    return inner, "," + inner, "\n" + " " * (indent * level)
