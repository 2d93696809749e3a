"""JSON output with 17 significant digits and numpy-aware conversion."""
from __future__ import annotations

import json
import math

import numpy as np


def plain(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, complex):
        return [plain(obj.real), plain(obj.imag)]
    return obj


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(k)}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, float):
        out.append(format(obj, ".17g"))
    else:
        out.append(json.dumps(obj))


def dumps(obj, indent: int = 2) -> str:
    """JSON text; every float written with 17 significant digits."""
    out: list = []
    _emit(plain(obj), indent, 0, out)
    return "".join(out)


def write(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")
