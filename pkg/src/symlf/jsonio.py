"""Deterministic JSON output helpers.

All JSON artifacts are written with sorted keys and non-finite floats
mapped to null, so files parse everywhere and identical payloads produce
identical bytes.
"""

from __future__ import annotations

import json
import math


def sanitize(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    return obj


def dumps(obj, indent=2) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=indent,
                      allow_nan=False)


def dump(obj, path, indent=2):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent=indent))
        fh.write("\n")
