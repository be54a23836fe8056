"""Plain-text vector sets: a ``<count> <dim>`` line, then ``tag v1 ... vN`` per line."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimensionMismatch, MalformedRecord

VectorSet = dict  # tag -> 1-d float array


def format_vectors(vectors: Mapping[str, np.ndarray]) -> str:
    if not vectors:
        return "0 0\n"
    dims = {np.asarray(v).shape[0] for v in vectors.values()}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    lines = [f"{len(vectors)} {dims.pop()}"]
    for tag in sorted(vectors):
        # 9 significant digits round-trip float32 exactly
        vals = " ".join(format(float(x), ".9g") for x in np.asarray(vectors[tag], dtype=np.float32))
        lines.append(f"{tag} {vals}")
    return "\n".join(lines) + "\n"


def save_vectors(vectors: Mapping[str, np.ndarray], path) -> None:
    Path(path).write_text(format_vectors(vectors), encoding="utf-8")


def load_vectors(path) -> VectorSet:
    out: VectorSet = {}
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise MalformedRecord(path, 1, "expected '<count> <dim>'")
        count, dim = int(head[0]), int(head[1])
        for i, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise MalformedRecord(path, i, f"expected {dim} values")
            out[parts[0]] = np.array(parts[1:], dtype=np.float32)
    if len(out) != count:
        raise MalformedRecord(path, 1, f"header says {count} vectors, found {len(out)}")
    return out
