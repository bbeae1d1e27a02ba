"""File formats: DNT1 binary tensors, JSON models, CSV traces."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .ktensor import KruskalModel
from .tensor import DenseTensor

__all__ = [
    "MAGIC",
    "write_tensor",
    "read_tensor",
    "write_model",
    "read_model",
    "TRACE_FIELDS",
    "write_trace",
    "read_trace",
]

MAGIC = b"DNT1"
TRACE_FIELDS = ("iter", "time_s", "fit", "fit_kind", "best_fit")


def write_tensor(X: DenseTensor, path) -> None:
    """Magic, little-endian u64 order, u64 dims, then f64 values with mode 1 fastest."""
    if X.is_complex:
        raise ValueError("DNT1 stores real tensors only")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<Q{X.ndim}Q", X.ndim, *X.dims))
        fh.write(np.ascontiguousarray(X.values, dtype="<f8").tobytes())


def read_tensor(path) -> DenseTensor:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a DNT1 file")
    (N,) = struct.unpack_from("<Q", raw, 4)
    dims = struct.unpack_from(f"<{N}Q", raw, 12)
    offset = 12 + 8 * N
    P = int(np.prod(dims, dtype=np.int64))
    if len(raw) - offset != 8 * P:
        raise ValueError(f"{path}: expected {P} values, found {(len(raw) - offset) // 8}")
    values = np.frombuffer(raw, dtype="<f8", count=P, offset=offset)
    return DenseTensor.from_values(dims, values)


def write_model(model: KruskalModel, path) -> None:
    doc = {
        "lambda": [float(w) for w in model.weights],
        "factors": [np.asarray(A, dtype=float).tolist() for A in model.factors],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def read_model(path) -> KruskalModel:
    doc = json.loads(Path(path).read_text())
    R = len(doc["lambda"])
    factors = [np.asarray(A, dtype=float).reshape(-1, R) for A in doc["factors"]]
    return KruskalModel(np.asarray(doc["lambda"], dtype=float), factors)


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for rec in trace:
            w.writerow([rec.iteration, f"{rec.elapsed_seconds:.6f}", repr(float(rec.fit)),
                        rec.fit_kind, repr(float(rec.best_fit))])


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            dict(iter=int(r["iter"]), time_s=float(r["time_s"]), fit=float(r["fit"]),
                 fit_kind=r["fit_kind"], best_fit=float(r["best_fit"]))
            for r in csv.DictReader(fh)
        ]
