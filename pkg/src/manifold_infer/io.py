"""Dataset ingestion and result serialization.

Datasets are stored one flattened sample per row in column-major order,
either as CSV or in a small binary container::

    b"MIDS" | version <u4 | ndim <u4 | dims <u8 * ndim | float64 <f8 ...

where ``dims = (n, *ambient_shape)`` and each sample's entries follow in
column-major order.
"""

from __future__ import annotations

import csv
import io
import json
import struct

import numpy as np

from .errors import ShapeMismatch

MAGIC = b"MIDS"
VERSION = 1


def format_float(x):
    """Shortest decimal string that round-trips to the same double."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def flatten_samples(data):
    data = np.asarray(data, dtype=float)
    return np.stack([np.ravel(x, order="F") for x in data]) if data.ndim > 1 else data[:, None]


def unflatten_samples(rows, shape):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[None, :]
    size = int(np.prod(shape))
    if rows.shape[1] != size:
        raise ShapeMismatch(f"rows have {rows.shape[1]} entries, expected {size} for shape {tuple(shape)}")
    return np.stack([r.reshape(shape, order="F") for r in rows])


def write_dataset_csv(path, data):
    rows = flatten_samples(data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in rows:
            w.writerow([format_float(v) for v in r])


def read_dataset_csv(path, shape):
    with open(path, newline="") as fh:
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    if not rows:
        return np.zeros((0,) + tuple(shape))
    if len({len(r) for r in rows}) != 1:
        raise ShapeMismatch("rows have different lengths")
    return unflatten_samples(np.array(rows), shape)


def write_dataset_binary(path, data):
    data = np.asarray(data, dtype=float)
    dims = data.shape
    header = MAGIC + struct.pack("<II", VERSION, len(dims)) + struct.pack(f"<{len(dims)}Q", *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flatten_samples(data).astype("<f8").tobytes())


def read_dataset_binary(path, shape=None):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError("not a dataset container (bad magic)")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    off = 12 + 8 * ndim
    n, ambient = dims[0], tuple(dims[1:])
    if shape is not None and tuple(shape) != ambient:
        raise ShapeMismatch(f"container holds samples of shape {ambient}, expected {tuple(shape)}")
    size = int(np.prod(ambient)) if ambient else 1
    expected = off + 8 * n * size
    if len(raw) != expected:
        raise ValueError("truncated or oversized dataset container")
    rows = np.frombuffer(raw, dtype="<f8", offset=off).reshape(n, size)
    return unflatten_samples(rows, ambient if ambient else (1,)) if n else np.zeros((0,) + ambient)


def read_dataset(path, shape):
    """Load a dataset; the binary container is recognized by its magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_dataset_binary(path, shape)
    return read_dataset_csv(path, shape)


def read_point(path, shape):
    """A single ambient point stored as one flattened column-major CSV row."""
    data = read_dataset_csv(path, shape)
    if data.shape[0] != 1:
        raise ShapeMismatch("expected exactly one row")
    return data[0]


def write_point(path, x):
    write_dataset_csv(path, np.asarray(x, dtype=float)[None])


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in M:
            w.writerow([format_float(v) for v in r])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in r] for r in csv.reader(fh) if r])


def rows_to_csv(rows, columns):
    """CSV text with a header row; floats in shortest round-trip form."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else format_float(x)
    return x


def dumps_json(obj):
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))
