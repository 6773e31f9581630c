"""Embedded datasets with optional ground-truth soft labels.

A dataset is n points in a d-dimensional embedding space, each with an
opaque string id and optionally a row-stochastic soft label over C classes.
Two on-disk formats are supported: a header-bearing CSV for interoperability
and a packed little-endian binary for bit-exact round-trips.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Soft-label rows are renormalized only when this close to summing to 1;
# larger deviations are treated as upstream bugs and rejected.
LABEL_SUM_SLACK = 1e-6

_MAGIC = b"SSED"  # soft-label embedded dataset
_VERSION = 1
_FLAG_TRUTH = 1
_FLAG_CLASS_NAMES = 2


class DatasetError(ValueError):
    """Malformed file or invariant violation, with the offending row when known."""


@dataclass(frozen=True)
class EmbeddedDataset:
    """Immutable n-point dataset: ids, features (n×d), optional truth (n×C)."""

    ids: tuple
    features: np.ndarray
    truth: Optional[np.ndarray] = None
    class_names: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        feats = np.array(self.features, dtype=np.float64)  # private copy
        if feats.ndim != 2:
            raise DatasetError("features must be a 2-D array")
        object.__setattr__(self, "features", feats)
        feats.setflags(write=False)
        if self.truth is not None:
            object.__setattr__(self, "truth", np.array(self.truth, dtype=np.float64))
        _validate(self)
        if self.truth is not None:
            self.truth.setflags(write=False)
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> Optional[int]:
        return None if self.truth is None else self.truth.shape[1]


def _validate(ds: EmbeddedDataset) -> None:
    n, d = ds.features.shape
    if n < 1 or d < 1:
        raise DatasetError("need n >= 1 and d >= 1")
    if len(ds.ids) != n:
        raise DatasetError("ids length does not match feature rows")
    if len(set(ds.ids)) != n:
        seen = set()
        for row, i in enumerate(ds.ids):
            if i in seen:
                raise DatasetError(f"duplicate id {i!r} at row {row}")
            seen.add(i)
    bad = np.flatnonzero(~np.isfinite(ds.features).all(axis=1))
    if bad.size:
        raise DatasetError(f"non-finite feature value at row {bad[0]}")
    if ds.truth is not None:
        t = ds.truth
        if t.ndim != 2 or t.shape[0] != n:
            raise DatasetError("truth shape does not match features")
        if t.shape[1] < 2:
            raise DatasetError("soft labels need C >= 2 classes")
        bad = np.flatnonzero(~np.isfinite(t).all(axis=1))
        if bad.size:
            raise DatasetError(f"non-finite soft label at row {bad[0]}")
        bad = np.flatnonzero((t < 0).any(axis=1))
        if bad.size:
            raise DatasetError(f"negative soft label at row {bad[0]}")
        sums = t.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > LABEL_SUM_SLACK)
        if bad.size:
            raise DatasetError(
                f"soft-label row {bad[0]} sums to {sums[bad[0]]!r}, not 1"
            )
        # Within slack: renormalize so downstream code can rely on exact rows.
        # Rows already summing to 1 at round-off scale are left untouched —
        # repeated division wobbles the last ulp and would break the
        # packed-binary exact round-trip contract.
        off = np.abs(sums - 1.0) > 1e-12
        if off.any():
            t[off] /= sums[off, None]
        if ds.class_names is not None and len(ds.class_names) != t.shape[1]:
            raise DatasetError("class_names length does not match truth columns")
    elif ds.class_names is not None:
        raise DatasetError("class_names given without truth")


# ---------------------------------------------------------------------------
# delimited text


def _save_csv(ds: EmbeddedDataset, path) -> None:
    header = ["id"] + [f"f{j}" for j in range(ds.d)]
    if ds.truth is not None:
        header += [f"p{c}" for c in range(ds.truth.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ds.n):
            row = [ds.ids[i]] + [repr(float(v)) for v in ds.features[i]]
            if ds.truth is not None:
                row += [repr(float(v)) for v in ds.truth[i]]
            w.writerow(row)


def _load_csv(path) -> EmbeddedDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty file") from None
        if not header or header[0] != "id":
            raise DatasetError("first header column must be 'id'")
        d = sum(1 for name in header if name.startswith("f"))
        C = sum(1 for name in header if name.startswith("p"))
        if header[1 : 1 + d] != [f"f{j}" for j in range(d)] or header[1 + d :] != [
            f"p{c}" for c in range(C)
        ]:
            raise DatasetError(f"unrecognized header {header!r}")
        ids, feats, labels = [], [], []
        for row_idx, row in enumerate(reader):
            if len(row) != 1 + d + C:
                raise DatasetError(
                    f"row {row_idx}: expected {1 + d + C} columns, got {len(row)}"
                )
            ids.append(row[0])
            try:
                feats.append([float(v) for v in row[1 : 1 + d]])
                if C:
                    labels.append([float(v) for v in row[1 + d :]])
            except ValueError as exc:
                raise DatasetError(f"row {row_idx}: {exc}") from None
    if not ids:
        raise DatasetError("no data rows")
    truth = np.array(labels) if C else None
    return EmbeddedDataset(ids=ids, features=np.array(feats), truth=truth)


# ---------------------------------------------------------------------------
# packed binary: magic | version u32 | n u64 | d u64 | C u64 | flags u32 |
# features f64[n*d] | truth f64[n*C] | ids block | class-name block
# (string blocks: u32 byte length + utf-8 payload per entry, little-endian)


def _save_binary(ds: EmbeddedDataset, path) -> None:
    C = 0 if ds.truth is None else ds.truth.shape[1]
    flags = (_FLAG_TRUTH if ds.truth is not None else 0) | (
        _FLAG_CLASS_NAMES if ds.class_names is not None else 0
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQQI", _VERSION, ds.n, ds.d, C, flags))
        fh.write(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
        if ds.truth is not None:
            fh.write(np.ascontiguousarray(ds.truth, dtype="<f8").tobytes())
        for s in ds.ids:
            raw = s.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        if ds.class_names is not None:
            for s in ds.class_names:
                raw = s.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)


def _load_binary(path) -> EmbeddedDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DatasetError("bad magic bytes; not a packed dataset file")
    version, n, d, C, flags = struct.unpack_from("<IQQQI", blob, 4)
    if version != _VERSION:
        raise DatasetError(f"unsupported format version {version}")
    off = 4 + struct.calcsize("<IQQQI")
    need = n * d * 8
    feats = np.frombuffer(blob, dtype="<f8", count=n * d, offset=off).reshape(n, d)
    off += need
    truth = None
    if flags & _FLAG_TRUTH:
        truth = np.frombuffer(blob, dtype="<f8", count=n * C, offset=off).reshape(n, C)
        off += n * C * 8

    def read_strings(count):
        nonlocal off
        out = []
        for _ in range(count):
            (ln,) = struct.unpack_from("<I", blob, off)
            off += 4
            out.append(blob[off : off + ln].decode("utf-8"))
            off += ln
        return out

    ids = read_strings(n)
    names = tuple(read_strings(C)) if flags & _FLAG_CLASS_NAMES else None
    return EmbeddedDataset(
        ids=ids, features=feats.copy(), truth=None if truth is None else truth.copy(),
        class_names=names,
    )


def save_dataset(dataset: EmbeddedDataset, path, format: str = "delimited-text") -> None:
    if format in ("delimited-text", "csv"):
        _save_csv(dataset, path)
    elif format in ("packed-binary", "binary"):
        _save_binary(dataset, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def load_dataset(path, format: str = "delimited-text") -> EmbeddedDataset:
    if format in ("delimited-text", "csv"):
        return _load_csv(path)
    if format in ("packed-binary", "binary"):
        return _load_binary(path)
    raise ValueError(f"unknown format {format!r}")


def dataset_from_arrays(
    features,
    truth=None,
    ids: Optional[Sequence[str]] = None,
    class_names=None,
) -> EmbeddedDataset:
    """Convenience constructor; ids default to zero-padded row numbers."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    n = features.shape[0]
    if ids is None:
        width = max(4, len(str(max(n - 1, 0))))
        ids = [f"p{i:0{width}d}" for i in range(n)]
    return EmbeddedDataset(ids=ids, features=features, truth=truth, class_names=class_names)
