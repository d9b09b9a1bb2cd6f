"""Path containers, windowing, normalization and CSV ingestion.

A :class:`PathSet` is the basic unit of data everywhere in the package: an
array of ``n_paths`` paths, each with ``T`` time points of ``d`` channels,
together with the step size in years and a record of how the values were
normalized.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field, replace

import numpy as np

SCHEME_NONE = "none"
SCHEME_DIVIDE_BY_START = "divide-by-start"
SCHEME_AFFINE_TO_BALL = "affine-to-ball"


@dataclass
class NormalizationRecord:
    """Invertible description of the last normalization applied to a PathSet.

    ``scale``/``shift`` describe the global affine map used by the
    affine-to-ball scheme.  ``starts`` carries the per-path divisors of the
    divide-by-start scheme; without them that scheme could not be undone.
    """

    scheme: str = SCHEME_NONE
    scale: float = 1.0
    shift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    starts: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "scale": float(self.scale),
            "shift": np.asarray(self.shift, dtype=float).tolist(),
            "starts": None if self.starts is None else np.asarray(self.starts, dtype=float).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationRecord":
        return cls(
            scheme=d.get("scheme", SCHEME_NONE),
            scale=float(d.get("scale", 1.0)),
            shift=np.asarray(d.get("shift", []), dtype=float),
            starts=None if d.get("starts") is None else np.asarray(d["starts"], dtype=float),
        )


@dataclass
class PathSet:
    """``n_paths`` x ``T`` x ``d`` array of real path values plus metadata."""

    values: np.ndarray
    dt: float = 1.0
    label: str = ""
    normalization: NormalizationRecord = field(default_factory=NormalizationRecord)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise ValueError(f"PathSet values must be [n_paths, T, d], got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1 or v.shape[2] < 1:
            raise ValueError(f"PathSet needs n_paths, T, d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("PathSet values must all be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive number, got {self.dt}")
        self.values = v

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        """Paths flattened to [n_paths, T*d] (time-major)."""
        return self.values.reshape(self.n_paths, -1)

    def channel(self, k: int) -> np.ndarray:
        return self.values[:, :, k]


@dataclass
class ConditionedSample:
    """A single path together with the conditioning vector it was observed under."""

    path: np.ndarray
    condition: np.ndarray

    def __post_init__(self):
        self.path = np.asarray(self.path, dtype=float)
        self.condition = np.atleast_1d(np.asarray(self.condition, dtype=float))
        if self.condition.size < 1 or not np.all(np.isfinite(self.condition)):
            raise ValueError("condition must be a finite vector of dim >= 1")


def make_windows(series: np.ndarray, window_len: int, stride: int = 1,
                 dt: float = 1.0, label: str = "") -> PathSet:
    """Cut a 1-D series into overlapping windows, in chronological order."""
    series = np.asarray(series, dtype=float).ravel()
    n = series.size
    if window_len < 1 or stride < 1:
        raise ValueError("window_len and stride must be >= 1")
    if n < window_len:
        raise ValueError(f"series of length {n} is shorter than window_len {window_len}")
    n_windows = (n - window_len) // stride + 1
    idx = np.arange(window_len)[None, :] + stride * np.arange(n_windows)[:, None]
    return PathSet(series[idx][:, :, None], dt=dt, label=label)


def normalize_by_start(paths: PathSet) -> PathSet:
    """Divide each path by its first value so every path starts at 1.

    Applies to every channel using the first channel's start (price channel
    convention).  Idempotent on paths that already start at 1.
    """
    starts = paths.values[:, 0, 0].copy()
    bad = np.nonzero(starts == 0.0)[0]
    if bad.size:
        raise ValueError(f"cannot divide path {bad[0]} by its zero starting value")
    values = paths.values / starts[:, None, None]
    rec = NormalizationRecord(scheme=SCHEME_DIVIDE_BY_START, starts=starts)
    return PathSet(values, dt=paths.dt, label=paths.label, normalization=rec)


def normalize_to_ball(paths: PathSet) -> PathSet:
    """Affine-map the whole dataset so every flattened path has norm <= 1.

    Shift is the dataset mean path; scale is the largest centered path norm.
    """
    flat = paths.flat()
    shift = flat.mean(axis=0)
    norms = np.linalg.norm(flat - shift, axis=1)
    scale = float(norms.max())
    if scale == 0.0:
        scale = 1.0
    values = ((flat - shift) / scale).reshape(paths.values.shape)
    rec = NormalizationRecord(scheme=SCHEME_AFFINE_TO_BALL, scale=scale, shift=shift)
    return PathSet(values, dt=paths.dt, label=paths.label, normalization=rec)


def denormalize(paths: PathSet) -> PathSet:
    """Invert the normalization recorded on ``paths``."""
    rec = paths.normalization
    if rec.scheme == SCHEME_NONE:
        return paths
    if rec.scheme == SCHEME_DIVIDE_BY_START:
        if rec.starts is None or rec.starts.shape[0] != paths.n_paths:
            raise ValueError("divide-by-start record does not match this PathSet")
        values = paths.values * rec.starts[:, None, None]
    elif rec.scheme == SCHEME_AFFINE_TO_BALL:
        flat = paths.flat() * rec.scale + rec.shift
        values = flat.reshape(paths.values.shape)
    else:
        raise ValueError(f"unknown normalization scheme {rec.scheme!r}")
    return PathSet(values, dt=paths.dt, label=paths.label)


def apply_ball_record(values: np.ndarray, rec: NormalizationRecord,
                      inverse: bool = False) -> np.ndarray:
    """Apply (or invert) a stored affine-to-ball record to raw [n, T, d] values.

    Used at generation time, where new paths must be mapped back to data scale
    with the record learned from the training set.
    """
    if rec.scheme != SCHEME_AFFINE_TO_BALL:
        return values
    n = values.shape[0]
    flat = values.reshape(n, -1)
    if inverse:
        out = flat * rec.scale + rec.shift
    else:
        out = (flat - rec.shift) / rec.scale
    return out.reshape(values.shape)


def weighted_hist_vol(returns: np.ndarray, alpha: float = 1.5, delta: float = 1.0,
                      truncation: int = 100) -> np.ndarray:
    """Kernel-weighted running volatility of a return series.

    At index i the squared returns r_{i-k}^2, k = 0..min(i, truncation), are
    averaged with power-law weights proportional to (k + delta)^(-alpha),
    renormalized to sum to one over the window actually available; the square
    root of that average is returned.  Output has the same length as input.
    """
    if alpha <= 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if truncation < 1:
        raise ValueError(f"truncation must be >= 1, got {truncation}")
    r = np.asarray(returns, dtype=float).ravel()
    n = r.size
    # window covers lags k = 0..truncation-1
    kernel = (np.arange(truncation) + delta) ** (-alpha)
    r2 = r * r
    out = np.empty(n)
    # full-window part, vectorized as a correlation with the renormalized kernel
    if n >= truncation:
        w = kernel / kernel.sum()
        # np.convolve flips its kernel, which is exactly the lag orientation here
        out[truncation - 1:] = np.convolve(r2, w, mode="valid")
    # leading edge: renormalize over the shorter history
    for i in range(min(truncation - 1, n)):
        w = kernel[: i + 1]
        out[i] = np.dot(w / w.sum(), r2[i::-1])
    return np.sqrt(np.maximum(out, 0.0))


def simple_returns(series: np.ndarray) -> np.ndarray:
    """Per-step simple returns (S_j - S_{j-1}) / S_{j-1} along the last axis."""
    s = np.asarray(series, dtype=float)
    return np.diff(s, axis=-1) / s[..., :-1]


def load_series_csv(path, column: str):
    """Read one numeric column from a CSV file with a header row.

    Blank rows are skipped.  If a ``date`` column is present the rows are
    ordered by its ISO-8601 value before extraction.  Returns
    ``(values, n_rows)`` where ``n_rows`` counts the data rows scanned.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if column not in header:
            raise ValueError(f"{path}: column {column!r} not found in header {header}")
        col = header.index(column)
        date_col = header.index("date") if "date" in header and column != "date" else None

        rows = []
        n_rows = 0
        for row_num, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            n_rows += 1
            if len(row) <= col:
                raise ValueError(f"{path}: row {row_num} has no value for column {column!r}")
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: row {row_num}: cannot parse {cell!r} in column {column!r}"
                ) from None
            if not np.isfinite(value):
                raise ValueError(f"{path}: row {row_num}: non-finite value {cell!r}")
            key = row_num
            if date_col is not None and len(row) > date_col and row[date_col].strip():
                key = _dt.date.fromisoformat(row[date_col].strip())
            rows.append((key, value))
        if not rows:
            raise ValueError(f"{path}: no data rows")
    rows.sort(key=lambda kv: kv[0])
    return np.array([v for _, v in rows]), n_rows


def save_pathset_csv(paths: PathSet, path) -> None:
    """Write a PathSet in wide format: id, then t0..t{T-1} per channel."""
    n, T, d = paths.values.shape
    if d == 1:
        header = ["id"] + [f"t{j}" for j in range(T)]
    else:
        header = ["id"] + [f"c{k}_t{j}" for k in range(d) for j in range(T)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            cells = [str(i)]
            for k in range(d):
                cells += [repr(float(x)) for x in paths.values[i, :, k]]
            writer.writerow(cells)


def load_pathset_csv(path, dt: float = 1.0, label: str = "") -> PathSet:
    """Read a wide-format PathSet CSV written by :func:`save_pathset_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "id":
            raise ValueError(f"{path}: wide PathSet CSV must start with an 'id' column")
        cols = header[1:]
        if cols and cols[0].startswith("c"):
            channels = sorted({c.split("_")[0] for c in cols})
            d = len(channels)
            T = len(cols) // d
        else:
            d, T = 1, len(cols)
        if T * d != len(cols) or T == 0:
            raise ValueError(f"{path}: inconsistent header {header[:6]}...")
        rows = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError:
                raise ValueError(f"{path}: row {row_num}: non-numeric cell") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float).reshape(len(rows), d, T).transpose(0, 2, 1)
    return PathSet(arr, dt=dt, label=label)


__all__ = [
    "PathSet",
    "NormalizationRecord",
    "ConditionedSample",
    "make_windows",
    "normalize_by_start",
    "normalize_to_ball",
    "denormalize",
    "apply_ball_record",
    "weighted_hist_vol",
    "simple_returns",
    "load_series_csv",
    "save_pathset_csv",
    "load_pathset_csv",
    "replace",
]
