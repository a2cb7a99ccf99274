"""Synthetic instance generation, dataset ingestion, and trace export.

The generator follows a fixed-effect model: samples are points on a random
K-dimensional subspace (centered uniform coordinates against an
orthonormalized Gaussian basis) plus Laplace noise of prescribed variance.
Streams for the basis, the coordinates, and the noise are split from one
seed with a counter-based generator, so changing the noise level never
perturbs the basis.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, ParseError, PreconditionError
from .linalg import polar_factor, seeded_rng, thin_svd
from .model import ProblemInstance
from .solvers import IterateTrace

_STREAM_BASIS = 1
_STREAM_COORDS = 2
_STREAM_NOISE = 3

_DENSE_MAGIC = b"L1PCABIN"


@dataclass
class FixedEffectSpec:
    """Dimensions, Laplace noise scale (variance sigma^2), and seed."""

    n: int
    d: int
    K: int
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or not (1 <= self.K <= min(self.n, self.d)):
            raise PreconditionError("need n, d >= 1 and 1 <= K <= min(n, d)")
        if self.sigma < 0:
            raise PreconditionError("sigma must be nonnegative")


def _laplace(rng: np.random.Generator, shape: tuple[int, ...], sigma: float) -> np.ndarray:
    # inverse-CDF sampling; scale b = sigma / sqrt(2) gives variance sigma^2
    b = sigma / np.sqrt(2.0)
    u = rng.random(shape)
    v = u - 0.5
    mag = np.maximum(1.0 - 2.0 * np.abs(v), np.finfo(np.float64).tiny)
    return -b * np.sign(v) * np.log(mag)


def gen_fixed_effect(spec: FixedEffectSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate (X, U, Z): noisy data, ground-truth basis, noiseless part.

    The basis is the orthonormal polar factor of a standard normal matrix;
    the noiseless columns are centered uniform coordinates mapped through
    it, so they sum to zero and lie in the basis span exactly.
    """
    n, d, K = spec.n, spec.d, spec.K
    Y = None
    for attempt in range(4):
        rng_y = seeded_rng(spec.seed, _STREAM_BASIS, attempt)
        cand = rng_y.standard_normal((d, K))
        sv = thin_svd(cand).sigma
        if sv[-1] > 1e-10 * max(sv[0], 1.0):
            Y = cand
            break
    if Y is None:  # pragma: no cover - repeated exact rank deficiency
        raise InvalidInputError("basis draw was rank deficient after 3 retries")
    U = polar_factor(Y)
    rng_a = seeded_rng(spec.seed, _STREAM_COORDS)
    A = rng_a.random((K, n))
    Z = U @ (A - A.mean(axis=1, keepdims=True))
    rng_e = seeded_rng(spec.seed, _STREAM_NOISE)
    E = _laplace(rng_e, (d, n), spec.sigma)
    return Z + E, U, Z


# ---------------------------------------------------------------------------
# sparse labeled text format: one sample per line, "label index:value ...",
# indices 1-based strictly ascending, absent features zero


def read_sparse_labeled(path, K: int = 1, n_features: int | None = None) -> ProblemInstance:
    """Parse a sparse labeled text file into a problem instance.

    The feature dimension is the largest index seen unless ``n_features``
    overrides it (datasets may have trailing absent features).  Malformed
    lines raise ParseError with their 1-based line number.
    """
    labels: list[float] = []
    data: list[float] = []
    indices: list[int] = []
    indptr: list[int] = [0]
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ParseError(f"bad label {parts[0]!r}", lineno) from None
            prev = 0
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected index:value, got {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"non-numeric token {tok!r}", lineno) from None
                if idx <= prev:
                    raise ParseError(f"indices must be 1-based and ascending, got {idx} after {prev}", lineno)
                prev = idx
                indices.append(idx - 1)
                data.append(val)
            max_index = max(max_index, prev)
            indptr.append(len(data))
    n = len(labels)
    if n == 0:
        raise ParseError("empty file", 1)
    d = n_features if n_features is not None else max_index
    if d < max_index:
        raise PreconditionError(f"n_features={d} below largest index {max_index}")
    if d == 0:
        raise PreconditionError("no features present; pass n_features explicitly")
    X = sp.csc_matrix((data, indices, indptr), shape=(d, n))
    return ProblemInstance(X=X, K=K, labels=np.asarray(labels))


def write_sparse_labeled(path, X, labels) -> None:
    """Serialize a matrix (columns = samples) back to the text format."""
    Xc = sp.csc_matrix(X)
    labels = np.asarray(labels)
    if labels.shape != (Xc.shape[1],):
        raise PreconditionError("labels must have one entry per column")
    with open(path, "w", encoding="utf-8") as fh:
        for j in range(Xc.shape[1]):
            lo, hi = Xc.indptr[j], Xc.indptr[j + 1]
            toks = [_g(labels[j])]
            for r, v in zip(Xc.indices[lo:hi], Xc.data[lo:hi]):
                toks.append(f"{r + 1}:{_g(v)}")
            fh.write(" ".join(toks) + "\n")


# ---------------------------------------------------------------------------
# trace export (CSV and JSON, floats at 17 significant digits)

_CSV_COLUMNS = ("k", "h_value", "psi_value", "delta_P_norm", "delta_Q_norm", "delta_C_norm", "wall_time_seconds")


def _g(x: float) -> str:
    return format(float(x), ".17g")


def write_trace(trace: IterateTrace, path, fmt: str = "csv") -> None:
    """Write a trace as CSV or JSON; floats keep 17 significant digits."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(_CSV_COLUMNS) + "\n")
            for i in range(len(trace)):
                row = (
                    str(trace.k[i]),
                    _g(trace.h_value[i]),
                    _g(trace.psi_value[i]),
                    _g(trace.delta_P_norm[i]),
                    _g(trace.delta_Q_norm[i]),
                    _g(trace.delta_C_norm[i]),
                    _g(trace.wall_time[i]),
                )
                fh.write(",".join(row) + "\n")
    elif fmt == "json":
        records = []
        for i in range(len(trace)):
            records.append(
                "{"
                + ", ".join(
                    (
                        f'"k": {trace.k[i]}',
                        f'"h_value": {_g(trace.h_value[i])}',
                        f'"psi_value": {_g(trace.psi_value[i])}',
                        f'"delta_P_norm": {_g(trace.delta_P_norm[i])}',
                        f'"delta_Q_norm": {_g(trace.delta_Q_norm[i])}',
                        f'"delta_C_norm": {_g(trace.delta_C_norm[i])}',
                        f'"wall_time_seconds": {_g(trace.wall_time[i])}',
                    )
                )
                + "}"
            )
        body = ",\n    ".join(records)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write('{\n  "schema_version": 1,\n  "records": [\n    ' + body + "\n  ]\n}\n")
    else:
        raise PreconditionError(f"unknown trace format {fmt!r}")


def read_trace(path) -> IterateTrace:
    """Read a trace written by write_trace (format sniffed from content)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    trace = IterateTrace()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        for rec in payload["records"]:
            trace.append(
                rec["k"],
                rec["h_value"],
                rec["psi_value"],
                rec["delta_P_norm"],
                rec["delta_Q_norm"],
                rec["delta_C_norm"],
                rec["wall_time_seconds"],
            )
        return trace
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if tuple(header) != _CSV_COLUMNS:
        raise ParseError(f"unexpected trace header {header}", 1)
    for lineno, ln in enumerate(lines[1:], start=2):
        vals = ln.split(",")
        if len(vals) != len(_CSV_COLUMNS):
            raise ParseError("wrong column count", lineno)
        trace.append(int(vals[0]), *(float(v) for v in vals[1:]))
    return trace


# ---------------------------------------------------------------------------
# dense binary matrix format: 8-byte magic + uint32 rows + uint32 cols
# (little endian), then rows*cols float64 little endian in column-major order


def write_dense_matrix(path, M) -> None:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise PreconditionError("expected a 2-d matrix")
    rows, cols = A.shape
    with open(path, "wb") as fh:
        fh.write(_DENSE_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(A.astype("<f8").tobytes(order="F"))


def read_dense_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _DENSE_MAGIC:
            raise InvalidInputError(f"bad magic {magic!r}; not a dense matrix file")
        rows, cols = struct.unpack("<II", fh.read(8))
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise InvalidInputError("truncated dense matrix file")
    flat = np.frombuffer(payload, dtype="<f8")
    return np.asarray(flat.reshape((rows, cols), order="F"), dtype=np.float64)
