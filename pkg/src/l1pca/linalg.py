"""Minimal dense/sparse linear algebra used by everything else.

Thin SVD via a Jacobi eigensolver on the small Gram matrix, polar factors
for orthogonal Procrustes steps, a power-iteration spectral norm estimate,
and orthonormality diagnostics.  All routines are deterministic for fixed
inputs; randomized helpers take an explicit generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, PreconditionError

_EPS = np.finfo(np.float64).eps


def seeded_rng(*parts: int) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of integers.

    Distinct key tuples give independent, reproducible streams, so callers
    can split one user seed into per-purpose streams.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(parts))))


def as_dense(M) -> np.ndarray:
    """Return a float64 ndarray view/copy of a dense or sparse matrix."""
    if sp.issparse(M):
        return np.asarray(M.todense(), dtype=np.float64)
    return np.asarray(M, dtype=np.float64)


def require_finite(M, name: str = "matrix") -> None:
    data = M.data if sp.issparse(M) else np.asarray(M)
    if data.size and not np.isfinite(data).all():
        raise InvalidInputError(f"{name} contains non-finite entries")


def frob(M) -> float:
    """Frobenius norm of a dense or sparse matrix."""
    if sp.issparse(M):
        return float(np.sqrt((M.data ** 2).sum()))
    return float(np.linalg.norm(M))


def jacobi_eigh(G: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted nonincreasing and the matching orthonormal
    eigenvector columns.  Intended for the small Gram matrices that arise in
    thin factorizations (the cost is O(n^3) per sweep with small constants).
    """
    A = np.array(G, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise PreconditionError("jacobi_eigh expects a square matrix")
    V = np.eye(n)
    if n == 1:
        return A[0, :1].copy(), V
    scale = max(np.linalg.norm(A), 1.0)
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # sum the off-diagonal squares directly; the ||A||^2 - ||diag||^2
        # form cancels catastrophically near convergence
        off = np.sqrt(np.sum(A[off_mask] ** 2))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * (abs(A[p, p]) + abs(A[q, q])):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                rows = np.arange(n)
                mask = (rows != p) & (rows != q)
                aip = A[mask, p].copy()
                aiq = A[mask, q].copy()
                A[mask, p] = c * aip - s * aiq
                A[mask, q] = s * aip + c * aiq
                A[p, mask] = A[mask, p]
                A[q, mask] = A[mask, q]
                vip = V[:, p].copy()
                V[:, p] = c * vip - s * V[:, q]
                V[:, q] = s * vip + c * V[:, q]
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def complete_orthonormal(U: np.ndarray, n_cols: int) -> np.ndarray:
    """Extend orthonormal columns to ``n_cols`` columns deterministically.

    New columns are built from canonical basis vectors: for each slot the
    basis vector with the largest residual against the current span is
    orthonormalized and appended (ties broken by lowest index).
    """
    d, k = U.shape
    if n_cols > d:
        raise PreconditionError("cannot have more orthonormal columns than rows")
    out = np.zeros((d, n_cols))
    out[:, :k] = U
    filled = k
    while filled < n_cols:
        B = out[:, :filled]
        R = np.eye(d) - B @ B.T
        res = np.linalg.norm(R, axis=0)
        t = int(np.argmax(res))
        v = R[:, t]
        v = v - B @ (B.T @ v)
        nv = np.linalg.norm(v)
        if nv <= 0.0:
            raise InvalidInputError("orthonormal completion failed")
        out[:, filled] = v / nv
        filled += 1
    return out


@dataclass
class ThinSvd:
    """Thin factorization M = U diag(sigma) V^T with orthonormal U, V columns."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def _onesided_jacobi(W: np.ndarray, V: np.ndarray, max_sweeps: int = 40) -> None:
    # Rotate column pairs of W (mirrored into V) until mutually orthogonal
    # under a relative criterion.  Each rotation is orthogonal, so the
    # product W V^T is preserved exactly; column norms become the singular
    # values with high relative accuracy.
    cols = W.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                a = float(W[:, p] @ W[:, p])
                b = float(W[:, q] @ W[:, q])
                c = float(W[:, p] @ W[:, q])
                if a == 0.0 or b == 0.0 or abs(c) <= 1e-14 * np.sqrt(a * b):
                    continue
                theta = (b - a) / (2.0 * c)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * cs
                wp = W[:, p].copy()
                W[:, p] = cs * wp - sn * W[:, q]
                W[:, q] = sn * wp + cs * W[:, q]
                vp = V[:, p].copy()
                V[:, p] = cs * vp - sn * V[:, q]
                V[:, q] = sn * vp + cs * V[:, q]
                rotated = True
        if not rotated:
            break


def _thin_svd_tall(M: np.ndarray) -> ThinSvd:
    # rows >= cols; Gram eigendecomposition warm-starts a one-sided Jacobi
    # pass on W = M V.  The warm start converges in a sweep or two; the
    # one-sided refinement restores the orthogonality the squared
    # conditioning of the Gram matrix can lose, and the recomputed column
    # norms resolve true zero singular values at machine precision.
    rows, cols = M.shape
    G = M.T @ M
    _, V = jacobi_eigh(G)
    W = M @ V
    _onesided_jacobi(W, V)
    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    V = V[:, order]
    W = W[:, order]
    smax = sigma[0] if sigma.size else 0.0
    rank_tol = max(rows, cols) * _EPS
    U = np.zeros((rows, cols))
    kept = 0
    for i in range(cols):
        if sigma[i] > rank_tol * smax and sigma[i] > 0.0:
            U[:, i] = W[:, i] / sigma[i]
            kept = i + 1
    if kept < cols:
        U = complete_orthonormal(U[:, :kept], cols)
    return ThinSvd(U=U, sigma=sigma, V=V)


def thin_svd(M, rank: int | None = None) -> ThinSvd:
    """Thin SVD of a dense matrix, deterministic across calls.

    Works for any shape (the factorization is taken over the smaller
    dimension).  Zero singular values get deterministically completed
    singular vectors.  Each right-factor column is sign-normalized so its
    largest-magnitude entry is positive, with the left column flipped in
    tandem.

    Args:
        M: input matrix, rows x cols.
        rank: optional truncation; keeps the leading ``rank`` triples.

    Returns:
        ThinSvd with ``min(rows, cols)`` (or ``rank``) columns.
    """
    A = as_dense(M)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise PreconditionError("thin_svd expects a non-empty 2-d matrix")
    require_finite(A, "thin_svd input")
    if A.shape[1] > A.shape[0]:
        inner = _thin_svd_tall(A.T)
        out = ThinSvd(U=inner.V, sigma=inner.sigma, V=inner.U)
    else:
        out = _thin_svd_tall(A)
    # sign convention: largest-magnitude entry of each V column positive
    for j in range(out.V.shape[1]):
        i = int(np.argmax(np.abs(out.V[:, j])))
        if out.V[i, j] < 0.0:
            out.V[:, j] = -out.V[:, j]
            out.U[:, j] = -out.U[:, j]
    if rank is not None:
        r = min(rank, out.sigma.size)
        out = ThinSvd(U=out.U[:, :r], sigma=out.sigma[:r], V=out.V[:, :r])
    return out


def polar_factor(M) -> np.ndarray:
    """Orthonormal polar factor U V^T of a rows >= cols matrix.

    This is the maximizer of <M, Q> over matrices Q with orthonormal
    columns.  Rank-deficient inputs still yield a valid orthonormal result
    through deterministic completion of the missing directions.
    """
    A = as_dense(M)
    if A.ndim != 2 or A.shape[0] < A.shape[1] or A.shape[1] < 1:
        raise PreconditionError("polar_factor expects rows >= cols >= 1")
    s = thin_svd(A)
    return s.U @ s.V.T


def _power_estimate(X, v: np.ndarray, rel_tol: float, max_iter: int, rng: np.random.Generator) -> float:
    est = 0.0
    prev_inc = None
    noise_hits = 0
    for _ in range(max_iter):
        w = X @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            v = rng.standard_normal(v.shape[0])
            v /= np.linalg.norm(v)
            continue
        u = w / nw
        z = X.T @ u
        new = float(np.linalg.norm(z))
        if new == 0.0:
            return float(nw)
        v = z / new
        inc = new - est
        if est > 0.0:
            if inc <= 4.0 * _EPS * new:
                noise_hits += 1
                if noise_hits >= 3:
                    return new
            else:
                noise_hits = 0
            # increments decay geometrically with the squared spectral gap;
            # stop once the modeled remaining rise is safely below rel_tol
            if prev_inc is not None and 0.0 < inc < prev_inc:
                r = inc / prev_inc
                if inc * r / (1.0 - r) <= 0.25 * rel_tol * new:
                    return new
        prev_inc = inc
        est = new
    return float(est)


def spectral_norm(X, rel_tol: float = 1e-6, max_iter: int = 20000, starts: int = 3) -> float:
    """Largest singular value estimate via power iteration on X^T X.

    Returns an estimate ``s`` with ``s <= ||X||`` (every iterate yields a
    Rayleigh quotient, hence a lower bound).  Each of several deterministic
    seeded starts iterates until its modeled remaining progress drops safely
    below ``rel_tol``; the maximum is returned so a single start that is
    accidentally near-orthogonal to the leading direction cannot stall the
    estimate on a lower singular value.  ``s * (1 + rel_tol)`` is then a
    practical upper bound (heuristic, not certified, for spectra whose top
    values are closer than roundoff allows resolving).
    """
    if not (0.0 < rel_tol < 1.0):
        raise PreconditionError("rel_tol must lie in (0, 1)")
    require_finite(X, "spectral_norm input")
    n = X.shape[1]
    if frob(X) == 0.0:
        return 0.0
    best = 0.0
    for s in range(starts):
        rng = seeded_rng(0x5EED, X.shape[0], n, s)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        best = max(best, _power_estimate(X, v, rel_tol, max_iter, rng))
    return best


def stiefel_residual(Q) -> float:
    """Frobenius distance of Q^T Q from the identity; 0 iff columns orthonormal."""
    A = as_dense(Q)
    require_finite(A, "stiefel_residual input")
    k = A.shape[1]
    return float(np.linalg.norm(A.T @ A - np.eye(k)))


def random_stiefel(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x k matrix with orthonormal columns (Haar via polar factor)."""
    return polar_factor(rng.standard_normal((d, k)))


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    return random_stiefel(n, n, rng)


def random_signs(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an n x k matrix of +-1 entries."""
    return np.where(rng.random((n, k)) < 0.5, -1.0, 1.0)


def tangent_project(Q: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Project an ambient direction onto the tangent space at Q (Q^T Q = I)."""
    S = Q.T @ G
    return G - Q @ ((S + S.T) / 2.0)
