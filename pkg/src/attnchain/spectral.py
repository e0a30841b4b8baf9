"""Second-eigenvalue estimation and head weighting.

|lambda2| controls mixing time: structured chains with metastable token
clusters keep a large second eigenvalue, while noisy chains mix almost
immediately. Heads are weighted proportionally to their |lambda2|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_chain import StateVector, StochasticMatrix, teleport_adjust
from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    EmptyHeadList,
    NonPositiveMatrix,
    SizeExceeded,
)

#: matrices up to this size use the dense eigensolver; larger ones fall back
#: to deflated power iteration
DENSE_LIMIT = 512

_DEFLATED_TOL = 1e-11
_DEFLATED_MAX_SWEEPS = 5000
_NEGLIGIBLE = 1e-12


@dataclass(frozen=True)
class SpectralSummary:
    """Per-head |lambda2| magnitudes and the derived convex head weights."""

    per_head_lambda2: tuple
    weights: tuple
    method: str
    uniform_fallback: bool = False


def lambda2(m: StochasticMatrix, method: str = "auto",
            alpha: float | None = None) -> float:
    """Modulus of the second-largest eigenvalue of the chain.

    method "dense" runs a full eigendecomposition; "deflated" removes the
    known dominant eigenpair and power-iterates the remainder; "auto"
    switches on DENSE_LIMIT. Pass alpha to compute on the teleport-adjusted
    chain instead of the raw one.
    """
    if alpha is not None:
        m = teleport_adjust(m, alpha)
    if m.n == 1:
        return 0.0
    if method == "auto":
        method = "dense" if m.n <= DENSE_LIMIT else "deflated"
    if method == "dense":
        mods = np.sort(np.abs(np.linalg.eigvals(m.entries)))[::-1]
        return float(mods[1])
    if method == "deflated":
        return _deflated_lambda2(m.entries)
    raise ValueError(f"unknown lambda2 method {method!r}")


def _deflated_lambda2(a: np.ndarray, tol: float = _DEFLATED_TOL,
                      max_sweeps: int = _DEFLATED_MAX_SWEEPS) -> float:
    """Power-iterate the chain restricted to the sum-zero row subspace.

    Row vectors with zero sum are invariant under v^T A (rows of A sum
    to 1), and on that subspace A carries exactly the non-dominant
    spectrum, so the dominant eigenpair is deflated without forming it
    explicitly. A small block plus Rayleigh-Ritz handles complex pairs.
    """
    n = a.shape[0]
    block = min(6, n - 1)
    rng = np.random.default_rng(0)  # fixed: the estimate must be deterministic
    v = rng.standard_normal((block, n))

    prev = np.inf
    for _ in range(max_sweeps):
        v = _orthonormal_sum_zero_rows(v)
        if v.size == 0:
            return 0.0  # low-rank chain: the remaining spectrum is all zeros
        w = v @ a
        small = w @ v.T  # Ritz compression of the deflated operator
        est = float(np.max(np.abs(np.linalg.eigvals(small))))
        if abs(est - prev) < tol:
            return est
        prev = est
        v = w
    raise ConvergenceFailure(
        f"deflated power iteration did not converge in {max_sweeps} sweeps"
    )


def _orthonormal_sum_zero_rows(v: np.ndarray) -> np.ndarray:
    """Orthonormalize rows inside the sum-zero hyperplane, dropping
    directions lost to rank deficiency (QR must not complete the basis
    with vectors that leak the deflated dominant eigenpair back in)."""
    for _ in range(2):  # second pass scrubs drift reintroduced by QR
        v = v - v.mean(axis=1, keepdims=True)
        q, r = np.linalg.qr(v.T)
        diag = np.abs(np.diag(r))
        keep = diag > max(diag.max(), 1.0) * 1e-13
        if not np.any(keep):
            return np.empty((0, v.shape[1]))
        v = q[:, keep].T
    return v


def lambda2_weights(heads: list[StochasticMatrix],
                    method: str = "auto") -> SpectralSummary:
    """Convex head weights proportional to per-head |lambda2|.

    Falls back to uniform weights (flagged) when every head's spectrum is
    degenerate, so aggregation never fails on pathological inputs.
    """
    if not heads:
        raise EmptyHeadList("need at least one head")
    n = heads[0].n
    if any(h.n != n for h in heads):
        raise DimensionMismatch("heads must share the same state count")
    values = [lambda2(h, method=method) for h in heads]
    total = sum(values)
    if total < _NEGLIGIBLE:
        weights = [1.0 / len(heads)] * len(heads)
        return SpectralSummary(tuple(values), tuple(weights), method,
                               uniform_fallback=True)
    weights = [v / total for v in values]
    return SpectralSummary(tuple(values), tuple(weights), method)


def dense_left_eigvec_oracle(m: StochasticMatrix) -> StateVector:
    """Dominant left eigenvector by dense eigendecomposition.

    Test oracle for the power-iteration path; requires a strictly positive
    matrix (e.g. post-teleportation) so the dominant eigenpair is simple.
    """
    if m.n > DENSE_LIMIT:
        raise SizeExceeded(f"dense oracle limited to n <= {DENSE_LIMIT}, got {m.n}")
    if np.any(m.entries <= 0):
        raise NonPositiveMatrix("oracle requires strictly positive entries")
    vals, vecs = np.linalg.eig(m.entries.T)
    dominant = int(np.argmax(np.abs(vals)))
    vec = np.abs(np.real(vecs[:, dominant]))
    return StateVector(vec / vec.sum())
