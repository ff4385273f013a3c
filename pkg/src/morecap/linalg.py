"""Dense matrix helpers and a self-contained singular value decomposition.

Everything in this package works on 2-D float64 numpy arrays. The SVD here
is a one-sided (Hestenes) Jacobi iteration: plane rotations orthogonalize
the columns of a working copy of the input, the surviving column norms are
the singular values, and the accumulated rotations give the right singular
vectors. It is slower than a LAPACK call but has no dependencies beyond
basic array arithmetic and is accurate to roundoff for the matrix sizes the
weight filter deals with.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SWEEPS = 100
# A column pair counts as orthogonal once |<bp,bq>| <= ORTH_TOL * |bp||bq|.
ORTH_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """Jacobi sweeps hit the iteration cap before all columns orthogonalized."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert input to a finite, non-empty 2-D float64 array."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if out.size == 0:
        raise ValueError(f"{name} must be non-empty, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries (NaN or Inf)")
    return out


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def add(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ValueError(f"elementwise shape mismatch: {a.shape} vs {b.shape}")
    return a + b


def subtract(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ValueError(f"elementwise shape mismatch: {a.shape} vs {b.shape}")
    return a - b


def hadamard(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ValueError(f"elementwise shape mismatch: {a.shape} vs {b.shape}")
    return a * b


@dataclass
class SvdResult:
    """Thin SVD of an m x n matrix: u (m x r), s (length r), v (n x r).

    r = min(m, n); s is non-increasing and non-negative; the columns of u
    and v are orthonormal; (u * s) @ v.T reconstructs the input.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.s)


def svd(w) -> SvdResult:
    """Thin SVD via one-sided Jacobi rotations.

    Raises ValueError for empty or non-finite input and ConvergenceError
    (naming the worst residual) if MAX_SWEEPS sweeps do not reach ORTH_TOL.
    """
    w = as_matrix(w, "svd input")
    m, n = w.shape
    transposed = m < n
    work = w.T.copy() if transposed else w.copy()
    rows, cols = work.shape  # rows >= cols

    # Row j of bt is column j of the working matrix; row storage keeps the
    # per-pair dot products and rotations contiguous.
    bt = np.ascontiguousarray(work.T)
    vt = np.eye(cols)
    worst = 0.0
    for _ in range(MAX_SWEEPS):
        norms2 = np.einsum("ij,ij->i", bt, bt)
        converged = True
        worst = 0.0
        for p in range(cols - 1):
            bp = bt[p]
            for q in range(p + 1, cols):
                gamma = bp @ bt[q]
                denom = np.sqrt(norms2[p] * norms2[q])
                if denom == 0.0 or abs(gamma) <= ORTH_TOL * denom:
                    continue
                converged = False
                worst = max(worst, abs(gamma) / denom)
                zeta = (norms2[q] - norms2[p]) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                old_p = bp.copy()
                bt[p] = c * old_p - s * bt[q]
                bt[q] = s * old_p + c * bt[q]
                old_vp = vt[p].copy()
                vt[p] = c * old_vp - s * vt[q]
                vt[q] = s * old_vp + c * vt[q]
                a2, b2 = norms2[p], norms2[q]
                # Clamp: roundoff can push a vanished column's norm below 0.
                norms2[p] = max(c * c * a2 + s * s * b2 - 2.0 * c * s * gamma, 0.0)
                norms2[q] = max(s * s * a2 + c * c * b2 + 2.0 * c * s * gamma, 0.0)
                bp = bt[p]
        if converged:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps; "
            f"worst off-diagonal residual {worst:.3e} (tolerance {ORTH_TOL:.0e})"
        )

    sv = np.sqrt(np.maximum(np.einsum("ij,ij->i", bt, bt), 0.0))
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    bt = bt[order]
    vt = vt[order]

    cutoff = max(rows, cols) * np.finfo(np.float64).eps * (sv[0] if sv.size else 0.0)
    u = np.zeros((rows, cols))
    for j in range(cols):
        if sv[j] > cutoff:
            u[:, j] = bt[j] / sv[j]
        else:
            sv[j] = 0.0
            _fill_orthonormal_column(u, j)

    v = vt.T.copy()
    if transposed:
        u, v = v, u

    # Sign convention: largest-magnitude entry of each u column non-negative.
    for j in range(cols):
        k = int(np.argmax(np.abs(u[:, j])))
        if u[k, j] < 0.0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SvdResult(u=u, s=sv, v=v)


def _fill_orthonormal_column(u: np.ndarray, j: int) -> None:
    # Rank-deficient input: column j has no direction of its own, so extend
    # the basis with the first canonical vector that survives projection.
    rows = u.shape[0]
    for e in range(rows):
        cand = np.zeros(rows)
        cand[e] = 1.0
        if j > 0:
            cand -= u[:, :j] @ (u[:, :j].T @ cand)
        nrm = np.linalg.norm(cand)
        if nrm > 0.5:
            u[:, j] = cand / nrm
            return
    raise RuntimeError("failed to complete orthonormal basis")  # unreachable


def truncated_reconstruct(dec: SvdResult, l: int) -> np.ndarray:
    """Best rank-l approximation (u[:, :l] * s[:l]) @ v[:, :l].T.

    l must satisfy 1 <= l <= len(dec.s).
    """
    r = len(dec.s)
    if not 1 <= l <= r:
        raise ValueError(f"truncation rank l={l} outside valid range [1, {r}]")
    return (dec.u[:, :l] * dec.s[:l]) @ dec.v[:, :l].T
