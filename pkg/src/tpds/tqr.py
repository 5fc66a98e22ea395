"""Model-based T-product quadratic regulation (TQR).

The optimal state feedback for

    x(t+1) = a * x(t) + b * u(t),      u(t) = -k * x(t)

minimizing the accumulated T-quadratic cost with weights ``q`` (T-PSD)
and ``rr`` (T-PD) decouples, in the Fourier domain, into one discrete
algebraic Riccati equation per block:

    P_j = A_j^* P_j A_j
          - A_j^* P_j B_j (R_j + B_j^* P_j B_j)^{-1} B_j^* P_j A_j + Q_j

with per-block gain ``K_j = (R_j + B_j^* P_j B_j)^{-1} B_j^* P_j A_j``.
Each block is solved natively in complex arithmetic by value-iteration
warm-up followed by Newton (Kleinman) refinement; the real tensors are
recovered by the inverse transform over the unique frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import RANK_RTOL, Tensor3, tinverse, tprod, ttranspose
from .spectral import (
    FourierBlocks,
    from_fourier,
    is_tpd,
    is_tpsd,
    unique_block_indices,
)

__all__ = [
    "TqrSolution",
    "is_detectable",
    "is_riccati_solution",
    "is_stabilizable",
    "solve_dare_block",
    "solve_tqr",
]


@dataclass
class TqrSolution:
    """Riccati solution tensor, gain tensor, and per-block diagnostics."""

    p: Tensor3
    k: Tensor3
    block_residuals: np.ndarray
    closed_loop_radii: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(self.block_residuals.max())

    @property
    def max_radius(self) -> float:
        return float(self.closed_loop_radii.max())


def _herm(x: np.ndarray) -> np.ndarray:
    return (x + x.conj().T) / 2.0


def _rank(mat: np.ndarray) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > max(mat.shape) * sv[0] * RANK_RTOL))


def pbh_stabilizable(a: np.ndarray, b: np.ndarray) -> bool:
    """PBH test on a single (complex) matrix pair: every eigenvalue of
    ``a`` with modulus >= 1 must leave ``[a - lam I, b]`` full row rank."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = a.shape[0]
    eye = np.eye(n)
    for lam in np.linalg.eigvals(a):
        if abs(lam) >= 1.0:
            if _rank(np.hstack([a - lam * eye, b])) < n:
                return False
    return True


def pbh_detectable(c: np.ndarray, a: np.ndarray) -> bool:
    return pbh_stabilizable(np.asarray(a).conj().T, np.asarray(c).conj().T)


def is_stabilizable(a: Tensor3, b: Tensor3) -> bool:
    """Block-wise PBH stabilizability of the tensor pair (equivalent to
    stabilizability of the dense block-circulant pair)."""
    if a.n != a.m or a.n != b.n or a.r != b.r:
        raise ValueError(f"incompatible pair dims {a.dims} / {b.dims}")
    ab = np.fft.fft(a.data, axis=0)
    bb = np.fft.fft(b.data, axis=0)
    return all(pbh_stabilizable(ab[j - 1], bb[j - 1]) for j in unique_block_indices(a.r))


def is_detectable(q: Tensor3, a: Tensor3) -> bool:
    """Detectability of (q, a), i.e. stabilizability of the T-transposed
    pair."""
    return is_stabilizable(ttranspose(a), ttranspose(q))


def _dlyap(m: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve P = M^* P M + G (row-major vec identity: vec(A X B) =
    kron(A, B^T) vec(X))."""
    n = m.shape[0]
    mh = m.conj().T
    lhs = np.eye(n * n) - np.kron(mh, m.T)
    p = np.linalg.solve(lhs, g.ravel()).reshape(n, n)
    return _herm(p)


def solve_dare_block(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    rmat: np.ndarray,
    *,
    max_fixed: int = 500,
    max_newton: int = 50,
    tol: float = 1e-13,
    p0: np.ndarray | None = None,
) -> np.ndarray:
    """Stabilizing Hermitian solution of one block's discrete algebraic
    Riccati equation.

    Value iteration from ``P0 = Q`` (or ``p0``) until the implied closed
    loop is stable, then Newton (Kleinman) refinement.  Raises
    ``RuntimeError`` on non-convergence.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    q = _herm(np.asarray(q, dtype=complex))
    rmat = _herm(np.asarray(rmat, dtype=complex))
    if np.linalg.eigvalsh(rmat)[0] <= 0:
        raise ValueError("input weight block is not positive definite")

    def gain(p):
        return np.linalg.solve(rmat + b.conj().T @ p @ b, b.conj().T @ p @ a)

    def rhs(p):
        k = gain(p)
        return _herm(a.conj().T @ p @ a - (b.conj().T @ p @ a).conj().T @ k + q)

    def residual(p):
        return float(np.linalg.norm(rhs(p) - p)) / (1.0 + float(np.linalg.norm(p)))

    p = _herm(np.asarray(p0, dtype=complex)) if p0 is not None else q.copy()
    stable = False
    for _ in range(max_fixed):
        p_next = rhs(p)
        m = a - b @ gain(p_next)
        p = p_next
        if np.abs(np.linalg.eigvals(m)).max() < 1.0 - 1e-12:
            stable = True
            break
    if not stable:
        raise RuntimeError(
            f"Riccati value iteration did not reach a stabilizing gain in {max_fixed} steps"
        )
    for _ in range(max_newton):
        k = gain(p)
        m = a - b @ k
        p = _dlyap(m, _herm(q + k.conj().T @ rmat @ k))
        if residual(p) <= tol:
            break
    res = residual(p)
    if res > 1e-10:
        raise RuntimeError(f"Riccati Newton refinement stalled at residual {res:.3g}")
    return _herm(p)


def solve_tqr(a: Tensor3, b: Tensor3, q: Tensor3, rr: Tensor3) -> TqrSolution:
    """Model-based TQR: per-block Riccati solves on the unique
    frequencies, conjugate mirroring, inverse transform.

    Preconditions (raise ``ValueError``): ``q`` T-symmetric T-PSD, ``rr``
    T-symmetric T-PD, ``(a, b)`` stabilizable and ``(q, a)`` detectable.
    """
    if not is_tpsd(q):
        raise ValueError("state weight q is not T-positive semidefinite")
    if not is_tpd(rr):
        raise ValueError("input weight rr is not T-positive definite")
    if q.n != a.n or rr.n != b.m or q.r != a.r or rr.r != a.r:
        raise ValueError("weight dims do not match the system")
    if not is_stabilizable(a, b):
        raise ValueError("pair (a, b) is not stabilizable")
    if not is_detectable(q, a):
        raise ValueError("pair (q, a) is not detectable")

    n, m, r = a.n, b.m, a.r
    ab = np.fft.fft(a.data, axis=0)
    bb = np.fft.fft(b.data, axis=0)
    qb = np.fft.fft(q.data, axis=0)
    rb = np.fft.fft(rr.data, axis=0)

    pblocks = np.zeros((r, n, n), dtype=complex)
    kblocks = np.zeros((r, m, n), dtype=complex)
    for j in unique_block_indices(r):
        i = j - 1
        pj = solve_dare_block(ab[i], bb[i], qb[i], rb[i])
        kj = np.linalg.solve(_herm(rb[i]) + bb[i].conj().T @ pj @ bb[i],
                             bb[i].conj().T @ pj @ ab[i])
        pblocks[i] = pj
        kblocks[i] = kj
        if j > 1:
            mi = (r + 1 - j) % r  # 0-based mirror of block j
            pblocks[mi] = pj.conj()
            kblocks[mi] = kj.conj()

    residuals = np.empty(r)
    radii = np.empty(r)
    for i in range(r):
        pj = pblocks[i]
        kj = np.linalg.solve(_herm(rb[i]) + bb[i].conj().T @ pj @ bb[i],
                             bb[i].conj().T @ pj @ ab[i])
        lhs = _herm(ab[i].conj().T @ pj @ ab[i]
                    - (bb[i].conj().T @ pj @ ab[i]).conj().T @ kj + _herm(qb[i]))
        residuals[i] = np.linalg.norm(lhs - pj) / (1.0 + np.linalg.norm(pj))
        radii[i] = np.abs(np.linalg.eigvals(ab[i] - bb[i] @ kblocks[i])).max()

    p = from_fourier(FourierBlocks(pblocks))
    k = from_fourier(FourierBlocks(kblocks))
    return TqrSolution(p=p, k=k, block_residuals=residuals, closed_loop_radii=radii)


def is_riccati_solution(p: Tensor3, a: Tensor3, b: Tensor3, q: Tensor3, rr: Tensor3) -> float:
    """Relative residual of the T-algebraic Riccati equation at ``p``,
    evaluated entirely with T-product operations (an independent check of
    the per-block solver path).

    Returns ``||rhs - p||_F / (1 + ||p||_F)``.
    """
    at = ttranspose(a)
    bt = ttranspose(b)
    pa = tprod(p, a)
    inner = tinverse(Tensor3(rr.data + tprod(bt, tprod(p, b)).data))
    term = tprod(at, tprod(p, tprod(b, tprod(inner, tprod(bt, pa)))))
    rhs = Tensor3(tprod(at, pa).data - term.data + q.data)
    return float(np.linalg.norm(rhs.data - p.data)) / (1.0 + float(np.linalg.norm(p.data)))
