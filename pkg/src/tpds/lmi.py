"""Small dense semidefinite solver.

Two primitives are provided, both over affine symmetric-matrix maps:

* :func:`find_strictly_feasible` -- search for a strictly feasible point
  of a collection of linear matrix inequalities subject to affine
  equality constraints, via an auxiliary max-min-eigenvalue program;
* :func:`maximize_trace` -- maximize ``trace(P)`` over ``P >= 0`` with an
  affine constraint ``L(P) <= 0``.

Both are driven by a primal-dual path-following interior-point method
with Nesterov-Todd scaling.  Problem sizes here are tiny (matrix
dimensions of a few dozen at most on the decoupled path), so the
implementation favours robustness and determinism over asymptotics: the
iteration is started from a fixed multiple of the identity and contains
no randomized choices.

Complex (Hermitian) data enters through :func:`realify`, which maps a
Hermitian matrix to a real symmetric one with the same definiteness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "AffineMatrixMap",
    "SdpSolution",
    "SdpStatus",
    "SolverAbort",
    "assemble_from_basis",
    "find_strictly_feasible",
    "hermitian_basis",
    "maximize_trace",
    "realify",
    "symmetric_basis",
]

# Strict-feasibility margin (after the caller's scale normalization).
FEASIBLE_MARGIN = 1e-6
# Upper bounds that keep the auxiliary programs compact.
T_BOUND = 1e3
TRACE_BOUND = 1e8
_NULLSPACE_RTOL = 1e-10


class SolverAbort(RuntimeError):
    """Raised when a solve is abandoned due to a deadline or projected
    resource exhaustion (used by the benchmark harness)."""


class SdpStatus(Enum):
    STRICTLY_FEASIBLE = "StrictlyFeasible"
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SdpSolution:
    variables: np.ndarray
    status: SdpStatus
    certificate: float
    iterations: int
    matrix: Optional[np.ndarray] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (SdpStatus.STRICTLY_FEASIBLE, SdpStatus.OPTIMAL)


@dataclass
class AffineMatrixMap:
    """Affine symmetric-matrix-valued map ``x -> base + sum_i x_i coeffs[i]``."""

    base: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        k = self.base.shape[0]
        if self.base.shape != (k, k):
            raise ValueError(f"base must be square, got {self.base.shape}")
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (k, k):
            raise ValueError(f"coeffs must be (nvars, {k}, {k}), got {self.coeffs.shape}")
        scale = max(1.0, float(np.abs(self.base).max()),
                    float(np.abs(self.coeffs).max()) if self.coeffs.size else 1.0)
        asym = float(np.abs(self.base - self.base.T).max())
        if self.coeffs.size:
            asym = max(asym, float(np.abs(self.coeffs - self.coeffs.transpose(0, 2, 1)).max()))
        if asym > 1e-12 * scale:
            raise ValueError(f"map matrices are not symmetric (deviation {asym:.3g})")

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    @property
    def nvars(self) -> int:
        return self.coeffs.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.base + np.tensordot(x, self.coeffs, axes=1)

    def min_eigenvalue(self, x: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(x))[0])


def realify(h: np.ndarray) -> np.ndarray:
    """Real symmetric representation ``[[Re h, -Im h], [Im h, Re h]]`` of
    a Hermitian matrix; positive definite iff the input is, with every
    eigenvalue appearing twice.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got {h.shape}")
    scale = max(1.0, float(np.abs(h).max()))
    if float(np.abs(h - h.conj().T).max()) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    hs = (h + h.conj().T) / 2.0
    a, b = hs.real, hs.imag
    return np.block([[a, -b], [b, a]])


def hermitian_basis(p: int) -> list[np.ndarray]:
    """Canonical real basis of the p x p Hermitian matrices: the p
    diagonal units, then for each i<j the symmetric pair and the scaled
    skew pair.  Length p**2."""
    basis = []
    for i in range(p):
        e = np.zeros((p, p), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(p):
        for j in range(i + 1, p):
            e = np.zeros((p, p), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((p, p), dtype=complex)
            e[i, j] = 1.0j
            e[j, i] = -1.0j
            basis.append(e)
    return basis


def symmetric_basis(p: int) -> list[np.ndarray]:
    """Canonical basis of the p x p real symmetric matrices, diagonal
    units first.  Length p(p+1)/2."""
    basis = []
    for i in range(p):
        e = np.zeros((p, p))
        e[i, i] = 1.0
        basis.append(e)
    for i in range(p):
        for j in range(i + 1, p):
            e = np.zeros((p, p))
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
    return basis


def assemble_from_basis(basis: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(basis[0])
    for xi, e in zip(x, basis):
        out = out + xi * e
    return out


# ---------------------------------------------------------------------------
# Interior-point kernel
# ---------------------------------------------------------------------------

@dataclass
class _IpmResult:
    x: np.ndarray
    objective: float
    status: str              # converged | max_iter | stalled | diverged
    iterations: int
    relgap: float
    message: str = ""


def _check_deadline(deadline: Optional[float]):
    if deadline is not None and time.perf_counter() > deadline:
        raise SolverAbort("deadline exceeded")


def _sqrt_pair(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S^{1/2}, S^{-1/2}, S^{-1}) of a symmetric PD matrix via eigh.

    Eigenvalues are floored relative to the largest so a grazing contact
    with the boundary cannot produce non-finite scaling matrices.
    """
    w, q = np.linalg.eigh(s)
    floor = max(w[-1], 1e-100) * 1e-14
    w = np.maximum(w, floor)
    rw = np.sqrt(w)
    half = (q * rw) @ q.T
    ihalf = (q / rw) @ q.T
    inv = (q / w) @ q.T
    return half, ihalf, inv


def _nt_scaling(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nesterov-Todd scaling point W with W Z W = X, plus Z^{-1}."""
    zh, zih, zinv = _sqrt_pair(z)
    t = zh @ x @ zh
    th, _, _ = _sqrt_pair((t + t.T) / 2.0)
    w = zih @ th @ zih
    return (w + w.T) / 2.0, zinv


def _max_step(s: np.ndarray, ds: np.ndarray) -> float:
    """Largest alpha with s + alpha*ds >= 0 (s symmetric PD)."""
    try:
        ch = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return 0.0
    m = scipy.linalg.solve_triangular(ch, ds, lower=True)
    m = scipy.linalg.solve_triangular(ch, m.T, lower=True).T
    lam = float(np.linalg.eigvalsh((m + m.T) / 2.0)[0])
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _solve_sdp(
    objective: np.ndarray,
    blocks: Sequence[tuple[np.ndarray, np.ndarray]],
    *,
    gap_tol: float = 1e-9,
    feas_tol: float = 1e-8,
    max_iter: int = 200,
    deadline: Optional[float] = None,
) -> _IpmResult:
    """Maximize ``objective . x`` subject to ``F0 + sum_i x_i Fi >= 0``
    for every block ``(F0, Fi)``.

    Primal-dual path following on the conic dual pair with NT scaling;
    the Mehrotra sigma heuristic sets the centering weight.  Entirely
    deterministic: fixed identity-multiple start, no randomization.
    """
    b_raw = np.asarray(objective, dtype=float)
    nvar = b_raw.size
    # Dual form: C_k - sum_i y_i A_{k,i} = Z_k >= 0 with A = -F.
    A_raw, C_raw, dims = [], [], []
    for f0, fi in blocks:
        A_raw.append(-np.asarray(fi, dtype=float))
        C_raw.append(np.asarray(f0, dtype=float))
        dims.append(f0.shape[0])
    nblocks = len(A_raw)
    total_dim = sum(dims)

    # Projected per-iteration cost guard for the benchmark's large
    # unfolded problems: forming the Schur complement costs ~2*m^2*k^2.
    if deadline is not None:
        flops = sum(2.0 * nvar * nvar * d * d + nvar * d ** 3 for d in dims)
        bytes_needed = sum(nvar * d * d * 8.0 for d in dims)
        remaining = deadline - time.perf_counter()
        projected = 10.0 * flops / 2.0e10  # at least ~10 iterations to be useful
        if projected > max(remaining, 0.0) or bytes_needed > 2e9:
            raise SolverAbort(
                f"projected cost exceeds budget ({projected:.1f}s needed, "
                f"{max(remaining, 0.0):.1f}s left)"
            )

    # Equilibration: unit-scale every block, then every variable column.
    bscale = np.array([
        max(float(np.linalg.norm(C_raw[k])) / np.sqrt(dims[k]),
            max((float(np.linalg.norm(a)) / np.sqrt(dims[k]) for a in A_raw[k]), default=0.0),
            1e-10)
        for k in range(nblocks)
    ])
    A_list = [A_raw[k] / bscale[k] for k in range(nblocks)]
    C_list = [C_raw[k] / bscale[k] for k in range(nblocks)]
    vscale = np.ones(nvar)
    for i in range(nvar):
        col = max((float(np.linalg.norm(A_list[k][i])) for k in range(nblocks)), default=0.0)
        vscale[i] = max(col, 1e-10)
    A_list = [A_list[k] / vscale[:, None, None] for k in range(nblocks)]
    b = b_raw / vscale
    vecA = [a.reshape(nvar, -1) for a in A_list]

    bnorm = 1.0 + float(np.linalg.norm(b))
    cnorm = 1.0 + max(float(np.linalg.norm(c)) for c in C_list)

    # SDPT3-style identity-multiple start on the equilibrated data.
    X, Z = [], []
    for k in range(nblocks):
        anorms = np.linalg.norm(A_list[k].reshape(nvar, -1), axis=1) if nvar else np.zeros(0)
        xi = max(10.0, np.sqrt(dims[k]),
                 dims[k] * float(np.max((1.0 + np.abs(b)) / (1.0 + anorms))) if nvar else 0.0)
        eta = max(10.0, np.sqrt(dims[k]),
                  float(np.linalg.norm(C_list[k])),
                  float(anorms.max()) if nvar else 0.0)
        X.append(xi * np.eye(dims[k]))
        Z.append(eta * np.eye(dims[k]))
    y = np.zeros(nvar)

    def operator_A(mats):
        out = np.zeros(nvar)
        for va, m in zip(vecA, mats):
            out += va @ m.ravel()
        return out

    def finish(yv, status, it, relgap, msg=""):
        return _IpmResult(yv / vscale, float(b_raw @ (yv / vscale)), status, it, relgap, msg)

    best = None
    no_progress = 0
    best_merit = np.inf
    status, msg = "max_iter", ""
    it = 0
    for it in range(1, max_iter + 1):
        _check_deadline(deadline)
        rp = b - operator_A(X)
        Rd = [C_list[k] - Z[k] - np.tensordot(y, A_list[k], axes=1) for k in range(nblocks)]
        gap = sum(float(np.tensordot(X[k], Z[k])) for k in range(nblocks))
        mu = gap / total_dim
        pobj = sum(float(np.tensordot(C_list[k], X[k])) for k in range(nblocks))
        dobj = float(b @ y)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(rp)) / bnorm
        dinf = max(float(np.linalg.norm(r)) for r in Rd) / cnorm
        merit = relgap + pinf + dinf

        if relgap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            return finish(y, "converged", it, relgap)
        if merit < best_merit:
            if merit < 0.9 * best_merit:
                no_progress = 0
            best_merit = merit
            best = (y.copy(), dobj, relgap)
        else:
            no_progress += 1
        if no_progress >= 15:
            status, msg = "stalled", "no progress over 15 iterations"
            break
        if abs(dobj) > 1e14:
            status, msg = "diverged", f"objective diverged ({dobj:.3g})"
            break

        # NT scaling and Schur complement.
        try:
            Ws, Zinvs = [], []
            for k in range(nblocks):
                w, zinv = _nt_scaling(X[k], Z[k])
                Ws.append(w)
                Zinvs.append(zinv)
            M = np.zeros((nvar, nvar))
            WAW = []
            for k in range(nblocks):
                waw = np.einsum("ab,ibc,cd->iad", Ws[k], A_list[k], Ws[k], optimize=True)
                WAW.append(waw.reshape(nvar, -1))
                M += vecA[k] @ WAW[k].T
            if not np.all(np.isfinite(M)):
                status, msg = "stalled", "scaling matrices lost finiteness"
                break
            M = (M + M.T) / 2.0
            M[np.diag_indices_from(M)] += 1e-13 * (1.0 + np.abs(np.diag(M)))
            cho = scipy.linalg.cho_factor(M, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            status, msg = "stalled", "scaling/Schur factorization failed"
            break

        def direction(sigma_mu):
            rhs = rp.copy()
            for k in range(nblocks):
                rc = sigma_mu * Zinvs[k] - X[k]
                rhs -= vecA[k] @ rc.ravel()
                rhs += WAW[k] @ Rd[k].ravel()
            dy = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
            dZ, dX = [], []
            for k in range(nblocks):
                dz = Rd[k] - np.tensordot(dy, A_list[k], axes=1)
                rc = sigma_mu * Zinvs[k] - X[k]
                dx = rc - Ws[k] @ dz @ Ws[k]
                dZ.append((dz + dz.T) / 2.0)
                dX.append((dx + dx.T) / 2.0)
            return dy, dX, dZ

        # Step fraction: conservative while far from the central path.
        tau = 0.9 if merit > 1e-2 else (0.98 if merit > 1e-6 else 0.99)

        # Predictor for the centering weight, then the actual step.
        _, dXa, dZa = direction(0.0)
        ap = min(1.0, tau * min(_max_step(X[k], dXa[k]) for k in range(nblocks)))
        ad = min(1.0, tau * min(_max_step(Z[k], dZa[k]) for k in range(nblocks)))
        mu_aff = sum(
            float(np.tensordot(X[k] + ap * dXa[k], Z[k] + ad * dZa[k]))
            for k in range(nblocks)
        ) / total_dim
        sigma = min(0.8, max(1e-4, (max(mu_aff, 0.0) / mu) ** 3))

        dy, dX, dZ = direction(sigma * mu)
        ap = min(1.0, tau * min(_max_step(X[k], dX[k]) for k in range(nblocks)))
        ad = min(1.0, tau * min(_max_step(Z[k], dZ[k]) for k in range(nblocks)))
        if ap < 1e-10 and ad < 1e-10:
            status, msg = "stalled", "step lengths collapsed"
            break
        for k in range(nblocks):
            X[k] = X[k] + ap * dX[k]
            Z[k] = Z[k] + ad * dZ[k]
        y = y + ad * dy

    if best is not None and status in ("max_iter", "stalled"):
        yb, _, relgapb = best
        return finish(yb, status, it, relgapb, msg)
    return finish(y, status, it, np.inf, msg)


# ---------------------------------------------------------------------------
# Equality elimination
# ---------------------------------------------------------------------------

def _eliminate_equalities(nvars: int, equalities):
    """Particular solution and null-space basis of the stacked affine
    equations.  Returns (x0, N) or None when inconsistent."""
    if not equalities:
        return np.zeros(nvars), np.eye(nvars)
    E = np.vstack([np.asarray(a, dtype=float).reshape(1, -1) for a, _ in equalities])
    g = np.array([float(v) for _, v in equalities])
    if E.shape[1] != nvars:
        raise ValueError(f"equality coefficients have {E.shape[1]} entries, expected {nvars}")
    x0, *_ = np.linalg.lstsq(E, g, rcond=None)
    if float(np.linalg.norm(E @ x0 - g)) > 1e-8 * (1.0 + float(np.linalg.norm(g))):
        return None
    u, sv, vh = np.linalg.svd(E)
    if sv.size:
        rank = int(np.sum(sv > sv[0] * max(E.shape) * _NULLSPACE_RTOL))
    else:
        rank = 0
    N = vh[rank:].T
    return x0, N


def find_strictly_feasible(
    constraints: Sequence[AffineMatrixMap],
    equalities=(),
    *,
    deadline: Optional[float] = None,
    max_iter: int = 200,
) -> SdpSolution:
    """Search for ``x`` with every constraint map strictly positive
    definite, subject to the affine scalar equalities ``a . x = v``.

    The equalities are eliminated by projecting onto their null space;
    the remaining problem is solved as a max-min-eigenvalue program.  The
    reported certificate is the smallest eigenvalue over all constraint
    blocks, recomputed at the returned point; status is
    ``STRICTLY_FEASIBLE`` when it reaches ``1e-6`` (callers are expected
    to have normalized overall scale, e.g. by a trace equality), and
    ``INFEASIBLE`` otherwise, carrying the achieved margin.
    """
    nvars = constraints[0].nvars
    for c in constraints:
        if c.nvars != nvars:
            raise ValueError("constraint maps disagree on the variable count")

    elim = _eliminate_equalities(nvars, equalities)
    if elim is None:
        return SdpSolution(np.zeros(nvars), SdpStatus.INFEASIBLE, -np.inf, 0,
                           message="equality constraints are inconsistent")
    x0, N = elim

    def certificate_at(x_full):
        return min(c.min_eigenvalue(x_full) for c in constraints)

    if N.shape[1] == 0:
        cert = certificate_at(x0)
        status = SdpStatus.STRICTLY_FEASIBLE if cert >= FEASIBLE_MARGIN else SdpStatus.INFEASIBLE
        return SdpSolution(x0, status, cert, 0)

    # Project constraint maps onto the null space, dropping directions the
    # maps do not see (they stay at their particular-solution value).
    proj = []
    for c in constraints:
        base = c.evaluate(x0)
        coeffs = np.einsum("ikl,iw->wkl", c.coeffs, N) if c.coeffs.size else np.zeros((N.shape[1], c.dim, c.dim))
        proj.append((base, coeffs))
    norms = np.zeros(N.shape[1])
    for _, coeffs in proj:
        norms += np.linalg.norm(coeffs.reshape(coeffs.shape[0], -1), axis=1)
    live = norms > 1e-12 * (1.0 + norms.max())
    N = N[:, live]
    if N.shape[1] == 0:
        cert = certificate_at(x0)
        status = SdpStatus.STRICTLY_FEASIBLE if cert >= FEASIBLE_MARGIN else SdpStatus.INFEASIBLE
        return SdpSolution(x0, status, cert, 0)
    nw = N.shape[1]

    blocks = []
    for base, coeffs in proj:
        coeffs = coeffs[live]
        k = base.shape[0]
        aug = np.concatenate([coeffs, -np.eye(k)[None]], axis=0)
        blocks.append((base, aug))
    # Keep t bounded so the auxiliary program is compact: 1 - t/T_BOUND >= 0.
    bound_coeffs = np.zeros((nw + 1, 1, 1))
    bound_coeffs[-1, 0, 0] = -1.0 / T_BOUND
    blocks.append((np.array([[1.0]]), bound_coeffs))

    obj = np.zeros(nw + 1)
    obj[-1] = 1.0
    try:
        res = _solve_sdp(obj, blocks, max_iter=max_iter, deadline=deadline)
    except SolverAbort:
        raise
    x_full = x0 + N @ res.x[:-1]
    cert = certificate_at(x_full)

    if cert >= FEASIBLE_MARGIN:
        return SdpSolution(x_full, SdpStatus.STRICTLY_FEASIBLE, cert, res.iterations)
    if res.status in ("converged", "stalled", "max_iter") and res.relgap < 1e-5:
        return SdpSolution(x_full, SdpStatus.INFEASIBLE, cert, res.iterations,
                           message=f"max-margin program converged to {cert:.3g}")
    return SdpSolution(x_full, SdpStatus.NUMERICAL_FAILURE, cert, res.iterations,
                       message=res.message or f"solver status {res.status}")


def maximize_trace(
    p_dim: int,
    lmap: AffineMatrixMap,
    *,
    hermitian: bool = False,
    deadline: Optional[float] = None,
    max_iter: int = 200,
) -> SdpSolution:
    """Maximize ``trace(P)`` over ``P >= 0`` subject to ``L(P) <= 0``.

    ``P`` is parameterized in :func:`symmetric_basis` order (or
    :func:`hermitian_basis` when ``hermitian=True``), and ``lmap`` must
    give ``L`` in the same coordinates -- already realified when the data
    is complex.  Returns the optimizer in ``solution.matrix``.
    """
    basis = hermitian_basis(p_dim) if hermitian else symmetric_basis(p_dim)
    nvars = len(basis)
    if lmap.nvars != nvars:
        raise ValueError(f"L-map has {lmap.nvars} variables, basis has {nvars}")
    c = np.array([float(np.trace(e).real) for e in basis])

    if hermitian:
        p_coeffs = np.stack([realify(e) for e in basis])
        p_base = np.zeros((2 * p_dim, 2 * p_dim))
    else:
        p_coeffs = np.stack(basis)
        p_base = np.zeros((p_dim, p_dim))

    blocks = [
        (p_base, p_coeffs),
        (-lmap.base, -lmap.coeffs),
        # Artificial trace bound, normalized: 1 - trace(P)/TRACE_BOUND >= 0.
        (np.array([[1.0]]), (-c / TRACE_BOUND).reshape(nvars, 1, 1)),
    ]
    try:
        res = _solve_sdp(c, blocks, max_iter=max_iter, deadline=deadline)
    except SolverAbort:
        raise
    x = res.x
    p_star = assemble_from_basis(basis, x)
    p_star = (p_star + p_star.conj().T) / 2.0
    trace = float(np.trace(p_star).real)

    if trace >= 0.99 * TRACE_BOUND:
        return SdpSolution(x, SdpStatus.NUMERICAL_FAILURE, trace, res.iterations,
                           matrix=p_star, message="objective appears unbounded")
    converged = res.status == "converged" or (
        res.status in ("max_iter", "stalled") and res.relgap <= 1e-6
    )
    if not converged:
        return SdpSolution(x, SdpStatus.NUMERICAL_FAILURE, trace, res.iterations,
                           matrix=p_star,
                           message=res.message or f"solver status {res.status}")
    return SdpSolution(x, SdpStatus.OPTIMAL, trace, res.iterations, matrix=p_star)
