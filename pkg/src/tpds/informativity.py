"""Data-informativity tests and controller synthesis for TPDSs.

Given experiment data ``(v, y, z)`` recorded from

    x(t+1) = a * x(t) + b * u(t),

the tests decide whether *every* system consistent with the data admits
the desired conclusion -- unique identification, stabilization by state
feedback, or T-product quadratic regulation -- and, where applicable,
synthesize a common controller.  Each test decouples into one small
problem per Fourier block; certificates are computed only for the unique
frequencies (block 1..floor(r/2)+1) and mirrored by conjugation, which
both halves the work and guarantees a real reconstructed gain.

Every test also has a dense ``*_unfolded`` counterpart that works on the
block-circulant matrices directly; these serve as cross-validation
oracles and as the baseline in the benchmark harness.

Sign convention: the control law is ``u(t) = -k * x(t)`` throughout, so
the synthesized gains are ``k = -v*s*(y*s)^{-1}`` (stabilization) and
``K_j = -V_j Y_j^+`` (TQR).  With these signs the certified closed loop
is ``a - b*k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lmi
from .lmi import AffineMatrixMap, SdpSolution, SdpStatus
from .tensor_core import RANK_RTOL, Tensor3, bcirc, tensor_to_json
from .spectral import FourierBlocks, from_fourier, is_real_block, is_tpd, is_tpsd, unique_block_indices
from . import tqr as tqr_mod

__all__ = [
    "ExperimentData",
    "InformativityReport",
    "NotInformativeError",
    "check_stabilization",
    "check_stabilization_unfolded",
    "check_sysid",
    "check_sysid_unfolded",
    "check_tqr",
    "check_tqr_unfolded",
    "identify",
    "identify_unfolded",
    "synth_stabilizing_gain",
    "synth_stabilizing_gain_unfolded",
    "synth_tqr_gain",
    "synth_tqr_gain_unfolded",
    "verify_stabilizing_gain",
]


class NotInformativeError(RuntimeError):
    """Raised when synthesis is requested on non-informative data."""


@dataclass
class ExperimentData:
    """State/input data tensors ``(v, y, z)`` with their dimensions.

    ``y`` holds states 0..l-1, ``z`` the one-step-shifted states 1..l,
    and ``v`` the applied inputs, each with ``l*h`` lateral columns.
    """

    v: Tensor3
    y: Tensor3
    z: Tensor3
    l: int
    h: int

    def __post_init__(self):
        if self.y.dims != self.z.dims:
            raise ValueError(f"y dims {self.y.dims} != z dims {self.z.dims}")
        if self.v.m != self.y.m or self.v.r != self.y.r:
            raise ValueError(f"v dims {self.v.dims} do not match y dims {self.y.dims}")
        if self.l * self.h != self.y.m:
            raise ValueError(f"l*h = {self.l * self.h} != data width {self.y.m}")

    @property
    def n(self) -> int:
        return self.y.n

    @property
    def m(self) -> int:
        return self.v.n

    @property
    def r(self) -> int:
        return self.y.r

    @property
    def lh(self) -> int:
        return self.y.m

    @classmethod
    def from_tensors(cls, v: Tensor3, y: Tensor3, z: Tensor3,
                     l: Optional[int] = None, h: Optional[int] = None) -> "ExperimentData":
        """Wrap raw tensors; the l/h split defaults to h = 1."""
        width = y.m
        if l is None and h is None:
            l, h = width, 1
        elif l is None:
            l = width // h
        elif h is None:
            h = width // l
        return cls(v=v, y=y, z=z, l=l, h=h)

    def fourier(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Y_j, Z_j, V_j) block stacks, shape (r, ., lh)."""
        return (
            np.fft.fft(self.y.data, axis=0),
            np.fft.fft(self.z.data, axis=0),
            np.fft.fft(self.v.data, axis=0),
        )

    def to_json(self) -> dict:
        return {
            "v": tensor_to_json(self.v),
            "y": tensor_to_json(self.y),
            "z": tensor_to_json(self.z),
            "l": self.l,
            "h": self.h,
        }


@dataclass
class InformativityReport:
    """Verdict plus per-block evidence; certificates index by 1-based j."""

    task: str
    verdict: bool
    blocks: list[dict]
    certificates: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    gain: Optional[Tensor3] = None

    def to_json(self) -> dict:
        out = {"task": self.task, "verdict": self.verdict, "blocks": self.blocks}
        if self.gain is not None:
            out["gain"] = tensor_to_json(self.gain)
        return out


def _rank(mat: np.ndarray) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > max(mat.shape) * sv[0] * RANK_RTOL))


# ---------------------------------------------------------------------------
# System identification
# ---------------------------------------------------------------------------

def check_sysid(d: ExperimentData) -> InformativityReport:
    """Unique identifiability: every block of ``[y; v]`` must have full
    column-space rank ``n + m``."""
    yb, _, vb = d.fourier()
    need = d.n + d.m
    blocks = []
    verdict = True
    for j in range(1, d.r + 1):
        rk = _rank(np.vstack([yb[j - 1], vb[j - 1]]))
        blocks.append({"j": j, "rank": rk, "required": need, "ok": rk == need})
        verdict &= rk == need
    return InformativityReport(task="sysid", verdict=verdict, blocks=blocks)


def identify(d: ExperimentData, *, strict: bool = True) -> tuple[Tensor3, Tensor3]:
    """Recover ``(a, b)`` block-wise: ``[A_j B_j] = Z_j pinv([Y_j; V_j])``.

    With ``strict=True`` (default) the data must be informative for
    system identification (raises :class:`NotInformativeError`
    otherwise); ``strict=False`` returns the least-squares fit, which is
    the canonical consistent pair whenever one exists.
    """
    if strict and not check_sysid(d).verdict:
        raise NotInformativeError("data are not informative for system identification")
    yb, zb, vb = d.fourier()
    ablocks = np.empty((d.r, d.n, d.n), dtype=complex)
    bblocks = np.empty((d.r, d.n, d.m), dtype=complex)
    for i in range(d.r):
        g = zb[i] @ np.linalg.pinv(np.vstack([yb[i], vb[i]]))
        ablocks[i] = g[:, :d.n]
        bblocks[i] = g[:, d.n:]
    return from_fourier(FourierBlocks(ablocks)), from_fourier(FourierBlocks(bblocks))


def check_sysid_unfolded(d: ExperimentData) -> bool:
    """Dense counterpart: rank of the stacked block-circulant data."""
    return _rank(np.vstack([bcirc(d.y), bcirc(d.v)])) == (d.n + d.m) * d.r


def identify_unfolded(d: ExperimentData) -> tuple[np.ndarray, np.ndarray]:
    """Dense least-squares fit on the block-circulant matrices."""
    yb, vb = bcirc(d.y), bcirc(d.v)
    g = bcirc(d.z) @ np.linalg.pinv(np.vstack([yb, vb]))
    nr = d.n * d.r
    return g[:, :nr], g[:, nr:]


# ---------------------------------------------------------------------------
# LMI construction helpers
# ---------------------------------------------------------------------------

def _column_equilibration(*mats: np.ndarray) -> np.ndarray:
    """Diagonal scales making the stacked data columns unit norm.

    Replacing ``(Y, Z, V)`` by ``(Y D, Z D, V D)`` is a congruence of
    every LMI built below, so feasibility margins, trace optima and the
    synthesized gains are unchanged while the solver sees columns of
    comparable size (experiment columns grow geometrically when the open
    loop is unstable).
    """
    norms = np.sqrt(sum(np.sum(np.abs(m) ** 2, axis=0) for m in mats))
    peak = float(norms.max()) if norms.size else 1.0
    return 1.0 / np.maximum(norms, max(peak, 1.0) * 1e-14)


def _s_basis(t_rows: int, n_cols: int, real: bool) -> np.ndarray:
    """Real coordinate directions of the certificate matrix S: all unit
    real entries, followed (complex case) by all unit imaginary entries."""
    nv = t_rows * n_cols
    es = np.zeros((nv if real else 2 * nv, t_rows, n_cols), dtype=float if real else complex)
    for dd in range(nv):
        es[dd, dd // n_cols, dd % n_cols] = 1.0
    if not real:
        for dd in range(nv):
            es[nv + dd, dd // n_cols, dd % n_cols] = 1.0j
    return es

def _entry_rows(c: np.ndarray, es: np.ndarray, real: bool) -> list[np.ndarray]:
    """Rows of the linear system ``c @ S = 0`` in the S coordinates."""
    prod = np.einsum("pq,dqn->dpn", c, es)
    flat = prod.reshape(prod.shape[0], -1)
    rows = [flat.real.T[k] for k in range(flat.shape[1])]
    if not real or np.iscomplexobj(c):
        rows += [flat.imag.T[k] for k in range(flat.shape[1])]
    return rows


def _stabilization_map(y: np.ndarray, z: np.ndarray, es: np.ndarray, real: bool):
    """Affine map of ``[[YS, ZS], [(ZS)^*, YS]]`` (Hermitized, realified
    for complex blocks) plus the symmetry equalities and the scale
    normalization ``Re trace(YS) = n``."""
    n = y.shape[0]
    nv = es.shape[0]
    ys = np.einsum("pq,dqn->dpn", y, es)
    zs = np.einsum("pq,dqn->dpn", z, es)
    coeffs = np.empty((nv, 2 * n if real else 4 * n, 2 * n if real else 4 * n))
    for dd in range(nv):
        m = np.block([[ys[dd], zs[dd]], [zs[dd].conj().T, ys[dd]]])
        m = (m + m.conj().T) / 2.0
        coeffs[dd] = m.real if real else lmi.realify(m)
    cmap = AffineMatrixMap(np.zeros_like(coeffs[0]), coeffs)

    equalities = []
    herm_defect = ys - ys.conj().transpose(0, 2, 1)
    for p in range(n):
        for q in range(p, n):
            col = herm_defect[:, p, q]
            if q > p:
                equalities.append((col.real, 0.0))
            if not real:
                equalities.append((col.imag, 0.0))
    trace_row = np.einsum("dpp->d", ys).real
    equalities.append((trace_row, float(n)))
    return cmap, equalities


def _block_certificate(sol: SdpSolution, es: np.ndarray) -> np.ndarray:
    return np.tensordot(sol.variables, es, axes=1)


def _mirror_assemble(values: dict[int, np.ndarray], r: int, shape: tuple[int, int]) -> Tensor3:
    """Fill all r blocks from the unique ones by conjugation and invert."""
    arr = np.zeros((r,) + shape, dtype=complex)
    for j, val in values.items():
        arr[j - 1] = val
        if j > 1:
            arr[(r + 1 - j) % r] = np.conj(val)
    return from_fourier(FourierBlocks(arr))


# ---------------------------------------------------------------------------
# Stabilization by state feedback
# ---------------------------------------------------------------------------

def check_stabilization(d: ExperimentData, *, deadline: Optional[float] = None) -> InformativityReport:
    """Per-block strict feasibility of the stabilization LMIs

        Y_j S_j Hermitian,   [[Y_j S_j, Z_j S_j], [S_j^* Z_j^*, Y_j S_j]] > 0,

    solved on the unique frequencies with certificates mirrored by
    conjugation."""
    yb, zb, vb = d.fourier()
    blocks: list[dict] = [{} for _ in range(d.r)]
    certificates: dict[int, np.ndarray] = {}
    verdict = True
    for j in unique_block_indices(d.r):
        i = j - 1
        real = is_real_block(j, d.r)
        scale = _column_equilibration(yb[i], zb[i], vb[i])
        es = _s_basis(d.lh, d.n, real)
        cmap, eqs = _stabilization_map(yb[i] * scale, zb[i] * scale, es, real)
        sol = lmi.find_strictly_feasible([cmap], eqs, deadline=deadline)
        if sol.status is SdpStatus.NUMERICAL_FAILURE:
            raise RuntimeError(f"SDP failure on block {j}: {sol.message}")
        ok = sol.status is SdpStatus.STRICTLY_FEASIBLE
        verdict &= ok
        detail = {"j": j, "status": sol.status.value, "margin": sol.certificate, "mirrored": False}
        blocks[i] = detail
        certificates[j] = scale[:, None] * _block_certificate(sol, es)
        jm = 1 if j == 1 else d.r + 2 - j
        if jm != j:
            blocks[jm - 1] = {**detail, "j": jm, "mirrored": True}
            certificates[jm] = np.conj(certificates[j])
    return InformativityReport(task="stabilization", verdict=verdict,
                               blocks=blocks, certificates=certificates)


def synth_stabilizing_gain(d: ExperimentData,
                           report: Optional[InformativityReport] = None,
                           *, deadline: Optional[float] = None) -> Tensor3:
    """Stabilizing feedback for ``u = -k * x``:
    ``K_j = -V_j S_j (Y_j S_j)^{-1}`` from the LMI certificates, assembled
    by the inverse transform.  The certified closed loop is ``a - b*k``
    for every pair consistent with the data."""
    if report is None:
        report = check_stabilization(d, deadline=deadline)
    if not report.verdict:
        raise NotInformativeError("data are not informative for stabilization")
    if not report.certificates:
        raise ValueError("report carries no certificates")
    _, _, vb = d.fourier()
    yb, _, _ = d.fourier()
    kblocks: dict[int, np.ndarray] = {}
    for j in unique_block_indices(d.r):
        s = report.certificates[j]
        ys = yb[j - 1] @ s
        kblocks[j] = -vb[j - 1] @ s @ np.linalg.inv(ys)
    gain = _mirror_assemble(kblocks, d.r, (d.m, d.n))
    report.gain = gain
    return gain


def verify_stabilizing_gain(d: ExperimentData, k: Tensor3,
                            *, deadline: Optional[float] = None) -> InformativityReport:
    """Data-driven certification that ``a - b*k`` is stable for *every*
    pair ``(a, b)`` consistent with the data: per block, feasibility of
    the stabilization LMI with the additional constraint
    ``V_j S_j = -K_j (Y_j S_j)``, which pins the certified closed loop
    ``Z_j S_j (Y_j S_j)^{-1}`` to ``A_j - B_j K_j``."""
    if k.n != d.m or k.m != d.n or k.r != d.r:
        raise ValueError(f"gain dims {k.dims} do not match data ({d.m}, {d.n}, {d.r})")
    yb, zb, vb = d.fourier()
    kb = np.fft.fft(k.data, axis=0)
    blocks: list[dict] = [{} for _ in range(d.r)]
    verdict = True
    for j in unique_block_indices(d.r):
        real = is_real_block(j, d.r)
        es = _s_basis(d.lh, d.n, real)
        cmap, eqs = _stabilization_map(yb[j - 1], zb[j - 1], es, real)
        closed = vb[j - 1] + kb[j - 1] @ yb[j - 1]
        for row in _entry_rows(closed, es, real):
            eqs.append((row, 0.0))
        sol = lmi.find_strictly_feasible([cmap], eqs, deadline=deadline)
        if sol.status is SdpStatus.NUMERICAL_FAILURE:
            raise RuntimeError(f"SDP failure on block {j}: {sol.message}")
        ok = sol.status is SdpStatus.STRICTLY_FEASIBLE
        verdict &= ok
        detail = {"j": j, "status": sol.status.value, "margin": sol.certificate, "mirrored": False}
        blocks[j - 1] = detail
        jm = 1 if j == 1 else d.r + 2 - j
        if jm != j:
            blocks[jm - 1] = {**detail, "j": jm, "mirrored": True}
    return InformativityReport(task="verify-stabilization", verdict=verdict, blocks=blocks)


def check_stabilization_unfolded(d: ExperimentData, *, deadline: Optional[float] = None) -> InformativityReport:
    """Dense counterpart: one LMI on the block-circulant matrices with a
    free (not block-circulant) certificate."""
    yb, zb = bcirc(d.y), bcirc(d.z)
    nr = d.n * d.r
    es = _s_basis(d.lh * d.r, nr, real=True)
    cmap, eqs = _stabilization_map(yb, zb, es, real=True)
    sol = lmi.find_strictly_feasible([cmap], eqs, deadline=deadline)
    if sol.status is SdpStatus.NUMERICAL_FAILURE:
        raise RuntimeError(f"SDP failure: {sol.message}")
    verdict = sol.status is SdpStatus.STRICTLY_FEASIBLE
    rep = InformativityReport(
        task="stabilization-unfolded", verdict=verdict,
        blocks=[{"j": 0, "status": sol.status.value, "margin": sol.certificate}],
    )
    rep.certificates[0] = _block_certificate(sol, es)
    return rep


def _circulant_average(mat: np.ndarray, n: int, m: int, r: int) -> np.ndarray:
    """Project an (nr x mr) matrix onto the block-circulant subspace by
    averaging over simultaneous cyclic block shifts."""
    view = mat.reshape(r, n, r, m)
    out = np.zeros_like(view)
    for g in range(r):
        out += np.roll(view, shift=(-g, -g), axis=(0, 2))
    return (out / r).reshape(n * r, m * r)


def synth_stabilizing_gain_unfolded(d: ExperimentData,
                                    report: Optional[InformativityReport] = None,
                                    *, deadline: Optional[float] = None) -> Tensor3:
    """Gain from the dense certificate.  The free certificate is averaged
    onto the block-circulant subspace first (the constraint set is
    invariant under simultaneous block shifts, so the average is again
    feasible), which makes the resulting gain a genuine tensor."""
    if report is None:
        report = check_stabilization_unfolded(d, deadline=deadline)
    if not report.verdict:
        raise NotInformativeError("data are not informative for stabilization")
    s = _circulant_average(report.certificates[0], d.lh, d.n, d.r)
    yb, vb = bcirc(d.y), bcirc(d.v)
    kmat = -vb @ s @ np.linalg.inv(yb @ s)
    from .tensor_core import bcirc_inv
    return bcirc_inv(kmat, d.m, d.r, check=False)


# ---------------------------------------------------------------------------
# TQR informativity
# ---------------------------------------------------------------------------

def _validate_weights(d: ExperimentData, q: Tensor3, rr: Tensor3) -> None:
    if q.dims != (d.n, d.n, d.r):
        raise ValueError(f"state weight dims {q.dims} do not match ({d.n}, {d.n}, {d.r})")
    if rr.dims != (d.m, d.m, d.r):
        raise ValueError(f"input weight dims {rr.dims} do not match ({d.m}, {d.m}, {d.r})")
    if not is_tpsd(q):
        raise ValueError("state weight q is not T-positive semidefinite")
    if not is_tpd(rr):
        raise ValueError("input weight rr is not T-positive definite")


def check_tqr(d: ExperimentData, q: Tensor3, rr: Tensor3,
              *, deadline: Optional[float] = None) -> InformativityReport:
    """TQR informativity, block by block: either the block identifies a
    unique pair whose LQR problem is solvable (full rank + PBH tests), or
    a certificate exists for the stabilization LMI restricted by
    ``V_j S_j = 0`` and ``Q_j Z_j S_j = 0``."""
    _validate_weights(d, q, rr)
    yb, zb, vb = d.fourier()
    qb = np.fft.fft(q.data, axis=0)
    blocks: list[dict] = [{} for _ in range(d.r)]
    verdict = True
    need = d.n + d.m
    for j in unique_block_indices(d.r):
        i = j - 1
        detail: dict = {"j": j, "mirrored": False}
        rk = _rank(np.vstack([yb[i], vb[i]]))
        detail["rank"] = rk
        route = None
        if rk == need:
            g = zb[i] @ np.linalg.pinv(np.vstack([yb[i], vb[i]]))
            aj, bj = g[:, :d.n], g[:, d.n:]
            solvable = (tqr_mod.pbh_stabilizable(aj, bj)
                        and tqr_mod.pbh_detectable((qb[i] + qb[i].conj().T) / 2.0, aj))
            detail["lqr_solvable"] = solvable
            if solvable:
                route = "identification"
        if route is None:
            real = is_real_block(j, d.r)
            es = _s_basis(d.lh, d.n, real)
            cmap, eqs = _stabilization_map(yb[i], zb[i], es, real)
            for row in _entry_rows(vb[i], es, real):
                eqs.append((row, 0.0))
            for row in _entry_rows(qb[i] @ zb[i], es, real):
                eqs.append((row, 0.0))
            sol = lmi.find_strictly_feasible([cmap], eqs, deadline=deadline)
            if sol.status is SdpStatus.NUMERICAL_FAILURE:
                raise RuntimeError(f"SDP failure on block {j}: {sol.message}")
            detail["margin"] = sol.certificate
            if sol.status is SdpStatus.STRICTLY_FEASIBLE:
                route = "nullspace"
        detail["route"] = route
        detail["ok"] = route is not None
        verdict &= route is not None
        blocks[i] = detail
        jm = 1 if j == 1 else d.r + 2 - j
        if jm != j:
            blocks[jm - 1] = {**detail, "j": jm, "mirrored": True}
    return InformativityReport(task="tqr", verdict=verdict, blocks=blocks)


def _lqr_trace_map(y: np.ndarray, z: np.ndarray, v: np.ndarray,
                   qh: np.ndarray, rh: np.ndarray, basis, real: bool) -> AffineMatrixMap:
    """L(P) = Y^* P Y - Z^* P Z - Y^* Q Y - V^* R V in the given P basis,
    realified for complex blocks."""
    base_c = -(y.conj().T @ qh @ y) - (v.conj().T @ rh @ v)
    base_c = (base_c + base_c.conj().T) / 2.0
    coeffs = []
    for e in basis:
        c = y.conj().T @ e @ y - z.conj().T @ e @ z
        c = (c + c.conj().T) / 2.0
        coeffs.append(c.real if real else lmi.realify(c))
    base = base_c.real if real else lmi.realify(base_c)
    return AffineMatrixMap(base, np.stack(coeffs))


def _constrained_right_inverse(y: np.ndarray, lmat: np.ndarray) -> np.ndarray:
    """Minimum-Frobenius right inverse of ``y`` with columns in the
    (numerical) null space of ``lmat``; raises ``RuntimeError`` when the
    residual criterion cannot be met."""
    lm = (lmat + lmat.conj().T) / 2.0
    w, u = np.linalg.eigh(lm)
    lnorm = float(np.abs(w).max()) if w.size else 0.0
    n = y.shape[0]
    best = None
    for rtol in (1e-7, 1e-5, 1e-9, 1e-3):
        mask = np.abs(w) <= max(lnorm * rtol, 1e-14)
        if not mask.any():
            continue
        nbasis = u[:, mask]
        ydag = nbasis @ np.linalg.pinv(y @ nbasis)
        id_err = float(np.abs(y @ ydag - np.eye(n)).max())
        resid = float(np.linalg.norm(lm @ ydag))
        if id_err <= 1e-7 * (1.0 + float(np.abs(y).max()) * float(np.abs(ydag).max())):
            if best is None or resid < best[0]:
                best = (resid, ydag)
    if best is None:
        raise RuntimeError("no right inverse of Y within the null space of L(P*)")
    resid, ydag = best
    if resid > 1e-6 * max(lnorm, 1.0) + 1e-9:
        raise RuntimeError(
            f"right-inverse residual {resid:.3g} exceeds tolerance "
            f"(|L| = {lnorm:.3g}); data may be on the informativity boundary"
        )
    return ydag


def synth_tqr_gain(d: ExperimentData, q: Tensor3, rr: Tensor3,
                   *, deadline: Optional[float] = None,
                   skip_check: bool = False) -> Tensor3:
    """Data-driven TQR gain: per block, maximize ``trace(P_j)`` subject
    to ``P_j >= 0`` and ``L_j(P_j) <= 0``; the optimizer equals the
    Riccati solution, and the gain is ``K_j = -V_j Y_j^+`` over a right
    inverse annihilated by ``L_j(P_j^*)``.  The closed loop is
    ``a - b*k``, matching the model-based :func:`tpds.tqr.solve_tqr`."""
    _validate_weights(d, q, rr)
    if not skip_check and not check_tqr(d, q, rr, deadline=deadline).verdict:
        raise NotInformativeError("data are not informative for TQR")
    yb, zb, vb = d.fourier()
    qb = np.fft.fft(q.data, axis=0)
    rb = np.fft.fft(rr.data, axis=0)
    kblocks: dict[int, np.ndarray] = {}
    for j in unique_block_indices(d.r):
        i = j - 1
        real = is_real_block(j, d.r)
        basis = lmi.symmetric_basis(d.n) if real else lmi.hermitian_basis(d.n)
        qh = (qb[i] + qb[i].conj().T) / 2.0
        rh = (rb[i] + rb[i].conj().T) / 2.0
        lmap = _lqr_trace_map(yb[i], zb[i], vb[i], qh, rh, basis, real)
        sol = lmi.maximize_trace(d.n, lmap, hermitian=not real, deadline=deadline)
        if sol.status is not SdpStatus.OPTIMAL:
            raise RuntimeError(f"trace maximization failed on block {j}: {sol.message}")
        pstar = sol.matrix
        lval = (yb[i].conj().T @ pstar @ yb[i] - zb[i].conj().T @ pstar @ zb[i]
                - yb[i].conj().T @ qh @ yb[i] - vb[i].conj().T @ rh @ vb[i])
        ydag = _constrained_right_inverse(yb[i], lval)
        kblocks[j] = -vb[i] @ ydag
    return _mirror_assemble(kblocks, d.r, (d.m, d.n))


def check_tqr_unfolded(d: ExperimentData, q: Tensor3, rr: Tensor3,
                       *, deadline: Optional[float] = None) -> bool:
    """Dense counterpart of :func:`check_tqr` on the block-circulant
    matrices (single rank + PBH route, else single constrained LMI)."""
    _validate_weights(d, q, rr)
    yb, zb, vb, qb = bcirc(d.y), bcirc(d.z), bcirc(d.v), bcirc(q)
    need = (d.n + d.m) * d.r
    if _rank(np.vstack([yb, vb])) == need:
        g = zb @ np.linalg.pinv(np.vstack([yb, vb]))
        nr = d.n * d.r
        amat, bmat = g[:, :nr], g[:, nr:]
        if tqr_mod.pbh_stabilizable(amat, bmat) and tqr_mod.pbh_detectable((qb + qb.T) / 2.0, amat):
            return True
    es = _s_basis(d.lh * d.r, d.n * d.r, real=True)
    cmap, eqs = _stabilization_map(yb, zb, es, real=True)
    for row in _entry_rows(vb, es, real=True):
        eqs.append((row, 0.0))
    for row in _entry_rows(qb @ zb, es, real=True):
        eqs.append((row, 0.0))
    sol = lmi.find_strictly_feasible([cmap], eqs, deadline=deadline)
    if sol.status is SdpStatus.NUMERICAL_FAILURE:
        raise RuntimeError(f"SDP failure: {sol.message}")
    return sol.status is SdpStatus.STRICTLY_FEASIBLE


def synth_tqr_gain_unfolded(d: ExperimentData, q: Tensor3, rr: Tensor3,
                            *, deadline: Optional[float] = None) -> Tensor3:
    """Dense TQR synthesis: one big trace maximization over the
    ``nr x nr`` symmetric matrices."""
    _validate_weights(d, q, rr)
    yb, zb, vb = bcirc(d.y), bcirc(d.z), bcirc(d.v)
    qb, rb = bcirc(q), bcirc(rr)
    nr = d.n * d.r
    basis = lmi.symmetric_basis(nr)
    lmap = _lqr_trace_map(yb, zb, vb, (qb + qb.T) / 2.0, (rb + rb.T) / 2.0, basis, real=True)
    sol = lmi.maximize_trace(nr, lmap, hermitian=False, deadline=deadline)
    if sol.status is not SdpStatus.OPTIMAL:
        raise RuntimeError(f"trace maximization failed: {sol.message}")
    pstar = sol.matrix
    lval = (yb.T @ pstar @ yb - zb.T @ pstar @ zb
            - yb.T @ ((qb + qb.T) / 2.0) @ yb - vb.T @ ((rb + rb.T) / 2.0) @ vb)
    ydag = _constrained_right_inverse(yb, lval)
    kmat = _circulant_average(np.real(-vb @ ydag), d.m, d.n, d.r)
    from .tensor_core import bcirc_inv
    return bcirc_inv(kmat, d.m, d.r, check=False)
