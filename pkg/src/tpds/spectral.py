"""Fourier-domain block diagonalization, T-EVD / T-SVD, and stability tests.

The block-circulant unfolding of an ``n x m x r`` tensor is block
diagonalized by the DFT along the third mode: block j (1-based) is

    T_j = sum_k  T_{::k} * w^{(j-1)(k-1)},        w = exp(-2*pi*i/r),

i.e. the unnormalized forward DFT of the slice sequence, with 1/r on the
inverse.  Everything computed from the blocks (ranks, eigenvalues,
definiteness, LMI feasibility, Riccati solutions, feedback gains) is
invariant to the unitary-vs-unnormalized choice, and this convention is
what standard FFT kernels implement.

Because the tensors are real, the blocks satisfy the conjugate symmetry
``T_{r+2-j} = conj(T_j)``; block 1 is real, and so is block r/2+1 when r
is even.  :func:`from_fourier` insists on that symmetry -- repairing a
violated spectrum is never silent, use :func:`symmetrize` explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import Tensor3, ttranspose

__all__ = [
    "FourierBlocks",
    "TupleSpectrum",
    "eigentuples",
    "from_fourier",
    "is_stable",
    "is_tpd",
    "is_tpsd",
    "is_tsymmetric",
    "singular_tuples",
    "spectral_radius",
    "symmetrize",
    "teig",
    "to_fourier",
    "tsvd",
    "unique_block_indices",
]

CONJ_SYMMETRY_TOL = 1e-8
IMAG_RESIDUE_TOL = 1e-10
REAL_BLOCK_TOL = 1e-12
DEFECTIVE_COND = 1e12


@dataclass(frozen=True)
class FourierBlocks:
    """The r complex ``n x m`` diagonal blocks of the DFT-conjugated
    block-circulant unfolding, stored as a ``(r, n, m)`` array."""

    blocks: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.blocks, dtype=complex)
        if arr.ndim != 3:
            raise ValueError(f"expected (r, n, m) blocks, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @property
    def m(self) -> int:
        return self.blocks.shape[2]

    @property
    def r(self) -> int:
        return self.blocks.shape[0]

    def block(self, j: int) -> np.ndarray:
        """Block j (1-based)."""
        return self.blocks[j - 1]

    def conjugate_symmetry_error(self) -> float:
        """Max deviation from block_{r+2-j} = conj(block_j)."""
        r = self.r
        mirrored = np.conj(self.blocks[(-np.arange(r)) % r])
        return float(np.abs(self.blocks - mirrored).max())


@dataclass(frozen=True)
class TupleSpectrum:
    """Per-structural-index tuples across Fourier blocks.

    ``values[i, j-1]`` is the i-th eigenvalue (or singular value) of
    block j; within each block the entries are sorted by descending
    modulus, ties broken by descending real then imaginary part.
    """

    values: np.ndarray

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def tuple(self, i: int) -> np.ndarray:
        return self.values[i]

    def entries(self) -> np.ndarray:
        """All entries flattened (the multiset of block eigen/singular values)."""
        return self.values.ravel()

    def max_modulus(self) -> float:
        return float(np.abs(self.values).max())


def unique_block_indices(r: int) -> list[int]:
    """The 1-based block indices of the unique frequencies of a real
    signal: 1..floor(r/2)+1.  Blocks r+2-j for j in 2..ceil(r/2)... are
    conjugates of these and carry no independent information."""
    return list(range(1, r // 2 + 2))


def mirror_index(j: int, r: int) -> int:
    """The 1-based index whose block is the conjugate of block j."""
    return 1 if j == 1 else r + 2 - j


def is_real_block(j: int, r: int) -> bool:
    """Whether block j of a real tensor is itself real (self-conjugate)."""
    return j == 1 or (r % 2 == 0 and j == r // 2 + 1)


def to_fourier(t: Tensor3) -> FourierBlocks:
    """Fourier blocks of a tensor: the unnormalized DFT of the slice
    sequence."""
    return FourierBlocks(np.fft.fft(t.data, axis=0))


def from_fourier(fb: FourierBlocks) -> Tensor3:
    """Inverse DFT along the block index, returning a real tensor.

    Raises
    ------
    ValueError
        If the blocks violate conjugate symmetry (the reconstruction
        would not be real).  Callers that intend to repair the spectrum
        must call :func:`symmetrize` first.
    """
    scale = max(1.0, float(np.abs(fb.blocks).max()))
    err = fb.conjugate_symmetry_error()
    if err > CONJ_SYMMETRY_TOL * scale:
        raise ValueError(
            f"Fourier blocks violate conjugate symmetry by {err:.3g} "
            f"(tolerance {CONJ_SYMMETRY_TOL * scale:.3g}); symmetrize first"
        )
    data = np.fft.ifft(fb.blocks, axis=0)
    residue = float(np.abs(data.imag).max())
    if residue > IMAG_RESIDUE_TOL * scale:
        raise ValueError(f"imaginary residue {residue:.3g} after inverse transform")
    return Tensor3(data.real)


def symmetrize(fb: FourierBlocks) -> FourierBlocks:
    """Average each block with the conjugate of its mirror, enforcing the
    conjugate symmetry of a real tensor's spectrum."""
    r = fb.r
    mirrored = np.conj(fb.blocks[(-np.arange(r)) % r])
    return FourierBlocks((fb.blocks + mirrored) / 2.0)


def _sort_desc(values: np.ndarray) -> np.ndarray:
    """Order by descending modulus, ties by descending real then imaginary."""
    order = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return order


def teig(t: Tensor3) -> tuple[TupleSpectrum, FourierBlocks]:
    """T-eigendecomposition via per-block EVDs.

    Returns the eigentuples (entry j of tuple i is the i-th eigenvalue of
    block j) and the per-block eigenvector matrices.

    Raises
    ------
    numpy.linalg.LinAlgError
        If a block is numerically defective (eigenvector condition number
        above 1e12).
    """
    n, m, r = t.dims
    if n != m:
        raise ValueError(f"tensor is not square in modes 1-2: {t.dims}")
    blocks = np.fft.fft(t.data, axis=0)
    values = np.empty((n, r), dtype=complex)
    vectors = np.empty_like(blocks)
    for k in range(r):
        w, u = np.linalg.eig(blocks[k])
        cond = np.linalg.cond(u)
        if not np.isfinite(cond) or cond > DEFECTIVE_COND:
            raise np.linalg.LinAlgError(
                f"Fourier block {k + 1} is defective (eigenvector cond {cond:.3g})"
            )
        order = _sort_desc(w)
        values[:, k] = w[order]
        vectors[k] = u[:, order]
    return TupleSpectrum(values), FourierBlocks(vectors)


def eigentuples(t: Tensor3) -> TupleSpectrum:
    """Eigentuples only; tolerates defective blocks (no eigenvectors needed)."""
    n, m, r = t.dims
    if n != m:
        raise ValueError(f"tensor is not square in modes 1-2: {t.dims}")
    blocks = np.fft.fft(t.data, axis=0)
    values = np.empty((n, r), dtype=complex)
    for k in range(r):
        w = np.linalg.eigvals(blocks[k])
        values[:, k] = w[_sort_desc(w)]
    return TupleSpectrum(values)


def tsvd(t: Tensor3) -> tuple[TupleSpectrum, FourierBlocks, FourierBlocks]:
    """T-SVD via per-block SVDs.

    Returns the singular tuples and the two T-orthogonal factors as
    per-block unitary matrices (U_j, V_j with ``U_j S_j V_j^* = T_j``).
    """
    n, m, r = t.dims
    blocks = np.fft.fft(t.data, axis=0)
    p = min(n, m)
    values = np.empty((p, r), dtype=complex)
    ublocks = np.empty((r, n, n), dtype=complex)
    vblocks = np.empty((r, m, m), dtype=complex)
    for k in range(r):
        u, s, vh = np.linalg.svd(blocks[k], full_matrices=True)
        values[:, k] = s
        ublocks[k] = u
        vblocks[k] = vh.conj().T
    return TupleSpectrum(values), FourierBlocks(ublocks), FourierBlocks(vblocks)


def singular_tuples(t: Tensor3) -> TupleSpectrum:
    n, m, r = t.dims
    blocks = np.fft.fft(t.data, axis=0)
    values = np.empty((min(n, m), r), dtype=complex)
    for k in range(r):
        values[:, k] = np.linalg.svd(blocks[k], compute_uv=False)
    return TupleSpectrum(values)


def is_tsymmetric(t: Tensor3, tol: float = 1e-10) -> bool:
    if t.n != t.m:
        return False
    scale = max(1.0, float(np.abs(t.data).max()))
    return float(np.abs(ttranspose(t).data - t.data).max()) <= tol * scale


def _hermitian_eigrange(t: Tensor3) -> tuple[float, float]:
    """(min, max) eigenvalue over all Hermitized Fourier blocks."""
    blocks = np.fft.fft(t.data, axis=0)
    lo, hi = np.inf, -np.inf
    for k in range(t.r):
        h = (blocks[k] + blocks[k].conj().T) / 2.0
        w = np.linalg.eigvalsh(h)
        lo = min(lo, float(w[0]))
        hi = max(hi, float(w[-1]))
    return lo, hi


def is_tpd(t: Tensor3) -> bool:
    """T-positive definiteness: every Fourier block Hermitian positive
    definite.  Requires a T-symmetric input (raises ``ValueError``
    otherwise)."""
    if not is_tsymmetric(t):
        raise ValueError("input is not T-symmetric")
    lo, hi = _hermitian_eigrange(t)
    return lo > 1e-10 * max(hi, 0.0)


def is_tpsd(t: Tensor3) -> bool:
    """T-positive semidefiniteness (same block test with a one-sided
    tolerance)."""
    if not is_tsymmetric(t):
        raise ValueError("input is not T-symmetric")
    lo, hi = _hermitian_eigrange(t)
    return lo >= -1e-10 * max(hi, 1e-30)


def spectral_radius(a: Tensor3) -> float:
    """Largest eigentuple-entry modulus (the spectral radius of the
    block-circulant unfolding)."""
    return eigentuples(a).max_modulus()


def is_stable(a: Tensor3) -> bool:
    """Discrete-time stability: every eigentuple entry strictly inside
    the unit circle (modulus below ``1 - 1e-9``)."""
    return spectral_radius(a) < 1.0 - 1e-9
