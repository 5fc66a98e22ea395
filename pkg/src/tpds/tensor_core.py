"""Dense third-order tensors and the T-product algebra.

A third-order tensor ``T`` of shape ``n x m x r`` is a stack of ``r``
frontal slices, each an ``n x m`` real matrix.  The T-product multiplies
two such tensors by circular convolution along the third mode; it is
realised either directly through the block-circulant unfolding or, much
more cheaply, block-wise in the Fourier domain (see :mod:`tpds.spectral`).

Slices are numbered 1..r in all documentation, matching the usual
subscript notation ``T_{::k}``; the array backing is 0-based.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor3",
    "bcirc",
    "bcirc_inv",
    "block_col",
    "block_row",
    "fold",
    "frobenius_norm",
    "t_identity",
    "tensor_allclose",
    "tensor_from_json",
    "tensor_to_json",
    "tinverse",
    "tprod",
    "ttranspose",
    "unfold",
    "zeros",
]

# Shared relative threshold used for every rank / singularity decision.
RANK_RTOL = 1e-10
# A Fourier block is deemed singular when sigma_min <= max(n,m)*sigma_max*1e-12.
SINGULAR_RTOL = 1e-12


class Tensor3:
    """Dense real third-order tensor stored slice-major.

    Parameters
    ----------
    slices : array_like
        Array of shape ``(r, n, m)``: ``slices[k]`` is frontal slice k+1.

    The data is copied and made read-only; every operation in this module
    is a pure function of its arguments.
    """

    __slots__ = ("data",)

    def __init__(self, slices):
        arr = np.array(slices, dtype=float)
        if arr.ndim != 3:
            raise ValueError(f"expected a (r, n, m) array, got shape {arr.shape}")
        arr.setflags(write=False)
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return self.data.shape[2]

    @property
    def r(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        """Dimensions as ``(n, m, r)``."""
        return (self.n, self.m, self.r)

    def slice(self, k: int) -> np.ndarray:
        """Frontal slice ``T_{::k}`` (1-based ``k``)."""
        if not 1 <= k <= self.r:
            raise IndexError(f"slice index {k} out of range 1..{self.r}")
        return self.data[k - 1]

    def __repr__(self) -> str:
        return f"Tensor3(n={self.n}, m={self.m}, r={self.r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Tensor3) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.dims, self.data.tobytes()))


def zeros(n: int, m: int, r: int) -> Tensor3:
    return Tensor3(np.zeros((r, n, m)))


def t_identity(n: int, r: int) -> Tensor3:
    """T-identity: first frontal slice is I_n, all others zero."""
    data = np.zeros((r, n, n))
    data[0] = np.eye(n)
    return Tensor3(data)


def tensor_allclose(a: Tensor3, b: Tensor3, rtol: float = 1e-10, atol: float = 1e-12) -> bool:
    return a.dims == b.dims and np.allclose(a.data, b.data, rtol=rtol, atol=atol)


def frobenius_norm(t: Tensor3) -> float:
    return float(np.linalg.norm(t.data))


def bcirc(t: Tensor3) -> np.ndarray:
    """Block-circulant unfolding: the ``nr x mr`` matrix whose (p, q)
    block is slice ``1 + ((p - q) mod r)``."""
    n, m, r = t.dims
    out = np.empty((n * r, m * r))
    for p in range(r):
        for q in range(r):
            out[p * n:(p + 1) * n, q * m:(q + 1) * m] = t.data[(p - q) % r]
    return out


def unfold(t: Tensor3) -> np.ndarray:
    """Vertical unfolding: slices stacked into an ``nr x m`` matrix."""
    return t.data.reshape(t.r * t.n, t.m)


def fold(mat: np.ndarray, n: int, r: int) -> Tensor3:
    """Inverse of :func:`unfold`; ``mat`` must have ``n*r`` rows."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != n * r:
        raise ValueError(f"cannot fold shape {mat.shape} into ({n}, ., {r})")
    return Tensor3(mat.reshape(r, n, mat.shape[1]))


def bcirc_inv(mat: np.ndarray, n: int, r: int, check: bool = True) -> Tensor3:
    """Recover a tensor from its block-circulant unfolding.

    Extracts the first block column.  With ``check=True`` (default) the
    input must actually be block circulant (within a small relative
    tolerance); pass ``check=False`` to accept the first block column of
    an arbitrary matrix.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != n * r or mat.shape[1] % r != 0:
        raise ValueError(f"shape {mat.shape} is not an (n*r, m*r) block matrix")
    m = mat.shape[1] // r
    t = Tensor3(mat[:, :m].reshape(r, n, m))
    if check:
        scale = max(1.0, float(np.abs(mat).max()))
        err = float(np.abs(bcirc(t) - mat).max())
        if err > 1e-10 * scale:
            raise ValueError(f"matrix is not block circulant (deviation {err:.3g})")
    return t


def tprod(a: Tensor3, b: Tensor3) -> Tensor3:
    """T-product ``a * b``: circular convolution of frontal slices.

    Computed in the Fourier domain, O(n m h r + nmr log r) instead of the
    O(n m h r^2) block-circulant matrix product; the two agree because the
    block-circulant unfolding is a ring homomorphism.
    """
    if a.m != b.n:
        raise ValueError(f"mode-2/1 mismatch: {a.dims} * {b.dims}")
    if a.r != b.r:
        raise ValueError(f"depth mismatch: {a.r} vs {b.r}")
    fa = np.fft.fft(a.data, axis=0)
    fb = np.fft.fft(b.data, axis=0)
    fc = np.einsum("kij,kjl->kil", fa, fb)
    return Tensor3(np.fft.ifft(fc, axis=0).real)


def ttranspose(t: Tensor3) -> Tensor3:
    """T-transpose: transpose each slice and reverse slices 2..r.

    Pure re-indexing, so ``bcirc(ttranspose(t)) == bcirc(t).T`` holds
    bitwise.
    """
    idx = np.concatenate(([0], np.arange(t.r - 1, 0, -1)))
    return Tensor3(t.data[idx].transpose(0, 2, 1))


def tinverse(t: Tensor3) -> Tensor3:
    """T-inverse of a mode-square tensor, computed block-wise in the
    Fourier domain (O(n^3 r) versus O(n^3 r^3) for inverting the dense
    unfolding).

    Raises
    ------
    numpy.linalg.LinAlgError
        If any Fourier block is singular, i.e. its smallest singular
        value falls below ``max(n, m) * sigma_max * 1e-12``.
    """
    n, m, r = t.dims
    if n != m:
        raise ValueError(f"tensor is not square in modes 1-2: {t.dims}")
    blocks = np.fft.fft(t.data, axis=0)
    inv = np.empty_like(blocks)
    eye = np.eye(n)
    for k in range(r):
        sv = np.linalg.svd(blocks[k], compute_uv=False)
        if sv[-1] <= n * sv[0] * SINGULAR_RTOL:
            raise np.linalg.LinAlgError(
                f"tensor is T-singular: Fourier block {k + 1} has "
                f"sigma_min={sv[-1]:.3g}, sigma_max={sv[0]:.3g}"
            )
        inv[k] = np.linalg.solve(blocks[k], eye)
    return Tensor3(np.fft.ifft(inv, axis=0).real)


def block_row(a: Tensor3, b: Tensor3) -> Tensor3:
    """Concatenate along the second mode: ``[a  b]``."""
    if a.r != b.r or a.n != b.n:
        raise ValueError(f"cannot row-concatenate {a.dims} and {b.dims}")
    return Tensor3(np.concatenate([a.data, b.data], axis=2))


def block_col(a: Tensor3, b: Tensor3) -> Tensor3:
    """Concatenate along the first mode: ``[a; b]`` (written ``[a b]^T``)."""
    if a.r != b.r or a.m != b.m:
        raise ValueError(f"cannot column-concatenate {a.dims} and {b.dims}")
    return Tensor3(np.concatenate([a.data, b.data], axis=1))


# ---------------------------------------------------------------------------
# Tensor JSON format: {"dims": [n, m, r], "slices": [S_1, ..., S_r]} where
# each S_k is an n-list of m-lists of numbers (row-major frontal slices).
# ---------------------------------------------------------------------------

def tensor_to_json(t: Tensor3) -> dict:
    return {
        "dims": [t.n, t.m, t.r],
        "slices": [t.data[k].tolist() for k in range(t.r)],
    }


def tensor_from_json(obj: dict) -> Tensor3:
    if not isinstance(obj, dict) or "dims" not in obj or "slices" not in obj:
        raise ValueError("tensor JSON must be an object with 'dims' and 'slices'")
    dims = obj["dims"]
    if (not isinstance(dims, (list, tuple)) or len(dims) != 3
            or not all(isinstance(d, int) and d >= 1 for d in dims)):
        raise ValueError(f"invalid dims {dims!r}: expected three positive integers")
    n, m, r = dims
    slices = obj["slices"]
    if not isinstance(slices, list) or len(slices) != r:
        raise ValueError(f"expected {r} slices, got {len(slices) if isinstance(slices, list) else type(slices)}")
    try:
        arr = np.array(slices, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"slices are not numeric arrays: {exc}") from exc
    if arr.shape != (r, n, m):
        raise ValueError(f"slices have shape {arr.shape}, dims say {(r, n, m)}")
    return Tensor3(arr)


def save_tensor(t: Tensor3, path) -> None:
    with open(path, "w") as fh:
        json.dump(tensor_to_json(t), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_tensor(path) -> Tensor3:
    with open(path) as fh:
        return tensor_from_json(json.load(fh))
