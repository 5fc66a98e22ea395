"""T-product tensor algebra and data-driven control of T-product-based
dynamical systems (TPDSs).

The package provides:

* :mod:`tpds.tensor_core` -- dense third-order tensors and the T-product
  algebra (block-circulant / unfold operators, T-transpose, T-inverse,
  block tensors);
* :mod:`tpds.spectral` -- Fourier-domain block diagonalization, T-EVD,
  T-SVD, T-positive-definiteness and stability tests;
* :mod:`tpds.lmi` -- a small dense semidefinite solver (strict LMI
  feasibility and trace maximization);
* :mod:`tpds.tqr` -- model-based T-product quadratic regulation via
  per-block discrete Riccati equations;
* :mod:`tpds.informativity` -- data-informativity tests and controller
  synthesis for system identification, stabilization by state feedback
  and TQR, each with a dense unfolding-based counterpart;
* :mod:`tpds.sim` -- TPDS simulation, experiment generation and cost
  evaluation;
* :mod:`tpds.bench` / :mod:`tpds.cli` -- benchmark harness and the
  ``tpds`` command line.
"""

from .tensor_core import (
    Tensor3,
    bcirc,
    bcirc_inv,
    block_col,
    block_row,
    fold,
    t_identity,
    tensor_from_json,
    tensor_to_json,
    tinverse,
    tprod,
    ttranspose,
    unfold,
    zeros,
)
from .spectral import (
    FourierBlocks,
    TupleSpectrum,
    eigentuples,
    from_fourier,
    is_stable,
    is_tpd,
    is_tpsd,
    is_tsymmetric,
    singular_tuples,
    spectral_radius,
    symmetrize,
    teig,
    to_fourier,
    tsvd,
)

__version__ = "0.1.0"
