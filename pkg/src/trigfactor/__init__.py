"""Sum-of-hermitian-squares factorization of PSD matrix trigonometric
polynomials in one and two variables, with numeric certificate verification
on the torus."""

import os as _os

# TRIGFACTOR_THREADS caps internal parallelism.  The BLAS thread pools
# honour their environment variables only at import time, so seed them
# here, before numpy loads.
_threads = _os.environ.get("TRIGFACTOR_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                 "VECLIB_MAXIMUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .matpoly import (MatrixPoly1, MatrixPoly2, PencilPair,
                      ToeplitzTruncation, adjoint, add, eval_1d, eval_2d,
                      fourier_coeffs_1d, hermitian_square_sum, load_poly,
                      multiply, poly_from_dict, poly_to_dict, regroup_blocks,
                      sample_grid_1d, save_poly, toeplitz_truncation)
from .errors import (ConvergenceError, DomainError, EmptySetError,
                     FactorizationError, NotPsdError, TrigfactorError)

__version__ = "0.1.0"

__all__ = [
    "MatrixPoly1", "MatrixPoly2", "PencilPair", "ToeplitzTruncation",
    "adjoint", "add", "eval_1d", "eval_2d", "fourier_coeffs_1d",
    "hermitian_square_sum", "load_poly", "multiply", "poly_from_dict",
    "poly_to_dict", "regroup_blocks", "sample_grid_1d", "save_poly",
    "toeplitz_truncation",
    "ConvergenceError", "DomainError", "EmptySetError", "FactorizationError",
    "NotPsdError", "TrigfactorError",
    "__version__",
]
