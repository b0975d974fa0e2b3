"""Matrix-free tensor-product finite element kernel laboratory.

Sum-factorized Kronecker operators, an SIPG discretization of the 3D
Poisson problem, software binary16 with error correction, a
mixed-precision multigrid-preconditioned FGMRES solver, and analytical
GPU performance models (bank conflicts, flop counting, rooflines).
"""

from ._core import HAVE_COMPILED

__version__ = "0.1.0"

__all__ = ["HAVE_COMPILED", "__version__"]
