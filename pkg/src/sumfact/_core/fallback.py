"""Pure-numpy fallback for the compiled contraction kernels.

einsum without ``optimize`` keeps the reduction single-threaded and
deterministic, so report bytes do not depend on BLAS thread counts.
"""

import numpy as np


def contract_f8(u, m, out):
    np.einsum("ik,okr->oir", m, u, out=out)


def contract_f4(u, m, out):
    np.einsum("ik,okr->oir", m, u, out=out)
