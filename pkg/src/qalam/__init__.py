"""Handwritten Arabic character recognition with stroke-count model routing."""

import os

# Thread cap must land in the environment before numpy loads its BLAS.
_threads = os.environ.get("QALAM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
