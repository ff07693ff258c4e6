"""Stabilizers for almost representations of su(2) and the quantum torus, and quantization equivalence."""
import os

_threads = os.environ.get("REPSTAB_THREADS")
if _threads:
    # must run before numpy loads its BLAS
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
