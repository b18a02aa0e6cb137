"""Simulation of skew products with intermingled and thick attractors."""

import os
import warnings

# BASINLAB_THREADS caps the numba worker pool; it must be set before numba loads
_threads = os.environ.get("BASINLAB_THREADS")
if _threads and "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = _threads
warnings.filterwarnings("ignore", message=".*TBB.*")

__version__ = "0.1.0"
