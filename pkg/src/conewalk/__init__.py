"""Random walks conditioned to stay in cones: samplers, exact oracles and limit checks."""

import os as _os

# the compiled kernels use the OpenMP layer; must be set before numba is imported
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
