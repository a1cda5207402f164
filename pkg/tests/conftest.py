"""Shared environment setup for the test suite.

The worker-count tests need numba's thread pool to allow 8 workers even on
smaller hosts; the package sets this up on import, but do it here first so
the guarantee doesn't depend on import order within test modules.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")
