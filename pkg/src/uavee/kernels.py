"""Dispatch between the numba and pure-numpy kernel implementations.

Selection is controlled by the UAVEE_NUMBA environment variable:
  "0"/"off"  force the numpy fallback
  "1"/"on"   require numba (ImportError if unavailable)
  unset      use numba when importable, numpy otherwise

`benchmarks/bench_kernels.py` compares the two paths on a realistic workload.
"""

import os

_flag = os.environ.get("UAVEE_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "false", "numpy"):
    from . import _kernels_numpy as _impl

    USING_NUMBA = False
elif _flag in ("1", "on", "true", "numba"):
    from . import _kernels_numba as _impl

    USING_NUMBA = True
else:
    try:
        from . import _kernels_numba as _impl

        USING_NUMBA = True
    except ImportError:
        from . import _kernels_numpy as _impl

        USING_NUMBA = False

IMPL_NAME = "numba" if USING_NUMBA else "numpy"

eval_terms = _impl.eval_terms
scatter_add = _impl.scatter_add
scatter_hess = _impl.scatter_hess
scatter_jdj = _impl.scatter_jdj
