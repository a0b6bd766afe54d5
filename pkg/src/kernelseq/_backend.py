"""Pick the compiled kernels when available, numpy otherwise.

Set ``KERNELSEQ_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from kernelseq import _kernels_py as python_kernels

compiled_kernels = None
if os.environ.get("KERNELSEQ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from kernelseq import _ckernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"
