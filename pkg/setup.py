"""Build script: compiles the hot-loop kernel extension when a toolchain is
available, otherwise installs the pure-Python fallback only."""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    # -fcx-limited-range keeps complex multiplies inline (no __muldc3
    # calls); NaNs still propagate, so divergence detection is unaffected.
    ext_modules = cythonize(
        [
            Extension(
                "qnisim._kernels",
                ["src/qnisim/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fcx-limited-range"],
                define_macros=[("_GNU_SOURCE", "1")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - degraded environments only
    print(f"warning: compiled kernels disabled ({exc}); "
          "falling back to pure-Python kernels", file=sys.stderr)

setup(ext_modules=ext_modules)
