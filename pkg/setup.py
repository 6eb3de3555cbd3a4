"""Build script: compiles the optional Cython kernel core.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a missing compiler or Cython only costs speed.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "rlhedge.kernels._core",
                ["src/rlhedge/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"rlhedge: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
