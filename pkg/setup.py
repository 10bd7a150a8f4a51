"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python backend is selected
at import time), so a failed compile downgrades to a warning instead of
aborting the install.
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
                "padicband._kernels._core",
                ["src/padicband/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(
        "padicband: Cython extension not built (%s); "
        "falling back to the pure-Python backend\n" % exc
    )

setup(ext_modules=ext_modules)
