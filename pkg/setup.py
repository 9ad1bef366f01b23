"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (numpy fallback,
selected at import in devpic.kernels). A failed compile therefore only
warns instead of aborting the install.
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
                "devpic.kernels._cy_impl",
                sources=["src/devpic/kernels/_cy_impl.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # no cython / no compiler: pure-python install
    print(f"devpic: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
