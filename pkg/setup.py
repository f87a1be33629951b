"""Build script: compiles the optional Cython kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time), so the extension is marked optional and any build failure
is non-fatal.
"""

import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tabsema.kernels._ckernels",
                ["src/tabsema/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except Exception:  # the extension (and its scipy BLAS glue) is optional
    ext_modules = []

setup(ext_modules=ext_modules)
