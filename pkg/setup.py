"""Builds the optional compiled Fisher kernel.

The package works without it (a numpy fallback is selected at import time),
so a failed extension build degrades performance, not functionality.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "graphscrub._fisher_kernel",
                ["src/graphscrub/_fisher_kernel.pyx", "src/graphscrub/_fisher_core.c"],
                include_dirs=[np.get_include(), "src/graphscrub"],
                extra_compile_args=["-O3", "-march=native", "-ffast-math"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
