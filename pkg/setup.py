"""Build script for the compiled prox kernel.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the inner solver loop faster.
"""

import numpy
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
                "boxot._proxcore",
                ["src/boxot/_proxcore.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
