"""Builds the optional compiled SE(3) kernel extension.

The package works without it: vocl._kernels falls back to the vectorized
numpy implementation when the extension is absent.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "vocl._kernels._se3",
                ["src/vocl/_kernels/_se3.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
