import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python fallback is selected at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DUALCONN_NO_EXT"):
    extensions = [
        Extension(
            "dualconn._kernels._sch",
            ["src/dualconn/_kernels/_sch.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        ),
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules, zip_safe=False)
