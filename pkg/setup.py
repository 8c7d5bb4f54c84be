import os

import numpy as np
from setuptools import Extension, setup

# EVMAPLOC_NO_EXT=1 skips the compiled core; the package then runs on the
# pure-Python kernels.
extensions = []
if os.getenv("EVMAPLOC_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = cythonize(
            [
                Extension(
                    "evmaploc._ckernels",
                    ["src/evmaploc/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=extensions)
