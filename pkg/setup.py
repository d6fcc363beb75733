import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: without Cython or a C compiler the package
# falls back to the NumPy implementation in dgpe._kernels_py.
ext_modules = []
if os.environ.get("DGPE_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dgpe._kernels",
                    ["src/dgpe/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
