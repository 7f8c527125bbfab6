import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "graspmc._kernels_c",
        ["src/graspmc/_kernels_c.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

# GRASPMC_NO_EXT=1 skips the compiled core; the numpy fallback is used.
if os.environ.get("GRASPMC_NO_EXT"):
    extensions = []

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
