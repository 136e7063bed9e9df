import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    # optional=True: if the C toolchain is missing the install still succeeds
    # and the package falls back to the pure-numpy kernels at import time.
    extensions = cythonize(
        [
            Extension(
                "nlos_autocal._kernels._core",
                ["src/nlos_autocal/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
