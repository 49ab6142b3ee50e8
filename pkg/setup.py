"""Build the optional compiled kernels; the package falls back to numpy without them."""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure install, _pykernels takes over
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "pmerge._kernels",
                ["src/pmerge/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
