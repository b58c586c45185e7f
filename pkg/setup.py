import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import
    cythonize = None

NP_RANDOM_LIB = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = [
    Extension(
        "cascade_ldp._ckernels",
        ["src/cascade_ldp/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[NP_RANDOM_LIB],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FMA contraction: the sampler must match the numpy fallback bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize is not None
    else [],
)
