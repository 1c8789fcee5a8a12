import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Strict IEEE evaluation keeps the compiled products bit-identical to numpy.
if sys.platform == "win32":
    flags = ["/fp:strict"]
else:
    flags = ["-O2", "-ffp-contract=off", "-fno-fast-math"]

extensions = [
    Extension(
        "spectral_lab._ckernels",
        ["src/spectral_lab/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
