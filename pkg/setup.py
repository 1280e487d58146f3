import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "specsr._omp_kernel",
    ["src/specsr/_omp_kernel.pyx"],
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

# Without Cython the package installs in pure-Python form; sparse_coding
# falls back to the numpy kernel at import time.
setup(
    ext_modules=cythonize([ext], compiler_directives={"language_level": "3"})
    if cythonize is not None
    else [],
)
