"""Build hook for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot loops
(trajectory integration, Madelung stepping).  If Cython or a C compiler is
unavailable the build proceeds without the extension and the NumPy fallback
in sedsim._kernels_py is selected at import time.

-ffp-contract=off keeps the compiler from fusing multiply-adds so the
compiled kernels produce bit-identical results to the NumPy fallback.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sedsim._kernels",
                ["src/sedsim/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
