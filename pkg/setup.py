# Compiles the histogram-boosting kernels. The package still works without
# the extension (pure-numpy fallback selected at import), so a failed build
# is tolerated: python setup.py builds what it can.
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dte_lab.boosting._kernels_cy",
                ["src/dte_lab/boosting/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps compiled float arithmetic IEEE-elementwise,
                # matching the numpy backend bit-for-bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
