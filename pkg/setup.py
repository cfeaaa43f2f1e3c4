"""Build hook for the optional compiled stepper kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the build therefore tolerates a missing compiler.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "accwave._kernels._stepper_cy",
                ["src/accwave/_kernels/_stepper_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
