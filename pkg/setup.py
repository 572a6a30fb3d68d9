"""Build shim for the optional compiled kernel.

The package is pure Python plus one Cython extension holding the hot
inner loop (the per-trace TLS susceptibility sum). If Cython or a C
compiler is unavailable the build falls back to the pure-numpy kernel
selected at import time; nothing else changes.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tlspectro.kernels._core",
                ["src/tlspectro/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
