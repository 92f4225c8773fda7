"""Build script for the optional compiled tape kernel.

If Cython or a C compiler is unavailable the package still installs and
falls back to the pure-Python tape at import time.
"""
import os

from setuptools import setup


def _extensions():
    if os.environ.get("DRHMC_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "drhmc._tape_ext",
        ["src/drhmc/_tape_ext.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
