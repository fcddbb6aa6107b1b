"""Build the optional compiled kernels.

The package works without them (``moebxii._kernels_py`` is the fallback),
so a missing compiler or Cython only skips the extension.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("MOEBXII_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("moebxii._kernels", ["src/moebxii/_kernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
