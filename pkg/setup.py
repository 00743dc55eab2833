"""Build script: compiles the optional C graph-kernel extension.

The package works without the extension (a pure-Python implementation of
the same kernels is selected at import time), so a missing compiler or
Cython only costs speed, never functionality.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("layerpm._kernels_c", ["src/layerpm/_kernels_c.pyx"])],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
