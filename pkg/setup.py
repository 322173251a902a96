"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time); set MQAG_NO_EXTENSION=1 to skip the build.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MQAG_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/mqag/_kernels/_speedups.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
