"""Build the optional compiled queue kernel.

The package works without it; ``adaptix.qcore`` falls back to the
pure-Python engine when the extension is missing.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ADAPTIX_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "adaptix._qcore",
                    sources=["src/adaptix/_qcore.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )

setup(ext_modules=ext_modules)
