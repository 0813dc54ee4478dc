"""Build script: compiles the optional Cython kernel core.

The package works without the extension (pure-Python kernels are selected
at import time), so the extension is marked optional and any build failure
degrades to the fallback instead of failing the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "inpipe.kernels._core",
                sources=["src/inpipe/kernels/_core.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
