"""Builds the optional compiled kernel extension.

The package is fully functional without it (pure-numpy fallback selected
at import); the extension is marked optional so a failed compile does not
fail the install.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "miisac._kernels",
                ["src/miisac/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
