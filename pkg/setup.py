"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension; causemine._kernels
falls back to the pure NumPy implementation when the compiled module is
missing (e.g. no C compiler at install time).
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "causemine._kernels._ckernels",
                ["src/causemine/_kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
