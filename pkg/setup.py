import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # The package falls back to the pure-numpy kernel when the extension
    # is unavailable; see hlmrf/admm.py.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "hlmrf._kernel",
                ["src/hlmrf/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
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
