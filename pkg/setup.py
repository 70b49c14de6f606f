"""Build script compiling the optional accelerated simulation kernel.

The package installs and runs fine without the compiled extension: every
routine in ``sitdyn._kernel`` has a pure-Python twin in
``sitdyn._fallback`` and the dispatch in ``sitdyn._backend`` picks
whichever is available at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    extensions = [
        Extension(
            "sitdyn._kernel",
            ["src/sitdyn/_kernel.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    ext_modules = cythonize(extensions, language_level=3)
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
