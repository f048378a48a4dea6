import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None and os.environ.get("STULC_NO_EXTENSION") != "1":
    extensions = cythonize(
        [
            Extension(
                "stulc.underwater._kernel",
                ["src/stulc/underwater/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
