import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-python fallback backend is selected at import time when the
    # compiled core is absent, so a cython-less build is still functional.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "setloss._backend.fastcore",
                ["src/setloss/_backend/fastcore.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
