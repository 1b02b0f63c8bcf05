import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python fallback is used at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MODELBENCH_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "modelbench.pointflow._flowcore",
                ["src/modelbench/pointflow/_flowcore.pyx"],
                # keep float results identical to the Python fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
