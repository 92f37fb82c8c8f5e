import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or with PRIOMAC_NO_EXT=1)
# the package installs pure-Python and selects the fallback at import time.
ext_modules = []
if os.environ.get("PRIOMAC_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        # -ffp-contract=off: the fuzzy centroid must match the pure-Python
        # kernel bit for bit, so the compiler must not fuse mul+add.
        ext = Extension(
            "priomac._kernels",
            ["src/priomac/_kernels.pyx"],
            extra_compile_args=["-O2", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        pass

setup(ext_modules=ext_modules)
