"""Build script: compiles the optional kernel extension.

The compiled backend is a speedup, not a requirement; if Cython or a C
compiler is unavailable the package falls back to the NumPy kernels at
import time.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


def make_extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "linhash._kernels.ckernels",
        ["src/linhash/_kernels/ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


class optional_build_ext(build_ext):
    """Tolerate a missing toolchain instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken
            print(f"warning: compiled kernels skipped ({exc}); "
                  "using the NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "using the NumPy fallback")


setup(ext_modules=make_extensions(), cmdclass={"build_ext": optional_build_ext})
