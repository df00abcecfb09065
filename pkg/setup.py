"""Build script for the optional compiled kernels.

The package works without the extension: cobar.kernels falls back to the
pure numpy implementations when the compiled module is missing.  Set
COBAR_SKIP_EXTENSION=1 to install without attempting to compile.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"building {ext.name} failed ({exc}); using pure-Python fallback")


extensions = []
if not os.environ.get("COBAR_SKIP_EXTENSION"):
    try:
        import numpy
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "cobar.kernels._accel",
                    ["src/cobar/kernels/_accel.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        warnings.warn("Cython or numpy unavailable at build time; installing pure-Python only")

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
