"""Build script for the optional compiled kernel backend.

The package works without the extension (a pure-Python twin of every kernel
ships in zeroth/_backend/pure.py); building it just makes the hot loops fast.
Set ZEROTH_NO_EXT=1 to skip compilation entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain
            sys.stderr.write(f"warning: skipping compiled backend ({exc})\n")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            sys.stderr.write(f"warning: could not build {ext.name} ({exc}); "
                             "the pure-Python backend will be used\n")


ext_modules = []
if not os.environ.get("ZEROTH_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "zeroth._backend._ckern",
                    sources=["src/zeroth/_backend/_ckern.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
