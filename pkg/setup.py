"""Build script: compiles the optional kernel extension when a toolchain is present.

The package stays fully functional without the extension; the pure-Python
kernels are selected at import time if the compiled module is missing.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Tolerate a missing compiler instead of failing the whole install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure is non-fatal
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: could not build {ext.name} ({exc}); "
                  "falling back to pure-Python kernels", file=sys.stderr)


extension = Extension(
    "dialoplan.kernels._native",
    ["src/dialoplan/kernels/_native.pyx"],
)

try:
    from Cython.Build import cythonize

    ext_modules = cythonize([extension], compiler_directives={"language_level": "3"})
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
