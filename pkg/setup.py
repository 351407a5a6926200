"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so any build failure here downgrades to a warning instead
of aborting the install.  Set EXHIER_PURE=1 to skip the extension entirely.
"""

import os
import sys

from setuptools import setup, Extension
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class optional_build_ext(build_ext):
    def run(self):
        try:
            build_ext.run(self)
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError) as exc:
            sys.stderr.write(f"warning: extension build failed ({exc}); "
                             "falling back to the pure-Python kernels\n")

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError) as exc:
            sys.stderr.write(f"warning: building {ext.name} failed ({exc}); "
                             "falling back to the pure-Python kernels\n")


ext_modules = []
cmdclass = {}
if not os.environ.get("EXHIER_PURE"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("exhier._ckernels", ["src/exhier/_ckernels.pyx"])],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        sys.stderr.write("warning: Cython unavailable; using pure-Python kernels\n")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
