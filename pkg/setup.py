"""Build the optional Cython kernels; the package works without them."""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext

ext_modules = []
if not os.environ.get("VULNMINE_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("vulnmine._speedups", ["src/vulnmine/_speedups.pyx"], extra_compile_args=["-O2"])],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )


class optional_build_ext(build_ext):
    # A failed compile leaves the pure-Python kernels in charge.
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: building vulnmine._speedups failed ({exc}); using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: building {ext.name} failed ({exc}); using pure-Python kernels")


setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
