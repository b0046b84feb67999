"""Builds the optional compiled engine.

The extension is a convenience, not a requirement: if Cython or a C
compiler is missing the install still succeeds and the package runs on
the interpreted kernel.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as e:  # missing compiler, etc.
            print(f"skipping compiled engine: {e}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            print(f"skipping compiled engine {ext.name}: {e}")


ext_modules = []
if not os.environ.get("ADL_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("adl._engine_c", ["src/adl/_engine_c.pyx"])],
            language_level="3",
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
