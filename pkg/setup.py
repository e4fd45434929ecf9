import sys

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("force._evalcore", ["src/force/_evalcore.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # The package still works without the extension; force.backend falls back
    # to the pure-Python evaluator at import time.
    sys.stderr.write("warning: Cython not available, skipping the compiled evaluator\n")

setup(ext_modules=ext_modules)
