# Builds the optional compiled kernel extension. The package falls back to
# the numpy reference kernels at import time when the extension is absent,
# so a failed/skipped build is not fatal.
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "vitalstream.nnet.kernels._fast",
                ["src/vitalstream/nnet/kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
