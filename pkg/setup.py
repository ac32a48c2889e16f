import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

ext_modules = [
    Extension(
        "mecoffload._kernels._cykernels",
        ["src/mecoffload/_kernels/_cykernels.pyx"],
        extra_compile_args=["-O3"],
        include_dirs=[numpy.get_include()],
    )
]

setup(ext_modules=cythonize(ext_modules, language_level=3))
