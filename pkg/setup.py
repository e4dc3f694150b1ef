import os

from setuptools import Extension, setup

# The compiled walk kernel is optional: dronemob falls back to a numpy
# implementation when the extension is missing.
ext_modules = []
if os.environ.get("DRONEMOB_NO_EXTENSION", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "dronemob._walk",
                    ["src/dronemob/_walk.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
