from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "evocae.engine._convkernels",
                ["src/evocae/engine/_convkernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )

# Without Cython the package installs pure-Python; the engine falls back to
# the numpy kernel backend at import time.
setup(ext_modules=ext_modules)
