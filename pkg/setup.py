from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-Python install; the counting kernel falls back to _pykernel.
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("dynpsn.graphlets._ckernel", ["src/dynpsn/graphlets/_ckernel.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
