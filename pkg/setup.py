from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("jadce._kernels_cy", ["src/jadce/_kernels_cy.pyx"])],
        language_level="3",
    )
except ImportError:
    # The package runs on the pure-numpy kernel fallback without the extension.
    ext_modules = []

setup(ext_modules=ext_modules)
