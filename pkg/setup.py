from setuptools import Extension, setup

# -ffp-contract=off keeps the compiler from fusing mul+add into FMA, so the
# compiled kernels round exactly like the numpy fallback. -fno-math-errno lets
# sqrt inline to the hardware instruction (still correctly rounded).
ext_modules = [
    Extension(
        "madpl_lab._fastops",
        sources=["src/madpl_lab/_fastops.pyx"],
        extra_compile_args=["-ffp-contract=off", "-fno-math-errno"],
    )
]


if __name__ == "__main__":
    from Cython.Build import cythonize
    import numpy as np

    setup(
        ext_modules=cythonize(ext_modules, language_level="3"),
        include_dirs=[np.get_include()],
    )
