import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "fedgid._core",
    sorted(glob.glob("src/*.cpp")) + ["bindings/core_module.cpp"],
    include_dirs=["include", "vendor", "/usr/include/eigen3"],
    cxx_std=20,
    # keep Eigen on its unaligned code paths so results are run-to-run
    # byte-identical (see src/CMakeLists.txt)
    define_macros=[("EIGEN_MAX_ALIGN_BYTES", "0")],
    extra_compile_args=["-O2", "-march=native"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
