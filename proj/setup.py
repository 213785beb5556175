import glob
import subprocess

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def include_dirs_for(package, fallback):
    try:
        out = subprocess.run(["pkg-config", "--cflags-only-I", package],
                             check=True, capture_output=True, text=True)
        dirs = [tok[2:] for tok in out.stdout.split() if tok.startswith("-I")]
        return dirs or fallback
    except (OSError, subprocess.CalledProcessError):
        return fallback


sources = sorted(glob.glob("src/*.cpp")) + ["python/bindings.cpp"]

ext = Pybind11Extension(
    "spinqoct._core",
    sources,
    include_dirs=["include", "vendor",
                  *include_dirs_for("eigen3", ["/usr/include/eigen3"])],
    libraries=["fftw3"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
