"""Builds the latnet._core extension through CMake.

The CMake project is the single source of truth for compilation; this file
only points setuptools at it and copies the built module into place.
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DLATNET_BUILD_TESTS=OFF",
                "-DLATNET_BUILD_PYTHON=ON",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "latnet_python",
             "--parallel"],
            check=True,
        )

        built = list((build_dir / "python" / "latnet").glob("_core*.so"))
        if not built:
            raise RuntimeError("cmake did not produce the _core extension")
        target = Path(self.get_ext_fullpath(ext.name))
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], target)


setup(
    ext_modules=[CMakeExtension("latnet._core")],
    cmdclass={"build_ext": CMakeBuild},
)
