"""In-tree PEP 517 backend.

The repository's ``setup.py`` is an environment helper CLI (setup/check/smoke/run),
not a setuptools script, so this backend builds from ``pyproject.toml`` alone
instead of executing it.
"""

from setuptools import build_meta as _orig
from setuptools.build_meta import *  # noqa: F401,F403


class _PyprojectOnlyBackend(_orig._BuildMetaBackend):
    def run_setup(self, setup_script="setup.py"):
        # A non-existent script makes setuptools fall back to a bare setup() call.
        super().run_setup("__pyproject_only__.py")


_backend = _PyprojectOnlyBackend()
get_requires_for_build_wheel = _backend.get_requires_for_build_wheel
get_requires_for_build_sdist = _backend.get_requires_for_build_sdist
get_requires_for_build_editable = _backend.get_requires_for_build_editable
prepare_metadata_for_build_wheel = _backend.prepare_metadata_for_build_wheel
prepare_metadata_for_build_editable = _backend.prepare_metadata_for_build_editable
build_wheel = _backend.build_wheel
build_sdist = _backend.build_sdist
build_editable = _backend.build_editable
