"""Example models shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

REFERENCE_MODELS = ("biology", "biology_variant", "employee", "recursive_manager", "managers")


def corpus_path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(f"{name}.amdl")))


def load_corpus_model(name: str):
    from amdl.dsl import parse_model

    path = corpus_path(name)
    return parse_model(path.read_bytes(), str(path))
