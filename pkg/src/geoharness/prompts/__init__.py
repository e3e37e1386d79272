"""Versioned prompt assets. File names follow ``<name>.v<N>.txt``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load(name: str, version: int = 1) -> str:
    return resources.files(__name__).joinpath(f"{name}.v{version}.txt").read_text(encoding="utf-8")


def version_tag(name: str, version: int = 1) -> str:
    return f"{name}.v{version}"
