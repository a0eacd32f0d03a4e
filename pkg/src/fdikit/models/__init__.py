"""Bundled example models and alarm specifications."""

from pathlib import Path


def model_path(name: str) -> Path:
    """Absolute path of a bundled ``.fml`` or ``.aslk`` file."""
    return Path(__file__).resolve().parent / name
