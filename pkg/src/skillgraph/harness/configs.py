"""Locating bundled configuration files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def config_dir() -> Path:
    return Path(str(resources.files("skillgraph") / "configs"))


def config_path(name: str) -> Path:
    """Path of a bundled config file such as ``reference.rgraph``."""
    path = config_dir() / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return path


def resolve(name: str | Path, base: Path | None = None) -> Path:
    """Resolve a config reference: absolute, relative to ``base``, or bundled."""
    p = Path(name)
    if p.is_absolute():
        return p
    if base is not None and (base / p).is_file():
        return base / p
    if p.is_file():
        return p.resolve()
    bundled = config_dir() / p
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"config file not found: {name}")
