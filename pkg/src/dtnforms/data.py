"""Access to the mesh fixtures shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .mesh import SimplicialMesh, load_mesh

_CACHE: dict[str, SimplicialMesh] = {}


def fixture_names() -> list[str]:
    root = resources.files("dtnforms") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".mesh"))


def fixture_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".mesh") else name
    path = Path(str(resources.files("dtnforms") / "fixtures" / f"{stem}.mesh"))
    if not path.is_file():
        raise FileNotFoundError(f"no fixture named {name!r}; available: {', '.join(fixture_names())}")
    return path


def resolve_mesh(name_or_path: str) -> Path:
    """A file path if it exists, otherwise a fixture name."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    return fixture_path(name_or_path)


def load_fixture(name: str, cached: bool = True) -> SimplicialMesh:
    """Load a shipped fixture; the cached instance shares assembled operators."""
    if cached and name in _CACHE:
        return _CACHE[name]
    mesh = load_mesh(fixture_path(name))
    if cached:
        _CACHE[name] = mesh
    return mesh
