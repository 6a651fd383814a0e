"""Bundled example maps used by the command-line corpus run and the tests."""

from __future__ import annotations

from importlib import resources

from ..polymap import ComplexPolyMap, MapFileError, PolyMap, parse_map, realify

NAMES = (
    "broughton",
    "exfair",
    "pz_1_1",
    "pz_1_2",
    "pz_2_1",
    "quasihom",
    "linear",
    "cube",
)


def read_text(name: str) -> str:
    if name not in NAMES:
        raise MapFileError(f"unknown corpus map {name!r}; available: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath(f"{name}.json").read_text(encoding="utf-8")


def load(name: str) -> PolyMap | ComplexPolyMap:
    """Parse a bundled map (complex maps stay complex)."""
    return parse_map(read_text(name))


def load_real(name: str) -> PolyMap:
    """Parse a bundled map, lowering complex maps to their real form."""
    m = load(name)
    return realify(m) if isinstance(m, ComplexPolyMap) else m
