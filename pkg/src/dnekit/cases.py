"""Access to the bundled example systems and data files."""

from __future__ import annotations

from importlib import resources

from .grid import GridCase, parse_case

BUNDLED = ("case14dne", "case2toy")


def bundled_text(filename: str) -> str:
    """Raw contents of a bundled data file (e.g. 'case14dne.m')."""
    return resources.files("dnekit.data").joinpath(filename).read_text()


def bundled_case(name: str) -> GridCase:
    """Parse a bundled case by name.

    'case14dne': 14-bus system, 20 lines, 5 thermal units, two wind farms
    (80 MW at bus 5, 100 MW at bus 7), 24 hourly periods, 5-minute response
    window.  'case2toy': 2-bus single-generator toy.
    """
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled case '{name}'; available: {BUNDLED}")
    return parse_case(bundled_text(f"{name}.m"))
