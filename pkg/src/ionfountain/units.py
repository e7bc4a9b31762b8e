"""Parsing of quantities with explicit unit suffixes, e.g. ``"2 ns"`` or ``"-200 V"``."""

from __future__ import annotations

import math
import re

from .constants import ATOMIC_MASS, ELEMENTARY_CHARGE

_PREFIXES = {
    "T": 1e12, "G": 1e9, "M": 1e6, "k": 1e3, "": 1.0,
    "m": 1e-3, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "n": 1e-9, "p": 1e-12,
}

# base unit -> (dimension, SI factor)
_UNITS = {
    "m": ("length", 1.0),
    "s": ("time", 1.0),
    "V": ("voltage", 1.0),
    "Hz": ("frequency", 1.0),
    "K": ("temperature", 1.0),
    "g": ("mass", 1e-3),
    "u": ("mass", ATOMIC_MASS),
    "Da": ("mass", ATOMIC_MASS),
    "C": ("charge", 1.0),
    "e": ("charge", ELEMENTARY_CHARGE),
    "eV": ("energy", ELEMENTARY_CHARGE),
    "J": ("energy", 1.0),
    "m/s": ("speed", 1.0),
    "V/m": ("field", 1.0),
    "rad/s": ("angular_frequency", 1.0),
    "rad": ("angle", 1.0),
    "1/s": ("rate", 1.0),
}

# Units that never take a prefix (avoids "u" vs micro ambiguity etc.).
_BARE_ONLY = {"u", "e", "Da", "rad", "1/s"}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


class UnitError(ValueError):
    pass


def _lookup(unit):
    if unit in _UNITS:
        return _UNITS[unit]
    for base, (dim, factor) in _UNITS.items():
        if base in _BARE_ONLY or not unit.endswith(base):
            continue
        prefix = unit[: len(unit) - len(base)]
        if prefix in _PREFIXES and prefix:
            return dim, factor * _PREFIXES[prefix]
    raise UnitError(f"unknown unit {unit!r}")


def parse_quantity(text, dimension=None):
    """Convert ``"6.3 us"`` to SI (``6.3e-6``).

    Plain numbers are accepted only when ``dimension`` is ``None`` or
    ``"dimensionless"``. If ``dimension`` is given, the unit must match it.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        if dimension not in (None, "dimensionless"):
            raise UnitError(f"expected a quantity with {dimension} units, got bare number {text!r}")
        return float(text)
    if not isinstance(text, str):
        raise UnitError(f"cannot parse quantity from {text!r}")
    match = _QUANTITY.match(text)
    if not match:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = float(match.group(1)), match.group(2)
    if not unit:
        if dimension not in (None, "dimensionless"):
            raise UnitError(f"quantity {text!r} needs a {dimension} unit")
        return value
    dim, factor = _lookup(unit)
    if dimension is not None and dim != dimension:
        raise UnitError(f"quantity {text!r} has {dim} units, expected {dimension}")
    if not math.isfinite(value):
        raise UnitError(f"non-finite quantity {text!r}")
    return value * factor


def format_quantity(value, unit):
    """Inverse-ish of :func:`parse_quantity` used when writing config files."""
    return f"{value!r} {unit}"
