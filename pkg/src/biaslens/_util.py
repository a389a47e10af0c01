"""Small shared helpers: exact-ratio rendering, deterministic randomness,
atomic file writes."""

from __future__ import annotations

import hashlib
import os
import tempfile
from fractions import Fraction
from pathlib import Path


def ratio_str(value: Fraction, grid: int | None = None) -> str:
    """Render an exact ratio as a string.

    With ``grid`` the value is rendered un-normalized on that grid
    ("4/10" rather than "2/5"), which keeps window quantities legible.
    Raises ValueError if the value does not lie on the grid.
    """
    if grid is not None:
        scaled = value * grid
        if scaled.denominator != 1:
            raise ValueError(f"{value} does not lie on the 1/{grid} grid")
        return f"{scaled.numerator}/{grid}"
    return str(value)


def parse_ratio(text: str) -> Fraction:
    """Inverse of ratio_str; accepts 'p/q', integers and decimal strings."""
    return Fraction(text)


def to_float(value: Fraction) -> float:
    return value.numerator / value.denominator


def round_half_away(value: Fraction) -> int:
    """Round to the nearest integer, halves away from zero."""
    if value < 0:
        return -round_half_away(-value)
    whole, remainder = divmod(value.numerator, value.denominator)
    return whole + (1 if 2 * remainder >= value.denominator else 0)


def derive_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit stream id for (seed, *parts).

    Uses a keyed digest rather than hash() so results do not depend on
    PYTHONHASHSEED, the platform, or the process.
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(seed).encode("ascii"))
    for part in parts:
        digest.update(b"\x1f")
        digest.update(part.encode("utf-8"))
    return int.from_bytes(digest.digest(), "big")


def unit_open(seed: int, *parts: str) -> float:
    """Deterministic draw in the open interval (0, 1) keyed on (seed, *parts)."""
    raw = derive_seed(seed, *parts)
    return (raw + 0.5) / 2.0**64


def atomic_write(path: Path, content: str) -> None:
    """Write content to path via a temp file and rename; no partial files."""
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
