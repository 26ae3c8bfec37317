"""Exact rational parsing helpers."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

SNAP_DENOMINATOR = 10**6


def to_fraction(x) -> Fraction:
    """Convert ints, Fractions, decimal/ratio strings and floats to a Fraction.

    Floats go through their shortest decimal repr, so 0.1 becomes 1/10 rather
    than the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def snap_rational(x, max_den: int = SNAP_DENOMINATOR) -> tuple[Fraction, bool]:
    """Return (q, snapped): q is exact for int/Fraction/str input; floats are
    snapped to the nearest rational with denominator <= max_den."""
    if isinstance(x, float):
        q = Fraction(x).limit_denominator(max_den)
        return q, Fraction(x) != q
    return to_fraction(x), False


def fraction_json(q: Fraction) -> dict:
    return {"num": q.numerator, "den": q.denominator}


def fraction_from_json(d) -> Fraction:
    if isinstance(d, dict):
        return Fraction(int(d["num"]), int(d["den"]))
    return to_fraction(d)
