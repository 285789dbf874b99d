"""Signed fixed-point arithmetic used by weights, neuron parameters and potentials.

Weights and neuron parameters are 16-bit two's complement values with a
configurable number of fractional bits. Membrane potentials live in a 32-bit
accumulator at the same scale. All helpers operate on Python ints or numpy
integer arrays; array math is done in int64 so intermediate products never
wrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

import numpy as np

DEFAULT_FRAC_BITS = 8

INT16_MIN, INT16_MAX = -(1 << 15), (1 << 15) - 1
INT32_MIN, INT32_MAX = -(1 << 31), (1 << 31) - 1


def check_frac_bits(frac_bits: int) -> int:
    if not 0 <= int(frac_bits) <= 15:
        raise ValueError(f"frac_bits must be in [0, 15], got {frac_bits}")
    return int(frac_bits)


def saturate16(x):
    return np.clip(x, INT16_MIN, INT16_MAX)


def saturate32(x):
    return np.clip(x, INT32_MIN, INT32_MAX)


def round_shift(x, shift: int):
    """Divide by ``2**shift`` rounding to nearest, ties to even.

    Works elementwise on int64 arrays and on Python ints.
    """
    if shift == 0:
        return x
    scalar = np.isscalar(x)
    a = np.asarray(x, dtype=np.int64)
    q = a >> shift  # floor division
    r = a - (q << shift)
    half = 1 << (shift - 1)
    q = q + ((r > half) | ((r == half) & ((q & 1) == 1)))
    return int(q) if scalar else q


def rounding_is_exact(x, shift: int) -> bool:
    """True when ``round_shift(x, shift)`` involves no rounding for any element."""
    a = np.asarray(x, dtype=np.int64)
    return bool(np.all((a & ((1 << shift) - 1)) == 0))


def to_raw(value, frac_bits: int = DEFAULT_FRAC_BITS):
    """Quantize real value(s) to saturated 16-bit raw integers (round half even)."""
    scaled = np.rint(np.asarray(value, dtype=np.float64) * (1 << frac_bits))
    raw = saturate16(scaled).astype(np.int64)
    return int(raw) if raw.ndim == 0 else raw


def decimal_to_raw(text, frac_bits: int = DEFAULT_FRAC_BITS) -> int:
    """Exact conversion of a decimal literal to a saturated raw value.

    Uses :class:`decimal.Decimal` so the result does not depend on binary
    floating point parsing.
    """
    scaled = (Decimal(str(text)) * (1 << frac_bits)).to_integral_value(ROUND_HALF_EVEN)
    return int(min(max(int(scaled), INT16_MIN), INT16_MAX))


def from_raw(raw, frac_bits: int = DEFAULT_FRAC_BITS):
    return np.asarray(raw, dtype=np.float64) / (1 << frac_bits)


@dataclass(frozen=True)
class FixedPoint16:
    """A single signed 16-bit fixed-point number."""

    raw: int
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        check_frac_bits(self.frac_bits)
        if not INT16_MIN <= self.raw <= INT16_MAX:
            raise ValueError(f"raw value {self.raw} outside signed 16-bit range")

    @classmethod
    def from_float(cls, value: float, frac_bits: int = DEFAULT_FRAC_BITS) -> "FixedPoint16":
        return cls(int(to_raw(value, frac_bits)), frac_bits)

    def to_float(self) -> float:
        return self.raw / (1 << self.frac_bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)


@dataclass(frozen=True)
class Accumulator:
    """A single signed 32-bit accumulator value at the weight scale."""

    raw: int
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        if not INT32_MIN <= self.raw <= INT32_MAX:
            raise ValueError(f"raw value {self.raw} outside signed 32-bit range")

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)
