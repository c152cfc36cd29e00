"""Arbitrary-precision floating point: contexts, creation, arithmetic, conversion.

Everything downstream (ODE systems, Taylor coefficients, reductions) is built
on the two names exported here: ``PrecisionContext`` (a fixed working
precision in bits, round-to-nearest-even) and ``MPValue`` (an immutable
binary float carrying exactly that many significand bits).

The backend is GMP/MPFR via gmpy2. MPFR arithmetic is correctly rounded,
which gives the single-rounding guarantee this module promises for
add/sub/mul/div, and values are immutable, so they can be shared freely
across worker processes. Overflow, underflow, division by zero and invalid
operations are trapped and raised as exceptions: results are always finite.
"""

from __future__ import annotations

import re

import gmpy2
from gmpy2 import mpfr

MPValue = mpfr

MIN_PRECISION_BITS = 64

# The backend's binary exponent range is +-(2**30 - 1); trajectories in
# the target problem class live within a tiny dynamic range, so hitting
# these limits signals a bug, not a real number, and traps below turn it
# into an exception instead of an infinity.
_EMAX = 2**30 - 1
_EMIN = -(2**30 - 1)

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

# Plain context used only while parsing decimal strings (the mpfr
# constructor rounds per the active thread context).
_PARSE_CTX = gmpy2.context(round=gmpy2.RoundToNearest, emax=_EMAX, emin=_EMIN)


class RangeError(ArithmeticError):
    """A value fell outside the supported binary exponent range."""


class PrecisionContext:
    """A fixed working precision (bits of significand), rounding to nearest-even.

    All arithmetic goes through the context and rounds exactly once to
    ``precision_bits``. Contexts are immutable and safe to share between
    workers; each worker process rebuilds an equal context from the bit count.
    """

    __slots__ = ("precision_bits", "_gmp", "zero", "one")

    def __init__(self, precision_bits: int):
        if not isinstance(precision_bits, int) or isinstance(precision_bits, bool):
            raise TypeError(f"precision_bits must be an int, got {precision_bits!r}")
        if precision_bits < MIN_PRECISION_BITS:
            raise ValueError(
                f"precision_bits must be >= {MIN_PRECISION_BITS}, got {precision_bits}"
            )
        self.precision_bits = precision_bits
        self._gmp = gmpy2.context(
            precision=precision_bits,
            round=gmpy2.RoundToNearest,
            emax=_EMAX,
            emin=_EMIN,
            trap_overflow=True,
            trap_underflow=True,
            trap_divzero=True,
            trap_invalid=True,
        )
        self.zero = mpfr(0, precision_bits)
        self.one = mpfr(1, precision_bits)

    @property
    def gmp(self) -> gmpy2.context:
        """The underlying gmpy2 context, for hot loops that alias its methods."""
        return self._gmp

    def add(self, a, b) -> MPValue:
        return self._gmp.add(a, b)

    def sub(self, a, b) -> MPValue:
        return self._gmp.sub(a, b)

    def mul(self, a, b) -> MPValue:
        return self._gmp.mul(a, b)

    def div(self, a, b) -> MPValue:
        return self._gmp.div(a, b)

    def neg(self, a) -> MPValue:
        return self._gmp.minus(a)

    def mul_2exp(self, a, e: int) -> MPValue:
        return self._gmp.mul_2exp(a, e)

    def from_int(self, n: int) -> MPValue:
        old = gmpy2.get_context()
        gmpy2.set_context(self._gmp)
        try:
            return mpfr(n, self.precision_bits)
        finally:
            gmpy2.set_context(old)

    def parse(self, text: str) -> MPValue:
        return mp_from_decimal(text, self)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PrecisionContext)
            and other.precision_bits == self.precision_bits
        )

    def __hash__(self) -> int:
        return hash(("PrecisionContext", self.precision_bits))

    def __repr__(self) -> str:
        return f"PrecisionContext({self.precision_bits})"


def mp_from_decimal(text: str, ctx: PrecisionContext) -> MPValue:
    """Parse a decimal string to the nearest representable value under ctx.

    Accepts an optional sign, optional fraction and optional exponent
    (``-15.8``, ``2.5e-3``). Raises ValueError for malformed text and
    RangeError when the value cannot be represented within the exponent
    range (it is never silently turned into an infinity).
    """
    if not isinstance(text, str):
        raise ValueError(f"decimal text must be a string, got {type(text).__name__}")
    stripped = text.strip()
    if not _DECIMAL_RE.match(stripped):
        raise ValueError(f"not a valid decimal literal: {text!r}")
    old = gmpy2.get_context()
    gmpy2.set_context(_PARSE_CTX)
    try:
        value = mpfr(stripped, ctx.precision_bits)
    finally:
        gmpy2.set_context(old)
    if not gmpy2.is_finite(value):
        raise RangeError(f"decimal exponent out of range: {text!r}")
    return value


def mp_to_decimal(v: MPValue, digits: int) -> str:
    """Render v as a correctly rounded decimal string with `digits` significant digits.

    Positional notation is used when the decimal point lands inside or just
    left of the digit string; otherwise scientific notation (``5.7549e-2409``).
    Both forms round-trip through mp_from_decimal.
    """
    if not isinstance(digits, int) or isinstance(digits, bool) or digits < 1:
        raise ValueError(f"digits must be a positive integer, got {digits!r}")
    if gmpy2.is_zero(v):
        sign = "-" if gmpy2.is_signed(v) else ""
        if digits == 1:
            return sign + "0"
        return sign + "0." + "0" * (digits - 1)
    mant, exp10, _ = v.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    # value = 0.<mant> * 10**exp10
    if 0 < exp10 <= len(mant):
        whole, frac = mant[:exp10], mant[exp10:]
        return sign + (whole + "." + frac if frac else whole)
    if -4 < exp10 <= 0:
        return sign + "0." + "0" * (-exp10) + mant
    if len(mant) == 1:
        return f"{sign}{mant}e{exp10 - 1}"
    return f"{sign}{mant[0]}.{mant[1:]}e{exp10 - 1}"


_ARITH_OPS = ("add", "sub", "mul", "div")


def arith(op: str, a: MPValue, b: MPValue, ctx: PrecisionContext) -> MPValue:
    """Apply one of add/sub/mul/div with a single rounding to ctx precision.

    Division by zero raises ZeroDivisionError; results outside the exponent
    range raise ArithmeticError rather than returning an infinity.
    """
    if op not in _ARITH_OPS:
        raise ValueError(f"unknown operation {op!r}, expected one of {_ARITH_OPS}")
    return getattr(ctx.gmp, op)(a, b)


def decimal_digits(precision_bits: int) -> int:
    """Count of reliable decimal digits at a binary precision.

    floor(precision_bits * log10(2)), evaluated exactly as the largest d
    with 10**d <= 2**precision_bits so boundary cases never depend on
    floating-point log accuracy.
    """
    if not isinstance(precision_bits, int) or isinstance(precision_bits, bool):
        raise TypeError(f"precision_bits must be an int, got {precision_bits!r}")
    if precision_bits < 1:
        raise ValueError(f"precision_bits must be >= 1, got {precision_bits}")
    d = int(precision_bits * 0.30102999566398114)
    target = 1 << precision_bits
    while 10 ** (d + 1) <= target:
        d += 1
    while d > 0 and 10**d > target:
        d -= 1
    return d


def bits_for_digits(digits: int) -> int:
    """Binary precision needed to carry a decimal digit count.

    ceil(digits / log10(2)), evaluated exactly as the smallest p with
    2**p >= 10**digits. Inverse of decimal_digits in the sense that
    decimal_digits(bits_for_digits(d)) >= d.
    """
    if not isinstance(digits, int) or isinstance(digits, bool):
        raise TypeError(f"digits must be an int, got {digits!r}")
    if digits < 1:
        raise ValueError(f"digits must be >= 1, got {digits}")
    p = int(digits * 3.321928094887362)
    target = 10**digits
    while (1 << p) < target:
        p += 1
    while p > 1 and (1 << (p - 1)) >= target:
        p -= 1
    return p


def mp_bits_equal(a: MPValue, b: MPValue) -> bool:
    """True when two values have identical bit patterns.

    Stricter than ==: distinguishes -0 from +0 and values of different
    precision, which is what bit-reproducibility checks need.
    """
    if a.precision != b.precision:
        return False
    if gmpy2.is_zero(a) or gmpy2.is_zero(b):
        return (
            gmpy2.is_zero(a)
            and gmpy2.is_zero(b)
            and gmpy2.is_signed(a) == gmpy2.is_signed(b)
        )
    return a.as_mantissa_exp() == b.as_mantissa_exp()
