"""Exact arithmetic helpers: the quadratic field Q(sqrt 2) and rational snapping.

Probabilities in the canonical quantum example live in Q(sqrt 2) — e.g.
(2+sqrt2)/32 — so distributions, marginal vectors and certificate values can be
carried exactly end to end.  Certificates coming back from a floating-point LP
are snapped to nearby rationals (continued fractions, bounded denominator) and
then re-verified exactly; both utilities live here.
"""

from __future__ import annotations

import re
from fractions import Fraction
from math import sqrt
from typing import Union

RationalLike = Union[int, Fraction]

_SQRT2_FLOAT = sqrt(2.0)

# "(2+sqrt2)/32", "(2-3*sqrt2)/8", "(1+sqrt2)", "sqrt2/4", "-sqrt2" ...
_SYMBOLIC_RE = re.compile(
    r"""^\(\s*(?P<a>[+-]?\d+)\s*(?P<sign>[+-])\s*(?:(?P<b>\d+)\s*\*?\s*)?sqrt2\s*\)
        \s*(?:/\s*(?P<den>\d+))?$""",
    re.VERBOSE,
)
_BARE_SQRT2_RE = re.compile(
    r"^(?P<sign>[+-]?)\s*(?:(?P<b>\d+)\s*\*?\s*)?sqrt2\s*(?:/\s*(?P<den>\d+))?$"
)


class Root2:
    """An element a + b*sqrt(2) of Q(sqrt 2), with a and b exact rationals.

    Supports field arithmetic, exact comparisons (sign determined without any
    floating point), and conversion to float for numeric consumers.
    """

    __slots__ = ("a", "b")

    def __init__(self, a: RationalLike = 0, b: RationalLike = 0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    # -- construction --------------------------------------------------------

    @staticmethod
    def coerce(value: "Root2 | RationalLike") -> "Root2":
        if isinstance(value, Root2):
            return value
        if isinstance(value, (int, Fraction)):
            return Root2(value)
        raise TypeError(f"cannot coerce {type(value).__name__} into Q(sqrt 2) exactly")

    @staticmethod
    def parse(text: str) -> "Root2":
        """Parse an exact literal: integers, rationals, decimals and the
        symbolic forms "(p+q*sqrt2)/d" / "sqrt2/d"."""
        s = text.strip()
        m = _SYMBOLIC_RE.match(s)
        if m:
            a = Fraction(int(m.group("a")))
            b = Fraction(int(m.group("b") or 1))
            if m.group("sign") == "-":
                b = -b
            den = int(m.group("den") or 1)
            if den == 0:
                raise ValueError(f"zero denominator in {text!r}")
            return Root2(a / den, b / den)
        m = _BARE_SQRT2_RE.match(s)
        if m:
            b = Fraction(int(m.group("b") or 1))
            if m.group("sign") == "-":
                b = -b
            den = int(m.group("den") or 1)
            if den == 0:
                raise ValueError(f"zero denominator in {text!r}")
            return Root2(0, b / den)
        try:
            return Root2(Fraction(s))  # handles "3/8", "0.25", "-1"
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"unrecognized exact literal: {text!r}") from exc

    # -- field arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = Root2.coerce(other)
        return Root2(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self):
        return Root2(-self.a, -self.b)

    def __sub__(self, other):
        other = Root2.coerce(other)
        return Root2(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        return Root2.coerce(other) - self

    def __mul__(self, other):
        other = Root2.coerce(other)
        return Root2(
            self.a * other.a + 2 * self.b * other.b,
            self.a * other.b + self.b * other.a,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Root2.coerce(other)
        # multiply by the conjugate; the norm a^2 - 2 b^2 vanishes only at 0
        norm = other.a * other.a - 2 * other.b * other.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt 2)")
        return self * Root2(other.a / norm, -other.b / norm)

    def __rtruediv__(self, other):
        return Root2.coerce(other) / self

    # -- ordering ------------------------------------------------------------

    def sign(self) -> int:
        """Exact sign of a + b*sqrt(2): -1, 0, or +1."""
        a, b = self.a, self.b
        if a == 0 and b == 0:
            return 0
        if a >= 0 and b >= 0:
            return 1
        if a <= 0 and b <= 0:
            return -1
        # opposite signs: compare a^2 against 2 b^2 on the positive side
        if a > 0:  # b < 0; positive iff a > |b| sqrt2 iff a^2 > 2 b^2
            return 1 if a * a > 2 * b * b else (0 if a * a == 2 * b * b else -1)
        # a < 0, b > 0; positive iff b sqrt2 > |a|
        return 1 if 2 * b * b > a * a else (0 if 2 * b * b == a * a else -1)

    def __eq__(self, other):
        if isinstance(other, (Root2, int, Fraction)):
            o = Root2.coerce(other)
            return self.a == o.a and self.b == o.b
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def __lt__(self, other):
        return (self - Root2.coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - Root2.coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - Root2.coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - Root2.coerce(other)).sign() >= 0

    # -- views ---------------------------------------------------------------

    def is_rational(self) -> bool:
        return self.b == 0

    def rational_part(self) -> Fraction:
        return self.a

    def sqrt2_part(self) -> Fraction:
        return self.b

    def __float__(self):
        return float(self.a) + float(self.b) * _SQRT2_FLOAT

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __repr__(self):
        return f"Root2({self.a!r}, {self.b!r})"

    def __str__(self):
        return format_exact(self)


SQRT2 = Root2(0, 1)
ZERO = Root2(0, 0)
ONE = Root2(1, 0)


def format_exact(value: "Root2 | RationalLike") -> str:
    """Render an exact value in the same literal syntax parse() accepts."""
    v = Root2.coerce(value)
    if v.b == 0:
        return str(v.a)
    den = (v.a.denominator * v.b.denominator) // _gcd(
        v.a.denominator, v.b.denominator
    )
    na = v.a.numerator * (den // v.a.denominator)
    nb = v.b.numerator * (den // v.b.denominator)
    if na == 0:
        core = "sqrt2" if nb == 1 else ("-sqrt2" if nb == -1 else f"{nb}*sqrt2")
        return core if den == 1 else f"{core}/{den}"
    sign = "+" if nb > 0 else "-"
    mag = abs(nb)
    term = "sqrt2" if mag == 1 else f"{mag}*sqrt2"
    body = f"({na}{sign}{term})"
    return body if den == 1 else f"{body}/{den}"


def _gcd(x: int, y: int) -> int:
    while y:
        x, y = y, x % y
    return x


def rationalize(x: float, max_denominator: int = 10**6) -> Fraction:
    """Snap a float to the nearest rational with a bounded denominator.

    Continued-fraction convergents via Fraction.limit_denominator: the snapped
    value is the best rational approximation with denominator <= the bound.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be positive")
    return Fraction(x).limit_denominator(max_denominator)


def rationalize_vector(values, max_denominator: int = 10**6) -> list[Fraction]:
    return [rationalize(float(x), max_denominator) for x in values]
