"""Rational functions with exact coefficients.

Cost functions of the pool-testing family are ratios of integer-coefficient
polynomials in the risk level x.  Evaluation is exact when x is a Fraction
and plain float arithmetic otherwise.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence, Union

Number = Union[int, float, Fraction]


class Poly:
    """Dense univariate polynomial, coefficients in ascending degree order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Number]):
        cs = [Fraction(c) if isinstance(c, int) else c for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    def __call__(self, x: Number) -> Number:
        acc: Number = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __mul__(self, other: "Poly") -> "Poly":
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(out)

    def __sub__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
        b = list(other.coeffs) + [Fraction(0)] * (n - len(other.coeffs))
        return Poly([x - y for x, y in zip(a, b)])

    def __repr__(self) -> str:
        return f"Poly({list(self.coeffs)})"


class RationalFn:
    """Ratio of two polynomials; denominator must not vanish on (0, 1)."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        self.num = num
        self.den = den

    def __call__(self, x: Number) -> Number:
        d = self.den(x)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at x={x}")
        return self.num(x) / d

    def __repr__(self) -> str:
        return f"RationalFn({self.num!r}, {self.den!r})"
