"""Linear expressions over potential variables with exact rational coefficients."""
from __future__ import annotations

from fractions import Fraction
from typing import Union

from .core import PotVar


class LinExpr:
    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=0):
        self.coeffs = {k: Fraction(v) for k, v in (coeffs or {}).items() if v != 0}
        self.const = Fraction(const)

    @staticmethod
    def of(p: Union[int, Fraction, PotVar, "LinExpr"]) -> "LinExpr":
        if isinstance(p, LinExpr):
            return p
        if isinstance(p, PotVar):
            return LinExpr({p.id: 1})
        return LinExpr({}, p)

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr({name: 1})

    def is_const(self) -> bool:
        return not self.coeffs

    def vars(self):
        return set(self.coeffs)

    def __add__(self, other):
        o = LinExpr.of(other)
        c = dict(self.coeffs)
        for k, v in o.coeffs.items():
            c[k] = c.get(k, 0) + v
        return LinExpr(c, self.const + o.const)

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-LinExpr.of(other))

    def __rsub__(self, other):
        return LinExpr.of(other) - self

    def scale(self, k) -> "LinExpr":
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def evaluate(self, assign: dict) -> Fraction:
        return self.const + sum(c * Fraction(assign.get(v, 0)) for v, c in self.coeffs.items())

    def as_potential(self):
        """Back to a syntax-level potential: an int or a single unit-coefficient var."""
        if self.is_const():
            if self.const.denominator != 1:
                raise ValueError(f"non-integral potential {self.const}")
            return int(self.const)
        if self.const == 0 and len(self.coeffs) == 1:
            (k, v), = self.coeffs.items()
            if v == 1:
                return PotVar(k)
        raise ValueError(f"not a syntactic potential: {self}")

    def __eq__(self, other):
        if not isinstance(other, (LinExpr, int, Fraction, PotVar)):
            return NotImplemented
        o = LinExpr.of(other)
        return self.coeffs == o.coeffs and self.const == o.const

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.const))

    def __str__(self):
        parts = []
        for k in sorted(self.coeffs):
            c = self.coeffs[k]
            parts.append(k if c == 1 else f"{c}*{k}")
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)

    __repr__ = __str__
