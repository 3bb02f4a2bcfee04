"""Sparse multivariate polynomials with exact rational coefficients."""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .potentials import _frac


class Poly:
    """Polynomial in ``nvars`` variables stored as {exponent tuple: Fraction}."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, object] | None = None):
        self.nvars = nvars
        self.terms = {}
        for e, c in (terms or {}).items():
            c = _frac(c)
            if c != 0:
                self.terms[tuple(e)] = c

    # constructors ------------------------------------------------------
    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int, c=1) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def univariate(cls, coeffs: Sequence, arg: "Poly") -> "Poly":
        """sum_j coeffs[j] arg^j by Horner's rule."""
        out = cls(arg.nvars)
        for c in reversed(list(coeffs)):
            out = out * arg + cls.const(arg.nvars, c)
        return out

    # arithmetic ---------------------------------------------------------
    def _new(self, terms) -> "Poly":
        p = Poly(self.nvars)
        p.terms = {e: c for e, c in terms.items() if c != 0}
        return p

    def __add__(self, other: "Poly") -> "Poly":
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0) + c
        return self._new(t)

    def __neg__(self) -> "Poly":
        return self._new({e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c0 = _frac(other)
            return self._new({e: c * c0 for e, c in self.terms.items()})
        t: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return self._new(t)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"x{i}^{k}" if k > 1 else f"x{i}" for i, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # calculus -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def diff(self, i: int) -> "Poly":
        t = {}
        for e, c in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                t[tuple(f)] = c * e[i]
        return self._new(t)

    def __call__(self, point: Iterable) -> Fraction:
        pt = [_frac(v) for v in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            m = c
            for v, k in zip(pt, e):
                if k:
                    m *= v ** k
            total += m
        return total

    def max_bits(self) -> int:
        return max((max(c.numerator.bit_length(), c.denominator.bit_length()) for c in self.terms.values()),
                   default=0)
