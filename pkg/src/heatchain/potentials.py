"""Interaction and pinning potentials of the chain.

A :class:`PotentialSpec` holds the interaction potential ``U`` (acting on
neighbour distances) and the pinning potential ``V`` (acting on each site),
together with their growth exponents ``k``, ``l`` and leading coefficients
``a_k``, ``b_l``.  Polynomial potentials are stored with exact rational
coefficients so that derivatives of every order are exact.

Conventions: ``harmonic-pinning`` is ``V(q) = alpha q^2 / 2`` and
``quartic-pinning`` is ``V(q) = alpha q^4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import ContractViolation, DegenerateError, NoPinningError

U_KINDS = ("harmonic", "fpu", "polynomial")
V_KINDS = ("none", "harmonic-pinning", "quartic-pinning", "weak-pinning", "polynomial")

MAX_ORDER = 4
GROWTH_TOL = 1e-4


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, Rational):
        return Fraction(int(c.numerator), int(c.denominator))
    if isinstance(c, str):
        return Fraction(c)
    return Fraction(float(c))


def _trim(coeffs: Sequence) -> tuple[Fraction, ...]:
    cs = [_frac(c) for c in coeffs]
    while cs and cs[-1] == 0:
        cs.pop()
    return tuple(cs)


def poly_derivative(coeffs: Sequence, order: int = 1) -> tuple:
    """Coefficients (ascending) of the ``order``-th derivative."""
    cs = list(coeffs)
    for _ in range(order):
        cs = [j * cs[j] for j in range(1, len(cs))]
    return tuple(cs)


def horner(coeffs: Sequence, x):
    """Evaluate an ascending coefficient sequence at ``x``.

    Works for floats, :class:`~fractions.Fraction` and numpy arrays (of any
    dtype, including ``object``).
    """
    if len(coeffs) == 0:
        return x * 0
    acc = coeffs[-1] + x * 0
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _is_exact(x) -> bool:
    if isinstance(x, Fraction):
        return True
    if isinstance(x, np.ndarray):
        return x.dtype == object
    return isinstance(x, int)


def _weak_derivative(x, order: int):
    """Closed-form derivatives of sqrt(1 + x^2)."""
    s2 = 1.0 + x * x
    s = np.sqrt(s2)
    if order == 0:
        return s
    if order == 1:
        return x / s
    if order == 2:
        return 1.0 / (s2 * s)
    if order == 3:
        return -3.0 * x / (s2 * s2 * s)
    if order == 4:
        return (12.0 * x * x - 3.0) / (s2 * s2 * s2 * s)
    raise ContractViolation(f"weak-pinning derivatives are closed-form up to order 4, got {order}")


@dataclass(frozen=True)
class Term:
    """A one-dimensional potential ``c_out * f(s_in * x)``.

    ``f`` is the polynomial with ascending ``coeffs`` or, when ``coeffs`` is
    None, the weak pinning ``sqrt(1 + x^2)``.  Scaling of polynomial terms is
    folded into the coefficients, so ``s_in``/``c_out`` only matter for the
    weak term.
    """

    coeffs: tuple | None
    s_in: float = 1.0
    c_out: float = 1.0

    @property
    def is_polynomial(self) -> bool:
        return self.coeffs is not None

    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def __call__(self, x, order: int = 0):
        if self.coeffs is not None:
            cs = poly_derivative(self.coeffs, order)
            if not _is_exact(x):
                cs = tuple(float(c) for c in cs)
            return horner(cs, x)
        if _is_exact(x):
            raise ContractViolation("weak pinning has no exact evaluation")
        x = np.asarray(x, dtype=float) if isinstance(x, np.ndarray) else float(x)
        return self.c_out * self.s_in**order * _weak_derivative(self.s_in * x, order)

    def scaled(self, E: float, k: int) -> "Term":
        """The term ``E^{-1} f(E^{1/k} x)``."""
        if E == 1:
            return self
        s = E ** (1.0 / k)
        if self.coeffs is not None:
            return Term(tuple(float(c) * s**j / E for j, c in enumerate(self.coeffs)))
        return Term(None, self.s_in * s, self.c_out / E)


@dataclass(frozen=True)
class PotentialSpec:
    """The pair (U, V) with growth data.

    ``k``, ``l``, ``a_k`` and ``b_l`` are derived from the kinds; passing them
    explicitly is allowed and checked against the derived values.
    """

    u_kind: str = "harmonic"
    v_kind: str = "none"
    u_coeffs: tuple = ()
    v_coeffs: tuple = ()
    alpha: float = 0.0
    k: int | None = None
    l: float | None = None
    a_k: float | None = None
    b_l: float | None = None
    _u: tuple = field(default=(), init=False, repr=False, compare=False)
    _v: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.u_kind not in U_KINDS:
            raise ContractViolation(f"unknown u kind {self.u_kind!r}")
        if self.v_kind not in V_KINDS:
            raise ContractViolation(f"unknown v kind {self.v_kind!r}")
        if self.alpha < 0:
            raise ContractViolation("pinning strength alpha must be >= 0")

        if self.u_kind == "harmonic":
            u = (0, 0, Fraction(1, 2))
        elif self.u_kind == "fpu":
            u = (0, 0, Fraction(1, 2), 0, Fraction(1, 4))
        else:
            u = self.u_coeffs
        u = _trim(u)
        if len(u) < 3 or u[-1] <= 0:
            raise ContractViolation("U must have degree >= 2 and positive leading coefficient")
        k = len(u) - 1
        a_k = u[-1]

        a = _frac(self.alpha)
        if self.v_kind == "none":
            v, l, b_l = None, 0, Fraction(0)
        elif self.v_kind == "harmonic-pinning":
            v, l, b_l = (0, 0, a / 2), 2, a / 2
        elif self.v_kind == "quartic-pinning":
            v, l, b_l = (0, 0, 0, 0, a), 4, a
        elif self.v_kind == "weak-pinning":
            v, l, b_l = None, 1, Fraction(1)
        else:
            v = _trim(self.v_coeffs)
            if len(v) < 2 or v[-1] <= 0:
                raise ContractViolation("polynomial V must have degree >= 1 and positive leading coefficient")
            l, b_l = len(v) - 1, v[-1]
        if v is not None:
            v = tuple(_frac(c) for c in v)

        if k < l:
            raise ContractViolation(f"interaction must dominate pinning: k={k} < l={l}")
        for name, declared, derived in (("k", self.k, k), ("l", self.l, l),
                                        ("a_k", self.a_k, a_k), ("b_l", self.b_l, b_l)):
            if declared is not None and not math.isclose(float(declared), float(derived), rel_tol=0, abs_tol=1e-15):
                raise ContractViolation(f"declared {name}={declared} does not match {self.u_kind}/{self.v_kind} value {derived}")

        object.__setattr__(self, "_u", tuple(_frac(c) for c in u))
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "a_k", float(a_k))
        object.__setattr__(self, "b_l", float(b_l))

    @property
    def has_pinning(self) -> bool:
        return self.v_kind != "none"

    @property
    def u_poly(self) -> tuple[Fraction, ...]:
        return self._u

    @property
    def v_poly(self) -> tuple[Fraction, ...] | None:
        return self._v

    @property
    def is_polynomial(self) -> bool:
        return self.v_kind != "weak-pinning"

    @property
    def exact_a_k(self) -> Fraction:
        return self._u[-1]

    @property
    def exact_b_l(self) -> Fraction:
        if self._v is not None:
            return self._v[-1]
        return Fraction(1) if self.v_kind == "weak-pinning" else Fraction(0)

    def term(self, which: str) -> Term | None:
        if which == "U":
            return Term(self._u)
        if which == "V":
            if self.v_kind == "none":
                return None
            return Term(self._v)
        raise ContractViolation(f"which must be 'U' or 'V', got {which!r}")

    # config round trip -------------------------------------------------
    def to_config(self) -> dict:
        u = {"kind": self.u_kind}
        if self.u_kind == "polynomial":
            u["coeffs"] = [float(c) for c in self._u]
        v = {"kind": self.v_kind}
        if self.v_kind in ("harmonic-pinning", "quartic-pinning"):
            v["alpha"] = float(self.alpha)
        if self.v_kind == "polynomial":
            v["coeffs"] = [float(c) for c in self._v]
        return {"u": u, "v": v}

    @classmethod
    def from_config(cls, cfg: dict) -> "PotentialSpec":
        u = cfg.get("u", {"kind": "harmonic"})
        v = cfg.get("v", {"kind": "none"})
        return cls(
            u_kind=u.get("kind", "harmonic"),
            u_coeffs=tuple(u.get("coeffs", ())),
            v_kind=v.get("kind", "none"),
            v_coeffs=tuple(v.get("coeffs", ())),
            alpha=float(v.get("alpha", 0.0)),
        )


def evaluate(spec: PotentialSpec, which: str, x, order: int = 0):
    """Closed-form ``order``-th derivative of U or V at ``x``.

    Exact when ``x`` is a Fraction (or an object array of them) and the
    potential is polynomial.
    """
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise ContractViolation(f"order must be in 0..{MAX_ORDER}, got {order!r}")
    if which == "V" and spec.v_kind == "none":
        raise NoPinningError("no pinning potential")
    return spec.term(which)(x, int(order))


@dataclass
class GrowthReport:
    """Per-x sequences of the rescaled potentials and their deviations."""

    lambdas: list[float]
    rows: list[dict]
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {"lambdas": self.lambdas, "rows": self.rows, "tol": self.tol, "passed": self.passed}


def _rescaled(term: Term, exponent, lam, x, order, exact):
    if exact:
        lam_, x_ = _frac(lam), _frac(x)
        return lam_ ** (order - exponent) * term(lam_ * x_, order)
    return lam ** (order - exponent) * term(lam * x, order)


def validate_growth(spec: PotentialSpec, lambdas: Sequence[float], xs: Sequence[float],
                    tol: float = GROWTH_TOL) -> GrowthReport:
    """Check the growth-at-infinity limits of U (and V) along ``lambdas``.

    Deviations are computed exactly for polynomial potentials.  A row
    passes when each deviation sequence is non-increasing in lambda and
    the last deviation is below ``tol`` relative to the limit.
    """
    lambdas = [float(t) for t in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])) or any(t <= 1 for t in lambdas):
        raise ContractViolation("lambdas must be increasing and > 1")
    if any(x == 0 for x in xs):
        raise ContractViolation("xs must be nonzero")

    checks = [("U", spec.term("U"), spec.k, spec.exact_a_k)]
    if spec.has_pinning:
        checks.append(("V", spec.term("V"), spec.l, spec.exact_b_l))

    rows = []
    passed = True
    for x in xs:
        for which, term, expo, lead in checks:
            exact = term.is_polynomial and float(expo).is_integer()
            for order in (0, 1):
                if exact:
                    xf = _frac(x)
                    sgn = 1 if xf > 0 else -1
                    e = int(expo)
                    limit = lead * abs(xf) ** e if order == 0 else e * lead * abs(xf) ** (e - 1) * sgn
                else:
                    sgn = math.copysign(1.0, x)
                    limit = float(lead) * abs(x) ** expo if order == 0 else expo * float(lead) * abs(x) ** (expo - 1) * sgn
                values, devs = [], []
                for lam in lambdas:
                    val = _rescaled(term, expo, lam, x, order, exact)
                    values.append(float(val))
                    devs.append(float(abs(val - limit)))
                monotone = all(b <= a for a, b in zip(devs, devs[1:]))
                small = devs[-1] <= tol * max(abs(float(limit)), 1e-300)
                ok = monotone and small
                passed &= ok
                rows.append({
                    "which": which, "order": order, "x": float(x), "limit": float(limit),
                    "values": values, "deviations": devs, "passed": ok,
                })
    return GrowthReport(lambdas, rows, tol, passed)


def nondegeneracy_order(spec: PotentialSpec, q, max_order: int = 8) -> int:
    """Smallest m >= 2 with a nonzero m-th derivative of U at q (exact)."""
    if max_order < 2:
        raise ContractViolation("max_order must be >= 2")
    qf = _frac(q)
    for m in range(2, max_order + 1):
        if horner(poly_derivative(spec.u_poly, m), qf) != 0:
            return m
    raise DegenerateError(f"degenerate up to max_order={max_order}")
