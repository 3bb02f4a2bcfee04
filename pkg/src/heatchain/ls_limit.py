"""Deterministic mode limit dr = -(w^2 v + r/2) dt, dv = r dt and its eigen-structure."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import ContractViolation
from .models import omega_k_sq

COMPONENT_RTOL = 1e-12


@dataclass(frozen=True)
class ModeSpectrum:
    """omega_k^2 = omega^2 (mu^2 + 4 sin^2(k pi / N)) for k = -N/2+1 .. N/2."""

    N: int
    omega: float
    mu: float

    def __post_init__(self):
        if self.N <= 0 or self.N % 4 != 0:
            raise ContractViolation("N must be a positive multiple of 4")
        if self.omega <= 0 or self.mu <= 0:
            raise ContractViolation("omega and mu must be > 0")

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.N // 2 + 1, self.N // 2 + 1)

    @property
    def omega_k_sq(self) -> np.ndarray:
        return np.asarray(omega_k_sq(self.omega, self.mu, self.N, self.ks))

    def __getitem__(self, k: int) -> float:
        return float(omega_k_sq(self.omega, self.mu, self.N, k))

    def rows(self, tau: float | None = None, x0=(1.0, 1.0)) -> list[dict]:
        """One record per k >= 0 with frequency, eigenvalues and (optionally) the ratio at tau."""
        out = []
        for k in range(0, self.N // 2 + 1):
            w2 = self[k]
            lp, lm = eigenvalues(w2)
            row = {"k": k, "omega_k_sq": w2,
                   "lambda_plus_re": lp.real, "lambda_plus_im": lp.imag,
                   "lambda_minus_re": lm.real, "lambda_minus_im": lm.imag}
            if tau is not None:
                row["ratio"] = ratio_limit_check(w2, x0, [tau]).ratios[-1]
            out.append(row)
        return out


def limit_matrix(omega_sq: float) -> np.ndarray:
    return np.array([[-0.5, -omega_sq], [1.0, 0.0]])


def eigenvalues(omega_sq: float) -> tuple[complex, complex]:
    """lambda_+- = -1/4 +- sqrt(1/16 - w^2); real for w^2 <= 1/16."""
    if omega_sq <= 0:
        raise ContractViolation("omega_sq must be > 0")
    disc = 1.0 / 16.0 - omega_sq
    if disc >= 0:
        s = math.sqrt(disc)
        return complex(-0.25 + s, 0.0), complex(-0.25 - s, 0.0)
    s = cmath.sqrt(disc)
    return complex(-0.25, 0.0) + s, complex(-0.25, 0.0) - s


@dataclass
class LimitPath:
    times: np.ndarray
    r: np.ndarray
    v: np.ndarray
    int_r2: float
    int_v2: float


def limit_ode_solve(omega_sq: float, x0, tau: float, dt: float) -> LimitPath:
    """Classical RK4 on the limit ODE with trapezoid integrals of r^2 and v^2."""
    if tau <= 0 or dt <= 0:
        raise ContractViolation("tau and dt must be > 0")
    A = limit_matrix(omega_sq)
    n = int(round(tau / dt))
    # one RK4 step of a linear ODE is multiplication by this polynomial in hA
    hA = dt * A
    P = np.eye(2) + hA + hA @ hA / 2 + hA @ hA @ hA / 6 + hA @ hA @ hA @ hA / 24
    X = np.empty((n + 1, 2))
    X[0] = x0
    for i in range(n):
        X[i + 1] = P @ X[i]
    r, v = X[:, 0], X[:, 1]
    trap = lambda y: float(dt * (y[1:] + y[:-1]).sum() / 2)
    return LimitPath(dt * np.arange(n + 1), r, v, trap(r * r), trap(v * v))


def eigen_components(omega_sq: float, x0) -> tuple[complex, complex]:
    """Coefficients (A_+, A_-) of x0 in the eigenvectors (lambda, 1) of the limit matrix."""
    lp, lm = eigenvalues(omega_sq)
    if lp == lm:
        raise ContractViolation("double eigenvalue: no eigenvector basis")
    V = np.array([[lp, lm], [1.0, 1.0]], dtype=complex)
    a = np.linalg.solve(V, np.asarray(x0, dtype=complex))
    return complex(a[0]), complex(a[1])


@dataclass
class RatioReport:
    omega_sq: float
    tau_list: list
    ratios: list
    predicted_limit: float | None
    regime: str
    component: str | None
    lower_bound: float
    exact_limit: float

    def to_dict(self) -> dict:
        return {"omega_sq": self.omega_sq, "tau": self.tau_list, "ratios": self.ratios,
                "predicted_limit": self.predicted_limit, "exact_limit": self.exact_limit,
                "regime": self.regime, "component": self.component, "lower_bound": self.lower_bound}


def ratio_limit_check(omega_sq: float, x0, tau_list: Sequence[float], dt: float = 1e-3) -> RatioReport:
    """int_0^tau r^2 / int_0^tau v^2 at each tau.

    For w^2 < 1/16 the predicted limit is lambda_+^2 when x0 has a nonzero
    lambda_+ component (|A_+| > 1e-12 |x0|) and lambda_-^2 otherwise.  For
    oscillatory modes only the minimum ratio is reported.  ``exact_limit``
    is the tau -> infinity value from :func:`gramian_ratio`; the two limits
    coincide only for eigenvector-aligned x0.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.any(x0):
        raise ContractViolation("x0 must be nonzero")
    tau_list = [float(t) for t in tau_list]
    if any(b <= a for a, b in zip(tau_list, tau_list[1:])):
        raise ContractViolation("tau_list must be increasing")
    path = limit_ode_solve(omega_sq, x0, tau_list[-1], dt)
    trap_r = np.concatenate([[0.0], np.cumsum(dt * (path.r[1:] ** 2 + path.r[:-1] ** 2) / 2)])
    trap_v = np.concatenate([[0.0], np.cumsum(dt * (path.v[1:] ** 2 + path.v[:-1] ** 2) / 2)])
    ratios = []
    for t in tau_list:
        i = int(round(t / dt))
        ratios.append(float(trap_r[i] / trap_v[i]))
    predicted, component, regime = None, None, "oscillatory"
    if omega_sq < 1.0 / 16.0:
        regime = "real"
        lp, lm = eigenvalues(omega_sq)
        ap, _ = eigen_components(omega_sq, x0)
        if abs(ap) > COMPONENT_RTOL * float(np.linalg.norm(x0)):
            predicted, component = lp.real ** 2, "plus"
        else:
            predicted, component = lm.real ** 2, "minus"
    elif omega_sq == 1.0 / 16.0:
        regime = "critical"
    return RatioReport(omega_sq, tau_list, ratios, predicted, regime, component, float(min(ratios)),
                       gramian_ratio(omega_sq, x0))


def gramian_ratio(omega_sq: float, x0) -> float:
    """Exact tau -> infinity limit of the ratio, from the observability Gramian.

    For Hurwitz A the integrals converge to x0^T G x0 with
    A^T G + G A + e e^T = 0; this is the value the numerical ratio approaches.
    """
    A = limit_matrix(omega_sq)
    x0 = np.asarray(x0, dtype=float)
    Gr = solve_continuous_lyapunov(A.T, -np.diag([1.0, 0.0]))
    Gv = solve_continuous_lyapunov(A.T, -np.diag([0.0, 1.0]))
    return float(x0 @ Gr @ x0 / (x0 @ Gv @ x0))
