"""Generator of the chain diffusions applied to H, H^2 and W = exp(theta H).

Closed forms are hand-expanded per model kind.  A second, independent route
applies the second-order operator ``b . grad f + 1/2 tr(a Hess f)`` with the
model's own drift, diffusion, gradient and Hessian; the two routes meet in
:func:`gamma_defect`.  Passing object arrays of :class:`fractions.Fraction`
keeps every polynomial computation exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ContractViolation
from .integrators import iter_ensemble
from .models import ModelDescriptor, _coords, _is_exact_array, _num, as_exact

CHAIN_KINDS = ("pinned", "unpinned", "exchange")
CLOSED_KINDS = CHAIN_KINDS + ("lefevere_schenkel",)


@dataclass(frozen=True)
class LyapunovConfig:
    """Exponent theta of W = exp(theta H) and conjugate Hoelder exponents."""

    theta: float
    alpha: float = 1.1
    beta: float | None = None

    def __post_init__(self):
        if self.theta <= 0:
            raise ContractViolation("theta must be > 0")
        if self.alpha <= 1:
            raise ContractViolation("alpha must be > 1")
        if self.beta is None:
            object.__setattr__(self, "beta", self.alpha / (self.alpha - 1))
        if self.beta <= 1 or not math.isclose(1 / self.alpha + 1 / self.beta, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ContractViolation("alpha and beta must be conjugate exponents")

    def validate(self, model: ModelDescriptor, holder: bool = False) -> None:
        """Raise unless theta max(T) < 1 (and alpha theta max(T) < 1 with ``holder``)."""
        tmax = max(model.temperatures)
        if self.theta * tmax >= 1:
            raise ContractViolation(f"theta*max(T) = {self.theta * tmax} must be < 1")
        if holder and self.alpha * self.theta * tmax >= 1:
            raise ContractViolation(f"alpha*theta*max(T) = {self.alpha * self.theta * tmax} must be < 1")

    def to_dict(self) -> dict:
        return {"theta": self.theta, "alpha": self.alpha, "beta": self.beta}


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _state(model, state, exact=False):
    x = _coords(model, state)
    if exact and not _is_exact_array(x):
        x = as_exact(x)
    return x


def _temps(model, exact):
    T1, TN = model.temperatures
    return _num(T1, exact), _num(TN, exact)


def _ls_parts(model, x):
    """Interior blocks (..., n, 4) as (R, S, V, W), edge blocks (..., 2, 2) as (R, V), and w_k^2, D_k."""
    exact = _is_exact_array(x)
    N = model.chain_N
    n_int = N // 2 - 1
    w2 = model.omega_sq
    ks = list(range(1, N // 2))
    body = x[..., :4 * n_int].reshape(x.shape[:-1] + (n_int, 4))
    edge = x[..., 4 * n_int:].reshape(x.shape[:-1] + (2, 2))
    m = model if model.kind == "lefevere_schenkel" else model.base
    conv = (lambda v: np.array([_num(c, exact) for c in v], dtype=object if exact else float))
    w_int = conv([w2[k] for k in ks])
    D_int = conv([m.D[k] for k in ks])
    return body, edge, w_int, D_int


def _require_closed(model):
    if model.kind not in CLOSED_KINDS:
        raise ContractViolation(f"closed-form generator covers {CLOSED_KINDS}, not {model.kind!r}")


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------

def apply_generator_H(model: ModelDescriptor, state):
    """LH in closed form.

    Chains (with or without exchange noise): ``1/2 (T_1 - p_1^2 + T_N - p_N^2)``.
    Lefevere-Schenkel in real mode coordinates:
    ``N T / 2 + sum_k D_k^2 omega_k^2 - 1/2 sum (mode momenta)^2``.
    """
    _require_closed(model)
    x = _coords(model, state)
    exact = _is_exact_array(x)
    half = _num(Fraction(1, 2), exact)
    if model.kind in CHAIN_KINDS:
        T1, TN = _temps(model, exact)
        i1, iN = model.boundary_indices
        return half * (T1 - x[..., i1] ** 2 + TN - x[..., iN] ** 2)
    body, edge, w_int, D_int = _ls_parts(model, x)
    T = _num(model.T, exact)
    const = half * model.chain_N * T + (D_int * D_int * w_int).sum()
    mom = (body[..., 0] ** 2 + body[..., 1] ** 2).sum(axis=-1) + (edge[..., 0] ** 2).sum(axis=-1)
    return const - half * mom


def carre_du_champ_H(model: ModelDescriptor, state):
    """Gamma H = 1/2 |sigma^T grad H|^2 in closed form.

    Chains: ``1/2 (T_1 p_1^2 + T_N p_N^2)``; the exchange channels drop out.
    Lefevere-Schenkel: ``1/2 sum_k [(sqrt(T) R_k - w_k^2 D_k W_k)^2 +
    (sqrt(T) S_k + w_k^2 D_k V_k)^2] + 1/2 sum_edge T R^2``.
    """
    _require_closed(model)
    x = _coords(model, state)
    exact = _is_exact_array(x)
    half = _num(Fraction(1, 2), exact)
    if model.kind in CHAIN_KINDS:
        T1, TN = _temps(model, exact)
        i1, iN = model.boundary_indices
        return half * (T1 * x[..., i1] ** 2 + TN * x[..., iN] ** 2)
    body, edge, w_int, D_int = _ls_parts(model, x)
    T = _num(model.T, exact)
    sT = _num(math.sqrt(model.T), exact)
    R, S, V, W = (body[..., i] for i in range(4))
    c = w_int * D_int
    inner = ((sT * R - c * W) ** 2 + (sT * S + c * V) ** 2).sum(axis=-1)
    return half * inner + half * T * (edge[..., 0] ** 2).sum(axis=-1)


def lw_over_w(model: ModelDescriptor, state, cfg: LyapunovConfig):
    """LW / W for W = exp(theta H), i.e. theta LH + theta^2 Gamma H.

    For chains this is ``1/2 theta [(T_1+T_N) - (p_1^2+p_N^2) + theta (T_1 p_1^2 + T_N p_N^2)]``.
    """
    _require_closed(model)
    x = _coords(model, state)
    exact = _is_exact_array(x)
    th = _num(cfg.theta, exact)
    if model.kind in CHAIN_KINDS:
        T1, TN = _temps(model, exact)
        i1, iN = model.boundary_indices
        p1, pN = x[..., i1] ** 2, x[..., iN] ** 2
        half = _num(Fraction(1, 2), exact)
        return half * th * ((T1 + TN) - (p1 + pN) + th * (T1 * p1 + TN * pN))
    return th * apply_generator_H(model, x) + th * th * carre_du_champ_H(model, x)


def lyapunov_W(model: ModelDescriptor, state, theta: float, h_min: float = 0.0):
    """W = exp(theta (H - H_min)); H_min = 0 bounds H below for the built-in potentials."""
    return np.exp(theta * (model.dynamics.hamiltonian(_coords(model, state)) - h_min))


# --------------------------------------------------------------------------
# generic second-order operator
# --------------------------------------------------------------------------

def _diffusion_cov(model, x):
    S = model.dynamics.diffusion(x)
    return (S[..., :, None, :] * S[..., None, :, :]).sum(axis=-1)


def generator_H_generic(model: ModelDescriptor, state):
    """b . grad H + 1/2 tr(a Hess H) from the model's drift and diffusion."""
    x = _coords(model, state)
    dyn = model.dynamics
    half = _num(Fraction(1, 2), _is_exact_array(x))
    a = _diffusion_cov(model, x)
    hess = dyn.hess_h(x)
    return (dyn.drift(x) * dyn.grad_h(x)).sum(axis=-1) + half * (a * hess).sum(axis=(-1, -2))


def generator_H2_generic(model: ModelDescriptor, state):
    """L(H^2) through the product rule: grad H^2 = 2H grad H, Hess H^2 = 2 grad H grad H^T + 2H Hess H."""
    x = _coords(model, state)
    dyn = model.dynamics
    exact = _is_exact_array(x)
    two = _num(2, exact)
    half = _num(Fraction(1, 2), exact)
    H = np.asarray(dyn.hamiltonian(x), dtype=object if exact else float)
    g = dyn.grad_h(x)
    grad2 = two * H[..., None] * g
    hess2 = two * g[..., :, None] * g[..., None, :] + two * H[..., None, None] * dyn.hess_h(x)
    a = _diffusion_cov(model, x)
    return (dyn.drift(x) * grad2).sum(axis=-1) + half * (a * hess2).sum(axis=(-1, -2))


def _exactable(model):
    m = model
    while m.kind in ("scaled", "limit"):
        m = m.base
    return m.potentials is None or m.potentials.is_polynomial


def gamma_defect(model: ModelDescriptor, state, exact: bool | None = None):
    """1/2 (L(H^2) - 2 H LH) - Gamma H, with L(H^2) from the generic operator.

    LH and Gamma H come from the closed forms, so a zero defect certifies that
    the closed forms agree with the model's drift and diffusion.  By default
    the evaluation is exact (Fractions) for polynomial models; the result is
    then returned as a float.
    """
    if exact is None:
        exact = _exactable(model)
    x = _state(model, state, exact)
    H = model.dynamics.hamiltonian(x)
    half = _num(Fraction(1, 2), exact)
    d = half * (generator_H2_generic(model, x) - 2 * H * apply_generator_H(model, x)) - carre_du_champ_H(model, x)
    return np.asarray(d, dtype=float) if isinstance(d, np.ndarray) else float(d)


# --------------------------------------------------------------------------
# drift bound
# --------------------------------------------------------------------------

def sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    """Uniform samples from the closed ball of given radius in R^dim."""
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * radius * rng.random((n, 1)) ** (1.0 / dim)


@dataclass(frozen=True)
class LSConstants:
    """Constants of the mode-chain bound LH + alpha theta Gamma H <= C1 - C2/2 sum(|P|^2 - theta C3 |Q|^2)."""

    C: float
    C1: float
    C2: float
    C3: float
    theta0: float

    def to_dict(self) -> dict:
        return {"C": self.C, "C1": self.C1, "C2": self.C2, "C3": self.C3, "theta0": self.theta0}


def ls_constants(model: ModelDescriptor, cfg: LyapunovConfig) -> LSConstants:
    N = model.chain_N
    w2 = model.omega_sq
    ks = range(1, N // 2)
    C = 0.5 * N * model.T + sum(model.D[k] ** 2 * w2[k] for k in ks)
    C2 = 1.0 - 2.0 * cfg.alpha * cfg.theta * model.T
    m = max((w2[k] ** 2 * model.D[k] ** 2 for k in ks), default=0.0)
    C3 = 2.0 * cfg.alpha * m / C2 if C2 > 0 else math.inf
    return LSConstants(float(C), float(C), float(C2), float(C3), 1.0 / (2.0 * cfg.alpha * model.T))


def _ls_split(model, x):
    lab = model.layout
    mom = np.array([s[0] in "RS" for s in lab])
    return (x[..., mom] ** 2).sum(axis=-1), (x[..., ~mom] ** 2).sum(axis=-1)


@dataclass
class DriftBoundReport:
    model: dict
    config: dict
    n_samples: int
    radius: float
    max_violation: float
    argmax_state: list
    checks: dict = field(default_factory=dict)
    constants: dict | None = None

    @property
    def holds(self) -> bool:
        return self.max_violation <= 0

    def to_dict(self) -> dict:
        out = {"model": self.model, "config": self.config, "n_samples": self.n_samples,
               "radius": self.radius, "max_violation": self.max_violation,
               "argmax_state": self.argmax_state, "holds": self.holds, "checks": self.checks}
        if self.constants is not None:
            out["constants"] = self.constants
        return out


def _arbitrate(model, xs, viol, fn):
    """Recompute positive float violations exactly so rounding cannot flip the sign."""
    if not _exactable(model):
        return viol
    viol = viol.copy()
    for i in np.flatnonzero(viol > 0):
        viol[i] = float(fn(as_exact(xs[i])))
    return viol


def drift_bound_check(model: ModelDescriptor, cfg: LyapunovConfig, n_samples: int, radius: float,
                      seed: int, validate: bool = True) -> DriftBoundReport:
    """Max over uniformly sampled states of the drift-bound violation.

    Chains: ``LW/W - theta (T_1+T_N)/2``.  Mode chain: both ``LH - C`` and the
    combined bound with the constants reported in the output.  With
    ``validate=False`` an out-of-range theta is accepted (negative control).
    """
    _require_closed(model)
    if validate:
        cfg.validate(model, holder=model.kind == "lefevere_schenkel")
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = sample_ball(rng, n_samples, model.dim, radius)
    checks = {}
    constants = None
    if model.kind in CHAIN_KINDS:
        T1, TN = model.temperatures

        def fn(x):
            ex = _is_exact_array(x)
            return lw_over_w(model, x, cfg) - _num(cfg.theta, ex) * (_num(T1, ex) + _num(TN, ex)) / 2

        viol = _arbitrate(model, xs, fn(xs), fn)
        checks["lw_over_w"] = float(viol.max())
    else:
        k = ls_constants(model, cfg)
        constants = k.to_dict()

        def f_lh(x):
            return apply_generator_H(model, x) - _num(k.C, _is_exact_array(x))

        def f_comb(x):
            ex = _is_exact_array(x)
            mom, pos = _ls_split(model, x)
            lhs = apply_generator_H(model, x) + _num(cfg.alpha * cfg.theta, ex) * carre_du_champ_H(model, x)
            rhs = _num(k.C1, ex) - _num(k.C2, ex) / 2 * (mom - _num(cfg.theta * k.C3, ex) * pos)
            return lhs - rhs

        v1 = _arbitrate(model, xs, f_lh(xs), f_lh)
        v2 = _arbitrate(model, xs, f_comb(xs), f_comb)
        checks["lh_le_C"] = float(v1.max())
        checks["combined"] = float(v2.max())
        viol = np.maximum(v1, v2)
    i = int(np.argmax(viol))
    return DriftBoundReport(model.to_config(), cfg.to_dict(), n_samples, radius, float(viol[i]),
                            [float(v) for v in xs[i]], checks, constants)


def ls_gamma_bound_violation(model: ModelDescriptor, state):
    """Gamma H - sum_k (T |P_k|^2 + w_k^4 D_k^2 |Q_k|^2); nonpositive everywhere."""
    x = _coords(model, state)
    exact = _is_exact_array(x)
    body, edge, w_int, D_int = _ls_parts(model, x)
    T = _num(model.T, exact)
    c2 = (w_int * D_int) ** 2
    bound = (T * (body[..., 0] ** 2 + body[..., 1] ** 2) + c2 * (body[..., 2] ** 2 + body[..., 3] ** 2)).sum(axis=-1)
    bound = bound + T * (edge[..., 0] ** 2).sum(axis=-1)
    return carre_du_champ_H(model, x) - bound


# --------------------------------------------------------------------------
# pathwise diagnostics
# --------------------------------------------------------------------------

def boundary_momenta_sq(model: ModelDescriptor, x):
    i1, iN = model.boundary_indices
    return x[..., i1] ** 2 + x[..., iN] ** 2


@dataclass
class MartingaleDiagnostics:
    """Per-path accumulations along an Euler-Maruyama ensemble.

    ``M`` is the Ito sum of ``grad H^T sigma dW``, ``bracket`` its predictable
    quadratic variation ``sum |sigma^T grad H|^2 dt``, ``realized_qv`` the sum
    of squared increments of H, ``int_2gamma`` the left-point integral of
    ``2 Gamma H`` (closed form), ``compensated`` is ``H(X_t) - H(x) - int LH``.
    """

    t: float
    dt: float
    M: np.ndarray
    bracket: np.ndarray
    realized_qv: np.ndarray
    int_2gamma: np.ndarray
    int_boundary: np.ndarray
    compensated: np.ndarray

    def exponential_martingale(self, a: float) -> tuple[float, float]:
        """Mean and standard error of exp(a M - a^2 <M> / 2)."""
        z = np.exp(a * self.M - 0.5 * a * a * self.bracket)
        return float(z.mean()), float(z.std(ddof=1) / math.sqrt(len(z)))

    def compensator_mean(self) -> tuple[float, float]:
        c = self.compensated
        return float(c.mean()), float(c.std(ddof=1) / math.sqrt(len(c)))

    def qv_ratio(self, reference: str = "int_2gamma") -> float:
        """Total realized quadratic variation over the total of ``reference``."""
        return float(self.realized_qv.sum() / getattr(self, reference).sum())


def martingale_diagnostics(model: ModelDescriptor, x, t: float, dt: float, n_paths: int,
                           seed: int) -> MartingaleDiagnostics:
    """Integrate an ensemble from ``x`` and accumulate the martingale part of H."""
    _require_closed(model)
    n_steps = int(round(t / dt))
    dyn = model.dynamics
    M = np.zeros(n_paths)
    br = np.zeros(n_paths)
    qv = np.zeros(n_paths)
    g2 = np.zeros(n_paths)
    ib = np.zeros(n_paths)
    lh = np.zeros(n_paths)
    H0 = None
    Hn = None
    for n, xb, dW, xa in iter_ensemble(model, x, dt, n_steps, seed, "euler", n_paths):
        if H0 is None:
            H0 = dyn.hamiltonian(xb)
            Hn = H0
        S = dyn.diffusion(xb)
        v = (S * dyn.grad_h(xb)[..., :, None]).sum(axis=-2)  # sigma^T grad H
        M += (v * dW.sum(axis=-2)).sum(axis=-1)
        br += (v * v).sum(axis=-1) * dt
        Ha = dyn.hamiltonian(xa)
        qv += (Ha - Hn) ** 2
        g2 += 2 * carre_du_champ_H(model, xb) * dt
        ib += boundary_momenta_sq(model, xb) * dt
        lh += apply_generator_H(model, xb) * dt
        Hn = Ha
    if H0 is None:
        H0 = Hn = np.full(n_paths, float(dyn.hamiltonian(np.asarray(_coords(model, x), dtype=float))))
    return MartingaleDiagnostics(t, dt, M, br, qv, g2, ib, Hn - H0 - lh)


@dataclass
class ExpBoundEstimate:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    C: float
    t0: float
    n_paths: int

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)

    def holds(self, n_se: float = 3.0) -> bool:
        return self.lhs <= self.rhs + n_se * self.combined_se

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs, "rhs_se": self.rhs_se,
                "C": self.C, "t0": self.t0, "n_paths": self.n_paths, "holds": self.holds()}


def exp_bound_estimate(model: ModelDescriptor, x, cfg: LyapunovConfig, t0: float, C: float | None,
                       n_paths: int, dt: float, seed: int, scheme: str = "euler") -> ExpBoundEstimate:
    """Monte-Carlo estimates of both sides of the Hoelder bound on T_t W / W.

    ``lhs = E[W(X_t0)] / W(x)`` and
    ``rhs = exp(theta (T_1+T_N) t0 / 2) E[exp(-C int_0^t0 (p_1^2+p_N^2))]^(1/beta)``
    with ``C = beta theta (1 - alpha theta max T) / 2`` unless given.  The
    momentum integral uses the trapezoid rule on the integration grid.
    """
    if model.kind not in CHAIN_KINDS:
        raise ContractViolation("exp_bound_estimate applies to chain models")
    cfg.validate(model, holder=True)
    T1, TN = model.temperatures
    if C is None:
        C = cfg.beta * cfg.theta * (1 - cfg.alpha * cfg.theta * max(T1, TN)) / 2
    x0 = np.asarray(_coords(model, x), dtype=float)
    if t0 == 0:
        return ExpBoundEstimate(1.0, 0.0, 1.0, 0.0, C, 0.0, n_paths)
    dyn = model.dynamics
    n_steps = int(round(t0 / dt))
    H0 = float(dyn.hamiltonian(x0))
    integral = np.zeros(n_paths)
    last = None
    for n, xb, _, xa in iter_ensemble(model, x0, dt, n_steps, seed, scheme, n_paths):
        integral += 0.5 * dt * (boundary_momenta_sq(model, xb) + boundary_momenta_sq(model, xa))
        last = xa
    ratio = np.exp(cfg.theta * (dyn.hamiltonian(last) - H0))
    if not np.all(np.isfinite(ratio)) or not np.all(np.isfinite(integral)):
        raise FloatingPointError("non-finite path functional")
    lhs, lhs_se = ratio.mean(), ratio.std(ddof=1) / math.sqrt(n_paths)
    z = np.exp(-C * integral)
    m, m_se = z.mean(), z.std(ddof=1) / math.sqrt(n_paths)
    pref = math.exp(0.5 * cfg.theta * (T1 + TN) * t0)
    rhs = pref * m ** (1 / cfg.beta)
    rhs_se = pref * m ** (1 / cfg.beta - 1) * m_se / cfg.beta
    return ExpBoundEstimate(float(lhs), float(lhs_se), float(rhs), float(rhs_se), float(C), t0, n_paths)
