"""Stationary covariance oracle, empirical statistics and decay-rate fits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .controllability import LinearControlSystem, build_linear_system, kalman_rank
from .errors import ContractViolation, InsufficientSamplesError, NoDecayWindowError, NotHurwitzError
from .integrators import Trajectory, iter_ensemble
from .models import ModelDescriptor, _coords

MIN_SAMPLES = 1000
N_BATCHES = 50


@dataclass(frozen=True)
class StationaryCovariance:
    """Covariance matrix with its provenance.

    ``stderr`` holds entrywise standard errors (empirical only); ``residual``
    the Frobenius norm of the Lyapunov residual (oracle only).
    """

    sigma: np.ndarray
    source: str
    n_samples_effective: int | None = None
    stderr: np.ndarray | None = None
    residual: float | None = None
    layout: tuple | None = None

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            if self.layout:
                fh.write(",".join(self.layout) + "\n")
            for row in self.sigma:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def is_hurwitz(A) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def solve_stationary(sys: LinearControlSystem, check_controllable: bool = True) -> StationaryCovariance:
    """Unique solution of A S + S A^T + B B^T = 0 for Hurwitz A."""
    A, B = sys.A, sys.B
    ev = np.linalg.eigvals(A)
    if not np.all(ev.real < 0):
        raise NotHurwitzError(f"no stationary Gaussian law: A has eigenvalue with real part {ev.real.max():.3g} >= 0")
    if check_controllable and kalman_rank(sys, "svd") < sys.n:
        warnings.warn("(A, B) is not controllable; the stationary law is degenerate", stacklevel=2)
    Q = B @ B.T
    S = solve_continuous_lyapunov(A, -Q)
    S = 0.5 * (S + S.T)
    res = float(np.linalg.norm(A @ S + S @ A.T + Q))
    return StationaryCovariance(S, "oracle", residual=res)


def lyapunov_residual(sys: LinearControlSystem, sigma) -> float:
    """||A S + S A^T + B B^T||_F / ||B B^T||_F (0/0 read as 0)."""
    Q = sys.B @ sys.B.T
    r = np.linalg.norm(sys.A @ sigma + sigma @ sys.A.T + Q)
    q = np.linalg.norm(Q)
    return float(r / q) if q > 0 else float(r)


def solve_stationary_kron(sys: LinearControlSystem) -> np.ndarray:
    """Same solution through the n^2 x n^2 system (I (x) A + A (x) I) vec S = -vec(B B^T)."""
    n = sys.n
    K = np.kron(np.eye(n), sys.A) + np.kron(sys.A, np.eye(n))
    s = np.linalg.solve(K, -(sys.B @ sys.B.T).reshape(-1, order="F"))
    S = s.reshape((n, n), order="F")
    return 0.5 * (S + S.T)


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------

def integrated_autocorrelation_time(y) -> float:
    """1 + 2 sum_k rho_k, truncated before the first negative autocorrelation."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    y = y - y.mean()
    var = float(y @ y) / n
    if var == 0 or n < 2:
        return 1.0
    f = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = 1.0
    for k in range(1, n):
        if acf[k] < 0:
            break
        tau += 2 * acf[k]
    return float(tau)


def batch_means_stderr(y, n_batches: int = N_BATCHES) -> np.ndarray:
    """Standard error of the mean of each column of ``y`` from non-overlapping batch means."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0] // n_batches * n_batches
    b = y[:n].reshape((n_batches, -1) + y.shape[1:]).mean(axis=1)
    return b.std(axis=0, ddof=1) / math.sqrt(n_batches)


def _post_burn(traj: Trajectory, burn_in_fraction: float) -> np.ndarray:
    if not 0 <= burn_in_fraction < 1:
        raise ContractViolation("burn_in_fraction must be in [0, 1)")
    X = traj.states[int(burn_in_fraction * len(traj.states)):]
    return X


def empirical_covariance(traj: Trajectory, burn_in_fraction: float = 0.1,
                         min_samples: int = MIN_SAMPLES) -> StationaryCovariance:
    """Sample covariance (about the sample mean) after burn-in.

    Entrywise standard errors come from batch means of the centred products;
    the effective sample size uses the integrated autocorrelation time of H.
    """
    X = _post_burn(traj, burn_in_fraction)
    n = X.shape[0]
    if n < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} post-burn-in samples, got {n}")
    # shifting by the first sample first keeps a constant trajectory exactly zero
    Y = X - X[0]
    Y = Y - Y.mean(axis=0)
    S = Y.T @ Y / n
    if not np.any(Y):
        return StationaryCovariance(S, "empirical", n, np.zeros_like(S), layout=traj.model.layout)
    prods = Y[:, :, None] * Y[:, None, :]
    se = batch_means_stderr(prods)
    H = traj.model.dynamics.hamiltonian(X)
    ess = int(n / integrated_autocorrelation_time(H))
    return StationaryCovariance(S, "empirical", ess, se, layout=traj.model.layout)


def second_moments(traj: Trajectory, burn_in_fraction: float = 0.1,
                   min_samples: int = MIN_SAMPLES) -> StationaryCovariance:
    """Uncentred second moments E[x x^T] with batch-means standard errors."""
    X = _post_burn(traj, burn_in_fraction)
    n = X.shape[0]
    if n < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} post-burn-in samples, got {n}")
    prods = X[:, :, None] * X[:, None, :]
    H = traj.model.dynamics.hamiltonian(X)
    ess = int(n / integrated_autocorrelation_time(H))
    return StationaryCovariance(prods.mean(axis=0), "empirical", ess, batch_means_stderr(prods),
                                layout=traj.model.layout)


@dataclass(frozen=True)
class TemperatureProfile:
    values: np.ndarray
    stderr: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("site,value,stderr\n")
            for i, (v, s) in enumerate(zip(self.values, self.stderr), start=1):
                fh.write(f"{i},{float(v)!r},{float(s)!r}\n")


def temperature_profile(traj: Trajectory, burn_in_fraction: float = 0.1,
                        min_samples: int = MIN_SAMPLES) -> TemperatureProfile:
    """<p_i^2> per site with batch-means standard errors.

    A single-state trajectory returns the squared momenta of that state.
    """
    idx = traj.model.momentum_indices
    if traj.model.root_kind == "lefevere_schenkel":
        raise ContractViolation("temperature profile needs site momenta p_1..p_N")
    if len(traj.states) == 1:
        p2 = traj.states[0, idx] ** 2
        return TemperatureProfile(p2, np.zeros_like(p2))
    X = _post_burn(traj, burn_in_fraction)
    if X.shape[0] < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} post-burn-in samples, got {X.shape[0]}")
    p2 = X[:, idx] ** 2
    return TemperatureProfile(p2.mean(axis=0), batch_means_stderr(p2))


# --------------------------------------------------------------------------
# convergence rate
# --------------------------------------------------------------------------

@dataclass
class RateFit:
    rate: float
    ci: tuple[float, float]
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    window: np.ndarray

    @property
    def positive(self) -> bool:
        return self.ci[0] > 0

    def to_dict(self) -> dict:
        w = self.times[self.window]
        return {"rate": self.rate, "ci": list(self.ci), "window": [float(w.min()), float(w.max())],
                "n_window_points": int(self.window.sum())}


def _observable(model, observable):
    if callable(observable):
        return observable
    if observable == "H":
        return model.dynamics.hamiltonian
    if observable == "p1_squared":
        i1 = model.boundary_indices[0]
        return lambda x: x[..., i1] ** 2
    if isinstance(observable, (list, tuple)):
        idx = [model.layout.index(s) if isinstance(s, str) else int(s) for s in observable]
        return lambda x: (x[..., idx] ** 2).sum(axis=-1)
    raise ContractViolation("observable must be 'H', 'p1_squared', a coordinate list or a callable")


def fit_decay(times, mean, stderr, n_se: float = 5.0, z: float = 1.96) -> RateFit:
    """Least-squares slope of log|m(t)| over the points where |m| > n_se * stderr."""
    times, mean, stderr = map(np.asarray, (times, mean, stderr))
    window = np.abs(mean) > n_se * stderr
    if window.sum() < 3:
        raise NoDecayWindowError("no resolvable decay window")
    t, y = times[window], np.log(np.abs(mean[window]))
    A = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(t) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    rate = -float(coef[1])
    half = z * math.sqrt(max(cov[1, 1], 0.0))
    return RateFit(rate, (rate - half, rate + half), times, mean, stderr, window)


def convergence_rate(model: ModelDescriptor, observable, x0_list, horizon: float, n_paths: int,
                     dt: float, seed: int, reference: float | None = None, n_grid: int = 50,
                     scheme: str = "euler", n_se: float = 5.0) -> RateFit:
    """Fit the exponential decay of m(t) = E f(X_t) - pi(f).

    ``n_paths`` paths start from each state in ``x0_list``.  ``reference`` is
    pi(f); for linear models and quadratic observables it defaults to the
    oracle value.
    """
    f = _observable(model, observable)
    if reference is None:
        reference = stationary_expectation(model, observable)
    x0 = np.array([np.asarray(_coords(model, x), dtype=float) for x in x0_list])
    x0 = np.repeat(x0, n_paths, axis=0)
    n_steps = int(round(horizon / dt))
    every = max(n_steps // n_grid, 1)
    times, means, ses = [0.0], [float(f(x0).mean() - reference)], [float(f(x0).std(ddof=1) / math.sqrt(len(x0)))]
    for n, _, _, xa in iter_ensemble(model, x0, dt, n_steps, seed, scheme):
        if (n + 1) % every == 0:
            v = f(xa)
            times.append((n + 1) * dt)
            means.append(float(v.mean() - reference))
            ses.append(float(v.std(ddof=1) / math.sqrt(len(v))))
    return fit_decay(np.array(times), np.array(means), np.array(ses), n_se)


def stationary_expectation(model: ModelDescriptor, observable) -> float:
    """pi(f) for quadratic observables of linear models, from the oracle covariance."""
    S = solve_stationary(linear_system_for(model)).sigma
    if observable == "H":
        M = model.dynamics.hess_h(np.zeros(model.dim))
        return 0.5 * float(np.sum(M * S))
    if observable == "p1_squared":
        i1 = model.boundary_indices[0]
        return float(S[i1, i1])
    if isinstance(observable, (list, tuple)):
        idx = [model.layout.index(s) if isinstance(s, str) else int(s) for s in observable]
        return float(sum(S[i, i] for i in idx))
    raise ContractViolation("no oracle expectation for this observable; pass reference")


def linear_system_for(model: ModelDescriptor) -> LinearControlSystem:
    """The (A, B) pair of a linear model, as used by the oracle."""
    if model.kind == "ou":
        d = model.dynamics
        return LinearControlSystem(d.A, d.B, "ou")
    return build_linear_system(model)
