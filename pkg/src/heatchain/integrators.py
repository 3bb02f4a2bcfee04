"""Time stepping, deterministic noise replay and the scaled-vs-limit experiment.

Noise convention
----------------
Every step of length ``dt`` consumes two half-step Wiener increments per
channel, shape ``(2, noise_dim)``, each with variance ``dt/2``.  Euler-Maruyama
uses their sum; the splitting scheme feeds one half to each of its two
Ornstein-Uhlenbeck / rotation half-steps.  Both schemes therefore see the
same Brownian path for a given seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import BlowUpError, ContractViolation
from .models import (ChainDynamics, ChainState, LinearDynamics, ModelDescriptor, ScalingMap,
                     _coords, hamiltonian, limit_model, scaled)

SCHEMES = ("euler", "splitting")
BLOWUP = 1e12
BLOCK = 1 << 15
PATH_CHUNK = 1024


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoisePath:
    """Wiener increments regenerated from ``seed``; never stored."""

    dt: float
    n_steps: int
    noise_dim: int
    seed: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ContractViolation("dt must be > 0")

    def blocks(self, block: int = BLOCK):
        """Yield ``(start, half_increments)`` in consecutive blocks."""
        gen = np.random.Generator(np.random.PCG64(self.seed))
        scale = math.sqrt(self.dt / 2)
        start = 0
        while start < self.n_steps:
            n = min(block, self.n_steps - start)
            yield start, gen.standard_normal((n, 2, self.noise_dim)) * scale
            start += n

    def half_increments(self) -> np.ndarray:
        parts = [b for _, b in self.blocks()]
        if not parts:
            return np.zeros((0, 2, self.noise_dim))
        return np.concatenate(parts)

    def increments(self) -> np.ndarray:
        """Full-step increments, shape (n_steps, noise_dim), variance dt."""
        return self.half_increments().sum(axis=1)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "dt": self.dt, "n_steps": self.n_steps, "noise_dim": self.noise_dim}


class EnsembleNoise:
    """Per-step half increments for a batch of paths.

    Paths are grouped in chunks of ``PATH_CHUNK``; chunk ``c`` draws from its
    own stream seeded by ``SeedSequence(seed, spawn_key=(c,))``, so chunks are
    independent and can be generated in parallel.
    """

    def __init__(self, seed: int, dt: float, n_paths: int, noise_dim: int):
        self.scale = math.sqrt(dt / 2)
        self.noise_dim = noise_dim
        self.sizes = [min(PATH_CHUNK, n_paths - s) for s in range(0, n_paths, PATH_CHUNK)]
        self.gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(c,))))
                     for c in range(len(self.sizes))]

    def draw(self) -> np.ndarray:
        parts = [g.standard_normal((n, 2, self.noise_dim)) for g, n in zip(self.gens, self.sizes)]
        return np.concatenate(parts) * self.scale


# --------------------------------------------------------------------------
# single steps (numpy reference implementation)
# --------------------------------------------------------------------------

def _check_finite(x, step=0):
    if not np.all(np.abs(x) <= BLOWUP):
        bad = x if x.ndim == 1 else x[~np.all(np.abs(x) <= BLOWUP, axis=-1)][0]
        raise BlowUpError(step, np.array(bad, dtype=float))


def _full_increment(model, dW):
    dW = np.asarray(dW, dtype=float)
    if dW.ndim >= 2 and dW.shape[-2:] == (2, model.noise_dim):
        return dW.sum(axis=-2)
    if dW.shape[-1:] != (model.noise_dim,):
        raise ContractViolation(f"dW must have length noise_dim={model.noise_dim}")
    return dW


def _wrap(state, x):
    return ChainState(x, state.layout) if isinstance(state, ChainState) else x


def step_euler_maruyama(model: ModelDescriptor, state, dt: float, dW, step: int = 0):
    """x + b(x) dt + sigma(x) dW, with sigma evaluated at the pre-step state."""
    if dt <= 0:
        raise ContractViolation("dt must be > 0")
    x = _coords(model, state)
    dW = _full_increment(model, dW)
    dyn = model.dynamics
    xn = x + dyn.drift(x) * dt + np.einsum("...ij,...j->...i", dyn.diffusion(x), dW)
    _check_finite(xn, step)
    return _wrap(state, xn)


def _ou_half(dyn: ChainDynamics, p, h, dw):
    c = float(dyn.friction)
    if c > 0:
        decay = math.exp(-c * h)
        amp = math.sqrt(-math.expm1(-2.0 * c * h) / (2.0 * c * h))
    else:
        decay, amp = 1.0, 1.0
    p[..., 0] = decay * p[..., 0] + dyn.sigma_left * amp * dw[..., 0]
    p[..., -1] = decay * p[..., -1] + dyn.sigma_right * amp * dw[..., -1]


def exchange_rotations(dyn: ChainDynamics, p, dw, reverse: bool = False):
    """Rotate each neighbouring momentum pair by sqrt(gamma) times its increment.

    ``dw`` holds one increment per channel (bath channels at both ends are
    ignored).  Each rotation leaves p_j^2 + p_{j+1}^2 unchanged.
    """
    sg = math.sqrt(dyn.gamma)
    pairs = range(dyn.N - 1, 0, -1) if reverse else range(1, dyn.N)
    for j in pairs:
        theta = sg * dw[..., j]
        c, s = np.cos(theta), np.sin(theta)
        a, b = p[..., j - 1].copy(), p[..., j].copy()
        p[..., j - 1] = c * a - s * b
        p[..., j] = s * a + c * b
    return p


def _verlet(dyn: ChainDynamics, x, dt):
    m = dyn.n_pos
    h = 0.5 * dt
    x[..., m:] += h * dyn.forces(x)
    p = x[..., m:]
    if dyn.coords == "q":
        x[..., :m] += dt * p
    else:
        x[..., :m] += dt * (p[..., 1:] - p[..., :-1])
    x[..., m:] += h * dyn.forces(x)
    return x


def _split_dw(model, dW):
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-2:] != (2, model.noise_dim):
        raise ContractViolation(
            f"splitting needs half-step increments of shape (..., 2, {model.noise_dim})")
    return dW


def step_splitting(model: ModelDescriptor, state, dt: float, dW, step: int = 0, thermostat: bool = True):
    """Strang splitting: OU/rotation half-step, velocity Verlet, OU/rotation half-step.

    ``dW`` holds the two half-step increments, shape (..., 2, noise_dim).
    With ``thermostat=False`` only the Hamiltonian (Verlet) core runs.
    """
    if dt <= 0:
        raise ContractViolation("dt must be > 0")
    dyn = model.dynamics
    if not isinstance(dyn, ChainDynamics):
        raise ContractViolation(f"splitting scheme supports chain models, not {model.kind!r}")
    x = np.array(_coords(model, state), dtype=float)
    m = dyn.n_pos
    h = 0.5 * dt
    if thermostat:
        dW = _split_dw(model, dW)
        p = x[..., m:]
        _ou_half(dyn, p, h, dW[..., 0, :])
        if dyn.gamma > 0:
            exchange_rotations(dyn, p, dW[..., 0, :])
    _verlet(dyn, x, dt)
    if thermostat:
        p = x[..., m:]
        if dyn.gamma > 0:
            exchange_rotations(dyn, p, dW[..., 1, :], reverse=True)
        _ou_half(dyn, p, h, dW[..., 1, :])
    _check_finite(x, step)
    return _wrap(state, x)


def hamiltonian_flow(model: ModelDescriptor, state, dt: float, n_steps: int) -> np.ndarray:
    """Velocity-Verlet trajectory of the conservative dynamics, shape (n_steps+1, dim)."""
    x = np.array(_coords(model, state), dtype=float)
    out = [x.copy()]
    for n in range(n_steps):
        x = step_splitting(model, x, dt, None, step=n, thermostat=False)
        out.append(x.copy())
    return np.array(out)


_STEPPERS = {"euler": step_euler_maruyama, "splitting": step_splitting}


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    model: ModelDescriptor
    times: np.ndarray
    states: np.ndarray
    noise: NoisePath
    scheme: str = "euler"
    record_every: int = 1
    backend: str = field(default="python")

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> ChainState:
        return ChainState(self.states[i], self.model.layout)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t," + ",".join(self.model.layout) + "\n")
            for t, row in zip(self.times, self.states):
                fh.write(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def _kernel_for(model: ModelDescriptor):
    k = _backend.kernels
    dyn = model.dynamics
    if isinstance(dyn, LinearDynamics):
        return k.LinearKernel(dyn.A, dyn.B)
    U, V = dyn.U, dyn.V
    if not U.is_polynomial:
        return None
    du = np.array([float(c) for c in (j * U.coeffs[j] for j in range(1, len(U.coeffs)))] or [0.0])
    if V is None:
        v_mode, dv, v_in, v_out = 0, np.zeros(1), 1.0, 0.0
    elif V.is_polynomial:
        v_mode, v_in, v_out = 1, 1.0, 1.0
        dv = np.array([float(j * V.coeffs[j]) for j in range(1, len(V.coeffs))] or [0.0])
    else:
        v_mode, dv, v_in, v_out = 2, np.zeros(1), V.s_in, V.c_out * V.s_in
    return k.ChainKernel(dyn.coords == "q", dyn.N, du, v_mode, dv, v_in, v_out,
                         float(dyn.friction), dyn.sigma_left, dyn.sigma_right, float(dyn.gamma))


def simulate(model: ModelDescriptor, init, dt: float, n_steps: int, seed: int,
             scheme: str = "euler", record_every: int = 1, backend: str | None = None) -> Trajectory:
    """Integrate one trajectory; a deterministic function of its arguments.

    ``backend`` is ``"cython"``, ``"python"`` or None (compiled when built).
    """
    if scheme not in SCHEMES:
        raise ContractViolation(f"scheme must be one of {SCHEMES}")
    if record_every < 1 or n_steps % record_every != 0:
        raise ContractViolation("record_every must be >= 1 and divide n_steps")
    if n_steps < 0:
        raise ContractViolation("n_steps must be >= 0")
    if scheme == "splitting" and not model.is_chain:
        raise ContractViolation(f"splitting scheme supports chain models, not {model.kind!r}")
    x = np.array(_coords(model, init), dtype=float)
    if x.ndim != 1:
        raise ContractViolation("simulate integrates a single state; see iter_ensemble")
    noise = NoisePath(dt, n_steps, model.noise_dim, seed)
    n_rec = n_steps // record_every
    out = np.empty((n_rec + 1, model.dim))
    out[0] = x

    if backend is None:
        backend = _backend.BACKEND
    kernel = _kernel_for(model) if backend == "cython" and _backend.kernels is not None else None
    if backend == "cython" and kernel is None:
        backend = "python"

    pos = 1
    sch = SCHEMES.index(scheme)
    for start, dw in noise.blocks():
        if kernel is not None:
            pos = kernel.run(x, np.ascontiguousarray(dw), dt, sch, start, record_every, out, pos)
        else:
            step = _STEPPERS[scheme]
            for i in range(dw.shape[0]):
                x = step(model, x, dt, dw[i], step=start + i)
                if (start + i + 1) % record_every == 0:
                    out[pos] = x
                    pos += 1
    times = dt * record_every * np.arange(n_rec + 1)
    return Trajectory(model, times, out, noise, scheme, record_every, backend)


def iter_ensemble(model: ModelDescriptor, x0, dt: float, n_steps: int, seed: int,
                  scheme: str = "euler", n_paths: int | None = None):
    """Integrate a batch of paths, yielding ``(step, x_before, dW, x_after)``.

    ``x0`` is a single state (broadcast to ``n_paths``) or an array of shape
    (n_paths, dim).  ``dW`` has shape (n_paths, 2, noise_dim).
    """
    x = np.array(_coords(model, x0), dtype=float)
    if x.ndim == 1:
        if n_paths is None:
            raise ContractViolation("n_paths needed for a single initial state")
        x = np.broadcast_to(x, (n_paths, model.dim)).copy()
    noise = EnsembleNoise(seed, dt, x.shape[0], model.noise_dim)
    step = _STEPPERS[scheme]
    for n in range(n_steps):
        dW = noise.draw()
        xn = step(model, x, dt, dW, step=n)
        yield n, x, dW, xn
        x = xn


def simulate_ensemble(model: ModelDescriptor, x0, dt: float, n_steps: int, seed: int,
                      scheme: str = "euler", n_paths: int | None = None,
                      record_every: int = 1) -> np.ndarray:
    """Recorded ensemble states, shape (n_records + 1, n_paths, dim)."""
    if record_every < 1 or n_steps % record_every != 0:
        raise ContractViolation("record_every must be >= 1 and divide n_steps")
    recs = []
    for n, x, _, xn in iter_ensemble(model, x0, dt, n_steps, seed, scheme, n_paths):
        if n == 0:
            recs.append(x.copy())
        if (n + 1) % record_every == 0:
            recs.append(xn.copy())
    if not recs:
        x = np.array(_coords(model, x0), dtype=float)
        recs = [np.broadcast_to(x, (n_paths, model.dim)).copy() if x.ndim == 1 else x]
    return np.array(recs)


# --------------------------------------------------------------------------
# scaled vs limit comparison
# --------------------------------------------------------------------------

@dataclass
class ScaledComparison:
    E_list: list[float]
    sup_distance: list[float]
    limit_boundary_integral: float
    tau: float
    dt: float
    seed: int

    @property
    def strictly_decreasing(self) -> bool:
        d = self.sup_distance
        return all(b < a for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        return {"E": self.E_list, "sup_distance": self.sup_distance,
                "limit_boundary_integral": self.limit_boundary_integral,
                "strictly_decreasing": self.strictly_decreasing,
                "tau": self.tau, "dt": self.dt, "seed": self.seed}


def boundary_integral(model: ModelDescriptor, states: np.ndarray, dt: float) -> float | np.ndarray:
    """Trapezoid-rule integral of p_1^2 + p_N^2 along recorded states."""
    i1, iN = model.boundary_indices
    f = states[..., i1] ** 2 + states[..., iN] ** 2
    return dt * (f[1:] + f[:-1]).sum(axis=0) / 2


def scaled_comparison(model: ModelDescriptor, x, E_list, tau: float, dt: float, seed: int,
                      scheme: str = "euler", check_energy: bool = True) -> ScaledComparison:
    """Sup-distance between the scaled system and its limit under one noise path.

    ``x`` must satisfy H_inf(x) = 1; both systems start from it.
    """
    E_list = [float(e) for e in E_list]
    if any(b <= a for a, b in zip(E_list, E_list[1:])):
        raise ContractViolation("E_list must be increasing")
    lim = limit_model(model)
    x = np.asarray(_coords(lim, x), dtype=float)
    if check_energy and not math.isclose(float(hamiltonian(lim, x)), 1.0, rel_tol=1e-9):
        raise ContractViolation("initial state must satisfy H_inf(x) = 1")
    n_steps = int(round(tau / dt))
    ref = simulate(lim, x, dt, n_steps, seed, scheme).states
    sups = []
    for E in E_list:
        traj = simulate(scaled(model, E), x, dt, n_steps, seed, scheme).states
        sups.append(float(np.max(np.linalg.norm(traj - ref, axis=1))))
    return ScaledComparison(E_list, sups, float(boundary_integral(lim, ref, dt)), tau, dt, seed)


def scaled_via_original(model: ModelDescriptor, x, E: float, tau: float, dt: float, seed: int) -> np.ndarray:
    """States of the scaled system obtained by rescaling the original one.

    Runs the original system from the unscaled state with step
    ``E^{1/k-1/2} dt`` and increments ``sqrt(E^{1/k-1/2})`` times the scaled
    path's increments, then maps every state back with the scaling map.
    Euler-Maruyama only; agrees with ``simulate(scaled(model, E), ...)`` up
    to rounding.
    """
    smap = ScalingMap(E, model.potentials.k)
    s = smap.time_factor
    n_steps = int(round(tau / dt))
    fac = smap.factors(model.layout)
    x = np.asarray(x, dtype=float)
    y = x / fac
    noise = NoisePath(dt, n_steps, model.noise_dim, seed).half_increments() * math.sqrt(s)
    out = [y * fac]
    for n in range(n_steps):
        y = step_euler_maruyama(model, y, s * dt, noise[n], step=n)
        out.append(y * fac)
    return np.array(out)
