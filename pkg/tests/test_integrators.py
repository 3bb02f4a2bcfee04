import math

import numpy as np
import pytest

from heatchain.errors import BlowUpError, ContractViolation
from heatchain.integrators import (EnsembleNoise, NoisePath, _ou_half, boundary_integral, exchange_rotations,
                                   hamiltonian_flow, scaled_comparison, scaled_via_original, simulate,
                                   simulate_ensemble, step_euler_maruyama, step_splitting)
from heatchain.models import (ChainState, exchange, hamiltonian, lefevere_schenkel, limit_model, ou, pinned,
                              scaled, unpinned)
from heatchain.potentials import PotentialSpec

FPU = PotentialSpec("fpu")
FPU_Q = PotentialSpec("fpu", "quartic-pinning", alpha=0.5)
HARM_P = PotentialSpec("harmonic", "harmonic-pinning", alpha=1.0)


# noise -------------------------------------------------------------------------

def test_noise_path_statistics():
    dt, n = 1e-3, 20000
    inc = NoisePath(dt, n, 3, seed=11).increments()
    assert inc.shape == (n, 3)
    mean_se = math.sqrt(dt / n)
    var_se = dt * math.sqrt(2.0 / n)
    assert np.all(np.abs(inc.mean(axis=0)) < 4 * mean_se)
    assert np.all(np.abs(inc.var(axis=0) - dt) < 4 * var_se)


def test_noise_path_replay_and_blocking():
    a = NoisePath(0.01, 70000, 2, seed=5)
    b = NoisePath(0.01, 70000, 2, seed=5)
    np.testing.assert_array_equal(a.half_increments(), b.half_increments())
    # block boundaries do not change the stream
    np.testing.assert_array_equal(np.concatenate([blk for _, blk in a.blocks(1000)]), a.half_increments())
    assert not np.array_equal(a.half_increments(), NoisePath(0.01, 70000, 2, seed=6).half_increments())
    assert NoisePath(0.1, 0, 2, 1).increments().shape == (0, 2)


def test_ensemble_chunks_are_independent_of_batch_size():
    big = EnsembleNoise(3, 0.01, 3000, 2).draw()
    small = EnsembleNoise(3, 0.01, 1024, 2).draw()
    np.testing.assert_array_equal(big[:1024], small)
    assert big.shape == (3000, 2, 2)


# Euler-Maruyama -------------------------------------------------------------

def test_em_fixed_point():
    m = pinned(3, FPU_Q)
    x = np.zeros(m.dim)
    np.testing.assert_array_equal(step_euler_maruyama(m, x, 0.01, np.zeros(2)), x)


def test_em_example_step():
    m = pinned(2)
    s = step_euler_maruyama(m, m.state([0.0, 1.0, 0.0, 0.0]), 0.01, np.zeros(2))
    assert isinstance(s, ChainState)
    np.testing.assert_allclose(s.coords, [0.0, 1.0, 0.01, -0.01], rtol=0, atol=1e-17)


def test_em_limit_model_ignores_noise():
    lim = limit_model(pinned(3, HARM_P, 1.0, 2.0))
    x = np.array([0.1, -0.2, 0.3, 0.5, 0.0, -0.4])
    np.testing.assert_array_equal(step_euler_maruyama(lim, x, 0.01, [3.0, -2.0]),
                                  step_euler_maruyama(lim, x, 0.01, [0.0, 0.0]))


def test_em_accepts_half_increments():
    m = exchange(3, 1.0)
    x = np.array([0.1, 0.2, 1.0, -1.0, 0.5])
    dw = np.array([[0.1, -0.2, 0.05, 0.3], [0.0, 0.1, -0.1, 0.2]])
    np.testing.assert_array_equal(step_euler_maruyama(m, x, 0.01, dw),
                                  step_euler_maruyama(m, x, 0.01, dw.sum(axis=0)))


def test_em_contracts():
    m = pinned(2)
    with pytest.raises(ContractViolation):
        step_euler_maruyama(m, np.zeros(4), 0.0, np.zeros(2))
    with pytest.raises(ContractViolation):
        step_euler_maruyama(m, np.zeros(4), 0.1, np.zeros(3))


def test_blow_up_reports_step():
    m = pinned(2, FPU)
    with pytest.raises(BlowUpError) as err:
        simulate(m, [0.0, 50.0, 0.0, 0.0], 1.0, 100, seed=0, backend="python")
    assert err.value.step < 100
    assert err.value.state.shape == (4,)


# splitting ---------------------------------------------------------------------

def test_splitting_rejects_linear_models():
    with pytest.raises(ContractViolation):
        step_splitting(ou(), np.zeros(1), 0.1, np.zeros((2, 1)))
    with pytest.raises(ContractViolation):
        step_splitting(pinned(2), np.zeros(4), 0.1, np.zeros(2))


def test_verlet_core_energy_drift_harmonic():
    m = pinned(3, HARM_P, 0.0, 0.0)
    x = np.array([0.3, -0.5, 0.2, 1.0, 0.0, -0.7])
    path = hamiltonian_flow(m, x, 1e-3, 10000)
    H = hamiltonian(m, path)
    assert np.max(np.abs(H - H[0])) / H[0] < 1e-6


@pytest.mark.parametrize("model", [pinned(5, HARM_P), pinned(4, FPU_Q), unpinned(5, FPU), pinned(3, FPU)])
def test_verlet_core_conserves_energy(model, rng):
    x = rng.standard_normal(model.dim)
    H = hamiltonian(model, hamiltonian_flow(model, x, 1e-3, 10000))
    assert np.max(np.abs(H - H[0])) / abs(H[0]) < 1e-4


def test_exchange_rotation_invariant(rng):
    e = exchange(5, gamma=1.0)
    p = rng.standard_normal((100, 5))
    dw = rng.standard_normal((100, 6)) * 3.0
    q = exchange_rotations(e.dynamics, p.copy(), dw)
    assert np.max(np.abs((q ** 2).sum(axis=1) - (p ** 2).sum(axis=1))) < 1e-12
    np.testing.assert_allclose(exchange_rotations(e.dynamics, q.copy(), -dw, reverse=True), p, atol=1e-12)


def test_exchange_single_pair_rotation():
    e = exchange(2, gamma=1.0)
    p = np.array([3.0, 4.0])
    q = exchange_rotations(e.dynamics, p.copy(), np.array([0.0, 0.7, 0.0]))
    assert q[0] ** 2 + q[1] ** 2 == pytest.approx(25.0, rel=1e-15)


def test_exchange_kinetic_energy_conserved_without_baths(rng):
    e = exchange(4, gamma=2.0, T_left=0.0, T_right=0.0)
    dyn = e.dynamics
    p = rng.standard_normal(4)
    k0 = float(p @ p)
    for i in range(1000):
        dw = rng.standard_normal(5) * 0.1
        exchange_rotations(dyn, p, dw, reverse=bool(i % 2))
        assert abs(float(p @ p) - k0) < 1e-12 * k0


def test_ou_half_step_stationary_law():
    m = pinned(2, T_left=1.7, T_right=1.7)
    dyn = m.dynamics
    rng = np.random.default_rng(8)
    n, h = 100000, 0.1
    p = np.zeros((n, 2))
    for _ in range(400):
        _ou_half(dyn, p, h, rng.standard_normal((n, 2)) * math.sqrt(h))
    var = p.var(axis=0)
    se = 1.7 * math.sqrt(2.0 / n)
    assert np.all(np.abs(var - 1.7) < 4 * se)


@pytest.mark.parametrize("pot", [HARM_P, FPU_Q])
def test_splitting_minus_euler_is_order_three_halves(pot):
    # near the origin the dt^(3/2) noise term dominates the dt^2 force term
    m = pinned(3, pot, 1.0, 2.0)
    rng = np.random.default_rng(4)
    x = 0.1 * rng.standard_normal((4000, m.dim))
    dts = np.array([1e-2, 1e-3, 1e-4])
    rms = []
    for dt in dts:
        dw = rng.standard_normal((4000, 2, 2)) * math.sqrt(dt / 2)
        d = step_splitting(m, x, dt, dw) - step_euler_maruyama(m, x, dt, dw)
        rms.append(math.sqrt(float((d ** 2).sum(axis=1).mean())))
    slope = np.polyfit(np.log(dts), np.log(rms), 1)[0]
    assert 1.4 < slope < 1.6


# simulate ----------------------------------------------------------------------

def test_simulate_zero_steps():
    m = pinned(3)
    tr = simulate(m, m.zero_state(), 0.01, 0, seed=1)
    assert tr.states.shape == (1, 6) and list(tr.times) == [0.0]


@pytest.mark.parametrize("scheme", ["euler", "splitting"])
def test_simulate_is_deterministic(scheme):
    m = exchange(4, 0.5, 1.0, 2.0)
    x = np.linspace(-1, 1, m.dim)
    a = simulate(m, x, 0.01, 5000, seed=42, scheme=scheme, record_every=10)
    b = simulate(m, x, 0.01, 5000, seed=42, scheme=scheme, record_every=10)
    np.testing.assert_array_equal(a.states, b.states)
    assert a.states.shape == (501, m.dim)
    assert np.all(np.diff(a.times) > 0)
    np.testing.assert_allclose(np.diff(a.times), 0.1, rtol=1e-12)
    np.testing.assert_array_equal(a.states[0], x)


def test_simulate_contracts():
    m = pinned(2)
    with pytest.raises(ContractViolation):
        simulate(m, np.zeros(4), 0.01, 10, 0, record_every=3)
    with pytest.raises(ContractViolation):
        simulate(m, np.zeros(4), 0.01, 10, 0, scheme="rk4")
    with pytest.raises(ContractViolation):
        simulate(ou(), np.zeros(1), 0.01, 10, 0, scheme="splitting")


def test_trajectory_csv(tmp_path):
    m = pinned(2)
    tr = simulate(m, [0.0, 1.0, 0.0, 0.0], 0.01, 4, seed=3, record_every=2)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,q_1,q_2,p_1,p_2"
    assert len(lines) == 4
    assert [float(v) for v in lines[2].split(",")[1:]] == list(tr.states[1])


def test_equilibrium_momentum_variance():
    m = pinned(3, HARM_P, 1.0, 1.0)
    tr = simulate(m, m.zero_state(), 1e-3, 10_000_000, seed=2024, scheme="splitting", record_every=10)
    X = tr.states[len(tr.states) // 10:]
    n_b = 50
    p2 = (X[:, 3:] ** 2)[: len(X) // n_b * n_b].reshape(n_b, -1, 3).mean(axis=1)
    se = p2.std(axis=0, ddof=1) / math.sqrt(n_b)
    assert np.all(np.abs(p2.mean(axis=0) - 1.0) < 3 * se)


def test_simulate_ensemble_shapes():
    m = ou(1.0)
    out = simulate_ensemble(m, np.array([2.0]), 0.01, 10, seed=1, n_paths=7, record_every=5)
    assert out.shape == (3, 7, 1)
    assert np.all(out[0] == 2.0)


# scaled comparison -------------------------------------------------------------

def unit_energy(model, x):
    """Rescale x along its ray onto the level set H = 1 by bisection."""
    lo, hi = 0.0, 1.0
    while hamiltonian(model, hi * x) < 1:
        hi *= 2
    for _ in range(200):
        c = 0.5 * (lo + hi)
        lo, hi = (c, hi) if hamiltonian(model, c * x) < 1 else (lo, c)
    return 0.5 * (lo + hi) * x


def test_scaled_comparison_identity_at_E_one():
    m = pinned(3, HARM_P, 0.0, 0.0)
    x = np.array([0.5, 0.0, -0.5, 0.5, 0.5, 0.0])
    x /= math.sqrt(float(hamiltonian(limit_model(m), x)))
    rep = scaled_comparison(m, x, [1.0], 1.0, 1e-3, seed=0)
    assert rep.sup_distance == [0.0]


@pytest.mark.parametrize("pot", [HARM_P, PotentialSpec("polynomial", "polynomial", u_coeffs=(0, 0, 0, 0, 0.25),
                                                       v_coeffs=(0, 0, 0, 0, 0.5))])
def test_scaled_comparison_monotone_in_E(pot):
    m = pinned(3, pot, 1.0, 2.0)
    lim = limit_model(m)
    x = unit_energy(lim, np.array([0.2, -0.4, 0.1, 0.6, -0.3, 0.2]))
    rep = scaled_comparison(m, x, [1e2, 1e4, 1e6], 1.0, 1e-3, seed=7)
    assert rep.strictly_decreasing
    assert rep.limit_boundary_integral > 0


def test_scaled_comparison_rejects_bad_energy():
    m = pinned(2, HARM_P)
    with pytest.raises(ContractViolation):
        scaled_comparison(m, np.array([0.0, 0.0, 3.0, 0.0]), [10.0], 0.1, 0.01, 0)


def test_rescaling_route_matches_direct_route():
    m = pinned(3, FPU_Q, 1.0, 2.0)
    x = np.array([0.1, -0.3, 0.2, 0.4, 0.0, -0.5])
    for E in (10.0, 1e3):
        direct = simulate(scaled(m, E), x, 1e-3, 500, seed=9, scheme="euler", backend="python").states
        via = scaled_via_original(m, x, E, 0.5, 1e-3, seed=9)
        np.testing.assert_allclose(via, direct, rtol=1e-9, atol=1e-12)


def test_boundary_integral_trapezoid():
    m = pinned(2)
    states = np.zeros((3, 4))
    states[:, 2] = [0.0, 1.0, 2.0]
    assert boundary_integral(m, states, 0.5) == pytest.approx(0.5 * (0 + 1) / 2 + 0.5 * (1 + 4) / 2)


def test_linear_models_simulate():
    ls = lefevere_schenkel(4, D=[0, 0.2, 0, 0.2])
    tr = simulate(ls, np.ones(ls.dim), 1e-3, 200, seed=1)
    assert np.all(np.isfinite(tr.states))
