import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatchain.errors import ContractViolation
from heatchain.generator import (LyapunovConfig, apply_generator_H, carre_du_champ_H, drift_bound_check,
                                 exp_bound_estimate, gamma_defect, generator_H2_generic, generator_H_generic,
                                 ls_constants, ls_gamma_bound_violation, lw_over_w, lyapunov_W,
                                 martingale_diagnostics, sample_ball)
from heatchain.models import exchange, hamiltonian, lefevere_schenkel, pinned, unpinned
from heatchain.potentials import PotentialSpec

FPU_Q = PotentialSpec("fpu", "quartic-pinning", alpha=0.5)
HARM_P = PotentialSpec("harmonic", "harmonic-pinning", alpha=1.0)
LS_D = [0, 0.3, 0.2, 0.1, 0, 0.1, 0.2, 0.3]


def chain_state(model, p1, pN, fill=0.3):
    x = np.full(model.dim, fill)
    i1, iN = model.boundary_indices
    x[i1], x[iN] = p1, pN
    return x


# closed forms ------------------------------------------------------------------

@pytest.mark.parametrize("model", [pinned(3, FPU_Q, 1.0, 2.0), unpinned(3, PotentialSpec("fpu"), 1.0, 2.0),
                                   exchange(3, 2.0, 1.0, 2.0)], ids=lambda m: m.kind)
def test_generator_examples(model):
    assert apply_generator_H(model, chain_state(model, 0.0, 0.0)) == 1.5
    assert apply_generator_H(model, chain_state(model, 2.0, 0.0)) == -0.5
    assert carre_du_champ_H(model, chain_state(model, 2.0, 0.0)) == 2.0


def test_exchange_gamma_is_boundary_only():
    e = exchange(4, 3.0, 1.0, 2.0)
    x = np.array([0.5, -1.0, 2.0, 0.0, 7.0, -3.0, 0.0])
    assert carre_du_champ_H(e, x) == 0.0


@pytest.mark.parametrize("model", [pinned(2, HARM_P), exchange(2, 1.0)], ids=lambda m: m.kind)
def test_lw_over_w_examples(model):
    cfg = LyapunovConfig(0.5)
    assert lw_over_w(model, chain_state(model, 0.0, 0.0), cfg) == 0.5 * 0.5 * 2
    assert lw_over_w(model, chain_state(model, 1.0, 0.0), cfg) == 0.375


def test_lyapunov_W_shift_invariance():
    m = pinned(3, FPU_Q)
    x = np.array([0.1, 0.2, -0.3, 1.0, 0.5, -0.2])
    assert lyapunov_W(m, x, 0.3) == pytest.approx(math.exp(0.3 * float(hamiltonian(m, x))))
    assert lyapunov_W(m, x, 0.3, h_min=-1.0) == pytest.approx(math.exp(0.3 * (float(hamiltonian(m, x)) + 1.0)))


def test_ls_generator_at_origin():
    m = lefevere_schenkel(8, T=1.5, D=LS_D)
    w2 = m.omega_sq
    expected = 0.5 * 8 * 1.5 + sum(LS_D[k] ** 2 * w2[k] for k in range(1, 4))
    assert apply_generator_H(m, np.zeros(m.dim)) == pytest.approx(expected, rel=1e-15)
    assert carre_du_champ_H(m, np.zeros(m.dim)) == 0.0
    assert gamma_defect(m, np.zeros(m.dim)) == 0.0


# generic route -------------------------------------------------------------

MODELS = [pinned(3, FPU_Q, 1.0, 2.0), pinned(3, PotentialSpec("harmonic", "weak-pinning"), 0.5, 2.0),
          unpinned(4, PotentialSpec("fpu"), 2.0, 1.0), exchange(4, 1.3, 1.0, 2.0),
          lefevere_schenkel(4, 1.0, 0.7, 1.2, [0, 0.4, 0, 0.4])]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_closed_form_LH_matches_generic(model, rng):
    x = sample_ball(rng, 200, model.dim, 5.0)
    a, b = apply_generator_H(model, x), generator_H_generic(model, x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_gamma_defect_vanishes(model, rng):
    x = sample_ball(rng, 100, model.dim, 10.0)
    d = np.array([float(gamma_defect(model, xi)) for xi in x])
    assert np.max(np.abs(d)) < 1e-10
    assert abs(gamma_defect(model, np.zeros(model.dim))) <= 1e-12


def test_gamma_defect_exact_when_temperatures_are_squares(rng):
    # sqrt(T) is exact for T in {1, 4}: the exact route then returns zero
    m = pinned(3, FPU_Q, 1.0, 4.0)
    for x in sample_ball(rng, 20, m.dim, 3.0):
        assert gamma_defect(m, x, exact=True) == 0


def test_generic_H2_against_finite_differences(rng):
    m = pinned(2, FPU_Q, 1.0, 2.0)
    x = rng.standard_normal(m.dim)
    h = 1e-4
    H2 = lambda y: float(hamiltonian(m, y)) ** 2
    b = m.dynamics.drift(x)
    S = m.dynamics.diffusion(x)
    a = S @ S.T
    g = np.array([(H2(x + h * e) - H2(x - h * e)) / (2 * h) for e in np.eye(m.dim)])
    Hs = np.array([[(H2(x + h * (ei + ej)) - H2(x + h * (ei - ej)) - H2(x - h * (ei - ej)) + H2(x - h * (ei + ej)))
                    / (4 * h * h) for ej in np.eye(m.dim)] for ei in np.eye(m.dim)])
    fd = b @ g + 0.5 * np.sum(a * Hs)
    assert float(generator_H2_generic(m, x)) == pytest.approx(fd, rel=1e-5)


# drift bound -----------------------------------------------------------------

def test_lyapunov_config_contracts():
    with pytest.raises(ContractViolation):
        LyapunovConfig(0.0)
    with pytest.raises(ContractViolation):
        LyapunovConfig(0.1, alpha=1.0)
    with pytest.raises(ContractViolation):
        LyapunovConfig(0.1, alpha=2.0, beta=3.0)
    assert LyapunovConfig(0.1, alpha=2.0).beta == 2.0
    with pytest.raises(ContractViolation):
        LyapunovConfig(0.6).validate(pinned(2, T_left=1.0, T_right=2.0))
    with pytest.raises(ContractViolation):
        LyapunovConfig(0.45, alpha=1.2).validate(pinned(2, T_left=1.0, T_right=2.0), holder=True)


@pytest.mark.parametrize("model", [pinned(3, FPU_Q, 1.0, 2.0), unpinned(3, PotentialSpec("fpu"), 1.0, 2.0),
                                   exchange(3, 1.0, 1.0, 2.0)], ids=lambda m: m.kind)
@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
def test_drift_bound_holds(model, frac):
    rep = drift_bound_check(model, LyapunovConfig(frac / 2.0), 5000, 10.0, seed=1)
    assert rep.holds and rep.max_violation <= 0
    assert rep.to_dict()["n_samples"] == 5000


def test_drift_bound_negative_control():
    m = pinned(3, FPU_Q, 1.0, 2.0)
    rep = drift_bound_check(m, LyapunovConfig(1.5 / 2.0), 5000, 10.0, seed=1, validate=False)
    assert rep.max_violation > 0
    with pytest.raises(ContractViolation):
        drift_bound_check(m, LyapunovConfig(1.5 / 2.0), 10, 10.0, seed=1)


def test_ls_drift_bound_and_constants():
    m = lefevere_schenkel(8, T=1.0, D=LS_D)
    cfg = LyapunovConfig(0.2, alpha=1.5)
    rep = drift_bound_check(m, cfg, 5000, 10.0, seed=2)
    assert rep.holds
    assert set(rep.checks) == {"lh_le_C", "combined"}
    c = ls_constants(m, cfg)
    assert c.C2 == pytest.approx(1 - 2 * 1.5 * 0.2)
    assert c.theta0 == pytest.approx(1 / 3)


def test_ls_zero_coupling_has_zero_C3():
    m = lefevere_schenkel(8, T=1.0)
    cfg = LyapunovConfig(0.1)
    assert ls_constants(m, cfg).C3 == 0.0
    assert drift_bound_check(m, cfg, 2000, 10.0, seed=3).holds


def test_ls_gamma_bound(rng):
    m = lefevere_schenkel(8, T=0.7, D=LS_D)
    x = sample_ball(rng, 2000, m.dim, 10.0)
    assert np.all(ls_gamma_bound_violation(m, x) <= 1e-12)


@given(st.integers(2, 6), st.floats(0.5, 20.0))
def test_sample_ball_radius(dim, radius):
    x = sample_ball(np.random.default_rng(dim), 100, dim, radius)
    assert x.shape == (100, dim)
    assert np.all(np.linalg.norm(x, axis=1) <= radius * (1 + 1e-12))


# pathwise ----------------------------------------------------------------------

def test_compensated_energy_is_centred():
    m = pinned(3, HARM_P, 1.0, 2.0)
    x = np.array([0.2, -0.1, 0.3, 1.0, 0.5, -0.5])
    d = martingale_diagnostics(m, x, 0.2, 1e-3, 4000, seed=5)
    mean, se = d.compensator_mean()
    assert abs(mean) < 4 * se
    e_mean, e_se = d.exponential_martingale(0.3)
    assert abs(e_mean - 1) < 4 * e_se


def test_exp_bound_at_time_zero():
    m = pinned(3, HARM_P)
    est = exp_bound_estimate(m, np.zeros(6), LyapunovConfig(0.3), 0.0, None, 10, 1e-3, seed=0)
    assert est.lhs == 1.0 and est.rhs == 1.0
    assert est.C == pytest.approx(est.to_dict()["C"])
