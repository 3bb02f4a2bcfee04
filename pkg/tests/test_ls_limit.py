import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from heatchain.errors import ContractViolation
from heatchain.ls_limit import (ModeSpectrum, eigen_components, eigenvalues, gramian_ratio, limit_matrix,
                                limit_ode_solve, ratio_limit_check)
from heatchain.models import lefevere_schenkel, ls_block


def test_eigenvalue_examples():
    lp, lm = eigenvalues(1 / 16)
    assert lp == lm == -0.25
    lp, lm = eigenvalues(1 / 32)
    assert lp.imag == 0 and lm.imag == 0
    assert lp.real == pytest.approx(-0.25 + math.sqrt(1 / 32), rel=1e-15)
    assert (round(lp.real, 5), round(lm.real, 5)) == (-0.07322, -0.42678)
    lp, lm = eigenvalues(1.0)
    assert lp.real == -0.25 and lp.imag == pytest.approx(math.sqrt(15) / 4, rel=1e-15)
    assert lm == lp.conjugate()
    with pytest.raises(ContractViolation):
        eigenvalues(0.0)


@given(st.floats(1e-4, 10.0))
def test_trace_and_determinant(w2):
    lp, lm = eigenvalues(w2)
    assert abs((lp + lm) - (-0.5)) <= 1e-15
    assert abs(lp * lm - w2) <= 4e-16 * max(w2, 1 / 16)
    ev = np.linalg.eigvals(limit_matrix(w2))
    np.testing.assert_allclose(sorted(ev, key=lambda z: (z.real, z.imag)),
                               sorted([lp, lm], key=lambda z: (z.real, z.imag)), atol=1e-12)


def test_limit_ode_zero_path():
    path = limit_ode_solve(0.3, (0.0, 0.0), 1.0, 0.01)
    assert not path.r.any() and not path.v.any()
    assert path.int_r2 == 0 and path.int_v2 == 0


@pytest.mark.parametrize("w2", [1 / 32, 1 / 16, 0.3, 1.0])
def test_limit_ode_matches_matrix_exponential(w2):
    x0 = np.array([0.7, -1.2])
    path = limit_ode_solve(w2, x0, 10.0, 1e-3)
    A = limit_matrix(w2)
    idx = np.arange(0, len(path.times), 500)
    exact = np.array([expm(t * A) @ x0 for t in path.times[idx]])
    assert np.max(np.abs(np.c_[path.r[idx], path.v[idx]] - exact)) <= 1e-8
    assert path.times[-1] == pytest.approx(10.0)


@pytest.mark.parametrize("w2", [1 / 32, 1.0, 4.0])
def test_energy_is_nonincreasing(w2):
    path = limit_ode_solve(w2, (1.0, 1.0), 20.0, 1e-3)
    E = 0.5 * path.r ** 2 + 0.5 * w2 * path.v ** 2
    assert np.all(np.diff(E) <= 1e-15)


def test_limit_matrix_is_the_noise_free_mode_block():
    A, _ = ls_block(0.7, 1.0, 0.0, False)
    np.testing.assert_array_equal(limit_matrix(0.7), A)


def test_ratio_tracks_gramian_limit():
    rep = ratio_limit_check(1 / 32, (1.0, 1.0), [50.0, 100.0, 200.0])
    assert rep.regime == "real" and rep.component == "plus"
    lp, _ = eigenvalues(1 / 32)
    assert rep.predicted_limit == lp.real ** 2
    assert rep.ratios[-1] == pytest.approx(rep.exact_limit, rel=1e-4)
    assert rep.exact_limit == pytest.approx(gramian_ratio(1 / 32, (1.0, 1.0)))


def test_eigenvector_aligned_start():
    _, lm = eigenvalues(1 / 32)
    x0 = (lm.real, 1.0)
    ap, am = eigen_components(1 / 32, x0)
    assert abs(ap) < 1e-15 and am == pytest.approx(1.0)
    rep = ratio_limit_check(1 / 32, x0, [10.0, 200.0])
    assert rep.component == "minus"
    assert rep.ratios[-1] == pytest.approx(lm.real ** 2, rel=1e-10)
    assert gramian_ratio(1 / 32, x0) == pytest.approx(lm.real ** 2, rel=1e-10)


def test_oscillatory_ratio_bounded_below():
    rep = ratio_limit_check(1.0, (1.0, 1.0), [20.0, 50.0, 100.0, 200.0])
    assert rep.regime == "oscillatory" and rep.predicted_limit is None
    assert rep.lower_bound > 0
    assert rep.ratios[-1] == pytest.approx(rep.exact_limit, rel=1e-3)


def test_ratio_scaling_invariance():
    base = ratio_limit_check(1 / 32, (0.3, -1.1), [20.0, 60.0]).ratios
    assert ratio_limit_check(1 / 32, (1.2, -4.4), [20.0, 60.0]).ratios == base
    np.testing.assert_allclose(ratio_limit_check(1 / 32, (0.9, -3.3), [20.0, 60.0]).ratios, base, rtol=1e-12)


def test_ratio_contracts():
    with pytest.raises(ContractViolation):
        ratio_limit_check(0.5, (0.0, 0.0), [1.0])
    with pytest.raises(ContractViolation):
        ratio_limit_check(0.5, (1.0, 0.0), [2.0, 1.0])
    with pytest.raises(ContractViolation):
        eigen_components(1 / 16, (1.0, 0.0))


def test_mode_spectrum():
    spec = ModeSpectrum(8, 1.3, 0.7)
    w2 = dict(zip(spec.ks, spec.omega_k_sq))
    for k in spec.ks:
        assert w2[k] == spec[-k] == spec[k]
        assert w2[k] == pytest.approx(1.3 ** 2 * (0.7 ** 2 + 4 * math.sin(k * math.pi / 8) ** 2), rel=1e-15)
    assert min(w2.values()) == w2[0] == pytest.approx(1.3 ** 2 * 0.7 ** 2, rel=1e-15)
    np.testing.assert_array_equal([spec[k] for k in range(5)], lefevere_schenkel(8, 1.3, 0.7).omega_sq[:5])
    rows = spec.rows(tau=20.0)
    assert [r["k"] for r in rows] == [0, 1, 2, 3, 4]
    assert all(r["ratio"] > 0 for r in rows)
    with pytest.raises(ContractViolation):
        ModeSpectrum(6, 1.0, 1.0)


def test_edge_modes_have_no_position_noise():
    m = lefevere_schenkel(8, D=[0, .3, .2, .1, 0, .1, .2, .3])
    B = m.dynamics.B
    for lab in ("V_0", "V_4"):
        assert not B[m.layout.index(lab)].any()
