import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatchain.controllability import (LinearControlSystem, PolyVectorField, build_linear_system, exact_rank,
                                       hoermander_rank, kalman_rank, lie_bracket, ls_mode_systems,
                                       model_vector_fields, pinned_stiffness, svd_rank)
from heatchain.errors import CoefficientBlowUp, ContractViolation, NotLinearError
from heatchain.models import exchange, hessian_hamiltonian, lefevere_schenkel, pinned, unpinned
from heatchain.polynomial import Poly
from heatchain.potentials import PotentialSpec


def harm(alpha):
    return PotentialSpec("harmonic", "harmonic-pinning", alpha=alpha) if alpha else PotentialSpec("harmonic")


LS_D = [0, 0.3, 0.2, 0.1, 0, 0.1, 0.2, 0.3]


# linear systems ----------------------------------------------------------------

def test_stiffness_examples():
    np.testing.assert_array_equal(pinned_stiffness(2), [[-1, 1], [1, -1]])
    np.testing.assert_array_equal(pinned_stiffness(3, 1.0, 0.5), [[-1.5, 1, 0], [1, -2.5, 1], [0, 1, -1.5]])
    np.testing.assert_array_equal(np.diag(pinned_stiffness(2, 1.0, 0.5, "positive")), [-0.5, -0.5])
    with pytest.raises(ContractViolation):
        pinned_stiffness(2, pinning_sign="other")


def test_pinned_system_layout():
    sys = build_linear_system(pinned(2, T_left=1.0, T_right=4.0))
    np.testing.assert_array_equal(sys.A, [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 1, -0.5, 0], [1, -1, 0, -0.5]])
    np.testing.assert_array_equal(sys.B, [[0, 0], [0, 0], [1, 0], [0, 2]])
    assert (sys.n, sys.m) == (4, 2)


def test_linear_system_rejections():
    with pytest.raises(NotLinearError):
        build_linear_system(pinned(3, PotentialSpec("fpu")))
    with pytest.raises(NotLinearError):
        build_linear_system(exchange(3))
    with pytest.raises(ContractViolation):
        pinned(1)
    with pytest.raises(ContractViolation):
        LinearControlSystem(np.zeros((2, 3)), np.zeros((2, 1)))


def test_ls_mode_block_matches_display():
    m = lefevere_schenkel(8, T=4.0, D=LS_D)
    blocks = dict(ls_mode_systems(m))
    w2 = m.omega_sq
    A, B = blocks[1].A, blocks[1].B
    np.testing.assert_array_equal(A[0], [-0.5, 0, -w2[1], 0])
    np.testing.assert_array_equal(B[:, 0], [2.0, 0, 0, -0.3])
    assert blocks[0].n == 2 and blocks[0].m == 1 and blocks[4].n == 2


@pytest.mark.parametrize("N", [2, 3, 5, 8])
@pytest.mark.parametrize("alpha", [0.0, 0.5])
@pytest.mark.parametrize("damping", [True, False])
@pytest.mark.parametrize("sign", ["physical", "positive"])
def test_kalman_full_rank_pinned(N, alpha, damping, sign):
    sys = build_linear_system(pinned(N, harm(alpha)), damping=damping, pinning_sign=sign)
    assert kalman_rank(sys) == 2 * N
    assert kalman_rank(sys, "svd") == 2 * N or N == 8


def test_kalman_examples():
    assert kalman_rank(build_linear_system(pinned(2))) == 4
    assert kalman_rank(LinearControlSystem(np.diag([-1.0, -2.0]), np.zeros((2, 1)))) == 0
    for k, sys in ls_mode_systems(lefevere_schenkel(8, D=LS_D)):
        assert kalman_rank(sys) == sys.n


def test_kalman_unpinned_full_rank():
    for N in (2, 3, 4):
        assert kalman_rank(build_linear_system(unpinned(N))) == 2 * N - 1


def test_rank_helpers_agree(rng):
    # integer factors keep the product exact, so both ranks see rank 3
    M = rng.integers(-4, 5, (5, 3)) @ rng.integers(-4, 5, (3, 7))
    assert exact_rank(M) == svd_rank(M) == np.linalg.matrix_rank(M)
    noisy = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 7))
    assert svd_rank(noisy) == 3 and exact_rank(noisy) == 5
    with pytest.raises(ContractViolation):
        kalman_rank(build_linear_system(pinned(2)), "qr")


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_kalman_mirror_symmetry(N):
    sys = build_linear_system(pinned(N, harm(0.5), 1.5, 1.5))
    perm = list(range(N - 1, -1, -1)) + list(range(2 * N - 1, N - 1, -1))
    mirrored = sys.permuted(perm)
    np.testing.assert_array_equal(mirrored.A, sys.A)
    assert kalman_rank(mirrored) == kalman_rank(sys)
    one_bath = LinearControlSystem(sys.A, sys.B[:, :1])
    assert kalman_rank(one_bath.permuted(perm)) == kalman_rank(one_bath)


# vector fields -----------------------------------------------------------------

NV = 3
coef = st.integers(-3, 3)
poly = st.dictionaries(st.tuples(*[st.integers(0, 2)] * NV), coef, max_size=3).map(lambda t: Poly(NV, t))
fields = st.tuples(*[poly] * NV).map(PolyVectorField)


@given(fields, fields, fields)
def test_jacobi_identity(X, Y, Z):
    J = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    assert J.is_zero()


@given(fields, fields)
def test_bracket_antisymmetry(X, Y):
    assert lie_bracket(X, X).is_zero()
    assert (lie_bracket(X, Y) + lie_bracket(Y, X)).is_zero()


def test_bracket_with_drift_pinned_harmonic():
    m = pinned(3, harm(1.0))
    X0, noise = model_vector_fields(m)
    d_p1 = dict(noise)["B_left"]
    n = m.dim
    expected = PolyVectorField.coordinate(n, 3, -0.5) + PolyVectorField.coordinate(n, 0)
    assert lie_bracket(d_p1, X0) == expected


def test_bracket_dq1_pinned_fpu(rng):
    m = pinned(3, PotentialSpec("fpu", "quartic-pinning", alpha=0.5))
    X0, _ = model_vector_fields(m)
    F = lie_bracket(PolyVectorField.coordinate(m.dim, 0), X0)
    for x in rng.standard_normal((5, m.dim)):
        v = np.array([float(c) for c in F(x)])
        Hs = hessian_hamiltonian(m, x)
        np.testing.assert_allclose(v[:3], 0)
        np.testing.assert_allclose(v[3:], -Hs[0, :3], rtol=1e-12)
        assert v[5] == 0


def test_exchange_fields_are_rotations():
    e = exchange(3, 2.0)
    _, noise = model_vector_fields(e)
    names = [nm for nm, _ in noise]
    assert names == ["B_left", "X_1,2", "X_2,3", "B_right"]
    X12 = dict(noise)["X_1,2"]
    assert [float(c) for c in X12([0, 0, 1.0, 2.0, 3.0])] == [0, 0, -2.0, 1.0, 0]


def test_field_contracts():
    with pytest.raises(ContractViolation):
        PolyVectorField((Poly(2),))
    with pytest.raises(ContractViolation):
        lie_bracket(PolyVectorField.zero(2), PolyVectorField.zero(3))


# Hoermander rank ---------------------------------------------------------------

def test_hoermander_pinned_harmonic():
    m = pinned(3, harm(1.0))
    rep = hoermander_rank(m, np.zeros(6), 6)
    assert rep.rank == 6 and rep.full_rank
    assert rep.witnesses[:2] == ["B_left", "B_right"]
    d = rep.to_dict()
    assert d["full_rank_required"] == 6 and d["N"] == 3


def test_hoermander_pinned_fpu_generic_state(rng):
    m = pinned(3, PotentialSpec("fpu", "quartic-pinning", alpha=0.5))
    rep = hoermander_rank(m, rng.standard_normal(6), 8)
    assert rep.rank == 6


def test_hoermander_one_bath():
    m = pinned(3, harm(1.0))
    assert hoermander_rank(m, np.zeros(6), 6, channels=["B_left"]).rank == 6
    with pytest.raises(ContractViolation):
        hoermander_rank(m, np.zeros(6), 6, channels=["B_middle"])


@pytest.mark.parametrize("N", [2, 3, 4])
def test_hoermander_unpinned_from_left_bath(N):
    m = unpinned(N)
    assert hoermander_rank(m, np.zeros(2 * N - 1), 4 * N, channels=["B_left"]).rank == 2 * N - 1


def test_hoermander_exchange():
    e = exchange(3, 1.0)
    rep = hoermander_rank(e, np.array([0.1, -0.2, 0.3, 0.4, -0.5]), 6)
    assert rep.full_rank


@pytest.mark.parametrize("model", [pinned(2), pinned(3, harm(0.5)), pinned(4, harm(1.0), 1.0, 0.0), unpinned(3),
                                   lefevere_schenkel(4, D=[0, 0.5, 0, 0.5]), lefevere_schenkel(8, D=LS_D)],
                         ids=lambda m: f"{m.kind}-{m.N}")
def test_hoermander_equals_kalman_on_linear(model, rng):
    x = rng.standard_normal(model.dim)
    assert hoermander_rank(model, x, model.dim).rank == kalman_rank(build_linear_system(model))


def test_hoermander_rank_deficient_without_noise():
    m = pinned(3, harm(1.0), 0.0, 0.0)
    rep = hoermander_rank(m, np.zeros(6), 3)
    assert rep.rank == 0 and not rep.full_rank


def test_hoermander_blow_up_guard():
    m = pinned(3, PotentialSpec("fpu"))
    with pytest.raises(CoefficientBlowUp):
        hoermander_rank(m, np.zeros(6), 8, max_fields=3)
    with pytest.raises(ContractViolation):
        hoermander_rank(m, np.zeros(6), 0)
