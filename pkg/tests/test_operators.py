import numpy as np
import pytest
from hypothesis import given, strategies as st

from qleak.metrics import state_leakage
from qleak.models import erasure_channel, exchange_unitary_matrix
from qleak.operators import (
    Channel,
    SubspacePartition,
    ValidationError,
    apply,
    basis_state,
    check_cptp,
    choi_matrix,
    compose,
    haar_random_state,
    haar_random_states,
    haar_random_unitary,
    identity_channel,
    power,
    projector,
    superop_from_map,
    superop_of_unitary,
    trace_norm,
    two_qutrit_partition,
    unvec,
    vec,
)

from conftest import random_channel, random_density


def test_partition_projectors_sum_to_identity():
    part = SubspacePartition(2, (2, 3))
    assert part.dim == 7 and part.d2 == 5
    total = part.p_comp + sum(part.leak_projectors)
    assert np.array_equal(total, np.eye(7))
    assert np.array_equal(part.p_leak, sum(part.leak_projectors))


@pytest.mark.parametrize("d1, leak", [(0, (1,)), (2, (0,)), (-1, ())])
def test_partition_rejects_bad_dims(d1, leak):
    with pytest.raises(ValidationError):
        SubspacePartition(d1, leak)


def test_vec_is_column_stacking():
    m = np.arange(4).reshape(2, 2)
    assert list(vec(m)) == [0, 2, 1, 3]
    assert np.array_equal(unvec(vec(m)), m)


def test_identity_unitary_gives_identity_superop():
    assert np.allclose(superop_of_unitary(np.eye(3)).sop, np.eye(9))


def test_exchange_at_pi_moves_one_to_two():
    out = superop_of_unitary(exchange_unitary_matrix(np.pi))(projector(basis_state(3, 1)))
    assert np.allclose(out, projector(basis_state(3, 2)), atol=1e-14)


def test_pauli_x_embedded():
    x = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    out = superop_of_unitary(x)(projector(basis_state(3, 0)))
    assert np.allclose(out, projector(basis_state(3, 1)))


def test_non_unitary_rejected_with_norm():
    with pytest.raises(ValidationError, match="U\\^dag U"):
        superop_of_unitary(np.diag([1.0, 1.0, 0.5]))


def test_superop_matches_conjugation(rng):
    u = haar_random_unitary(3, rng)
    rho = random_density(3, rng)
    assert np.allclose(superop_of_unitary(u)(rho), u @ rho @ u.conj().T, atol=1e-13)


def test_superop_is_homomorphism(rng):
    for _ in range(20):
        u, v = haar_random_unitary(3, rng), haar_random_unitary(3, rng)
        lhs = superop_of_unitary(u @ v)
        rhs = compose(superop_of_unitary(u), superop_of_unitary(v))
        assert np.allclose(lhs.sop, rhs.sop, atol=1e-12)


def test_power_and_compose(rng, qutrit):
    assert identity_channel(qutrit).allclose(power(identity_channel(qutrit), 5))
    assert power(random_channel(qutrit, rng), 0).allclose(identity_channel(qutrit))
    u = superop_of_unitary(haar_random_unitary(3, rng))
    assert compose(u, u.adjoint()).allclose(identity_channel(qutrit), atol=1e-12)
    with pytest.raises(ValidationError):
        power(u, -1)


def test_power_of_erasure():
    e2 = power(erasure_channel(0.5), 2)
    assert state_leakage(e2(projector(basis_state(3, 0))), SubspacePartition.qutrit()) == pytest.approx(0.75, abs=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        compose(identity_channel(SubspacePartition.qutrit()), identity_channel(SubspacePartition(2, (2,))))
    with pytest.raises(ValidationError):
        apply(identity_channel(SubspacePartition.qutrit()), np.eye(2))


def test_check_cptp_examples():
    part = SubspacePartition.qutrit()
    rep = check_cptp(identity_channel(part))
    assert rep.ok and rep.tp_defect == 0
    scaled = Channel(0.9 * np.eye(9), part)
    rep = check_cptp(scaled)
    assert not rep.ok
    assert rep.tp_defect == pytest.approx(0.1 * np.sqrt(3), rel=1e-12)


def test_transpose_is_not_cp(qutrit):
    rep = check_cptp(superop_from_map(lambda x: x.T, qutrit))
    assert rep.tp_defect < 1e-14 and rep.min_choi_eig == pytest.approx(-1.0)


def test_choi_of_identity_is_maximally_entangled(qutrit):
    c = choi_matrix(identity_channel(qutrit))
    omega = vec(np.eye(3))
    assert np.allclose(c, np.outer(omega, omega))


def test_trace_norm_examples():
    assert trace_norm(np.eye(2)) == pytest.approx(2)
    m = np.zeros((3, 3))
    m[0, 2] = m[2, 0] = 1
    assert trace_norm(m) == pytest.approx(2)
    psi = np.array([np.sqrt(0.75), 0, 0.5])
    rho = np.outer(psi, psi)
    cls = rho.copy()
    cls[:2, :2] = 0
    cls[2, 2] = 0
    assert trace_norm(cls) == pytest.approx(2 * np.sqrt(0.25 * 0.75), abs=1e-12)


def test_trace_norm_unitarily_invariant(rng):
    for _ in range(20):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        u, v = haar_random_unitary(4, rng), haar_random_unitary(4, rng)
        assert trace_norm(u @ m @ v) == pytest.approx(trace_norm(m), abs=1e-10)


def test_haar_state_dim_one(rng):
    psi = haar_random_state(1, rng)
    assert abs(abs(psi[0]) - 1) < 1e-15


def test_haar_first_moment(rng):
    psis = haar_random_states(2, 100_000, rng)
    mean = np.einsum("ni,nj->ij", psis, psis.conj()) / len(psis)
    # each entry of |psi><psi| is bounded by 1, so 3 / sqrt(n) bounds 3 standard errors
    assert np.abs(mean - np.eye(2) / 2).max() < 3 / np.sqrt(len(psis))


def test_haar_second_moment(rng):
    # E <psi|A|psi>^2 = (Tr[A]^2 + Tr[A^2]) / (d (d + 1)); for traceless A only Tr[A^2] remains
    d = 3
    a = np.diag([1.0, -1.0, 0.0])
    psis = haar_random_states(d, 200_000, rng)
    vals = np.real(np.einsum("ni,ij,nj->n", psis.conj(), a, psis)) ** 2
    expected = np.trace(a @ a) / (d * (d + 1))
    assert abs(vals.mean() - expected) < 3 * vals.std() / np.sqrt(len(vals))


def test_haar_rotation_invariance(rng):
    u = haar_random_unitary(2, rng)
    psis = haar_random_states(2, 50_000, rng)
    p0 = np.abs(psis[:, 0]) ** 2
    q0 = np.abs((psis @ u.T)[:, 0]) ** 2
    # the population of |0> is uniform on [0, 1] for both ensembles
    assert abs(p0.mean() - q0.mean()) < 0.01
    assert abs(np.var(p0) - 1 / 12) < 0.005 and abs(np.var(q0) - 1 / 12) < 0.005


@given(st.integers(0, 2**31 - 1))
def test_random_channels_are_trace_preserving(seed):
    rng = np.random.default_rng(seed)
    part = SubspacePartition.qutrit()
    chan = random_channel(part, rng)
    assert check_cptp(chan).ok
    rho = random_density(3, rng)
    assert np.trace(chan(rho)).real == pytest.approx(1.0, abs=1e-10)


def test_two_qutrit_partition():
    part, perm = two_qutrit_partition()
    assert part.dim == 9 and part.leak_dims == (2, 2, 1)
    assert np.allclose(perm @ perm.T, np.eye(9))
    # |2>|0> (product index 6) is the first state of Y_1
    e = np.zeros(9)
    e[6] = 1
    assert np.argmax(perm @ e) == 4
