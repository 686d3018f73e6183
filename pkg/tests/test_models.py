import numpy as np
import pytest
from hypothesis import given, strategies as st

from qleak.clifford import clifford_unitaries_embedded
from qleak.metrics import coherence_of_leakage, fidelities, leakage_seepage_rates, state_leakage
from qleak.models import (
    DleParams,
    all_models_cptp,
    clifford_twirl,
    depolarizing_block,
    dle,
    dle_accumulation,
    dlm,
    dlm_fidelity_decay,
    dlm_parameters,
    dlm_project,
    erasure_channel,
    exchange_closed_forms,
    exchange_unitary,
    imperfect_dlm_iteration,
    qutrit_unitary_dlm_leakage,
    simple_dissipative_channel,
    simple_dissipative_rates,
    simple_dissipative_state_leakage,
    twirl_parameter,
    weyl_heisenberg,
)
from qleak.operators import (
    SubspacePartition,
    ValidationError,
    basis_state,
    check_cptp,
    identity_channel,
    power,
    projector,
)

from conftest import random_channel, random_density

QUTRIT = SubspacePartition.qutrit()


def test_erasure_examples():
    assert erasure_channel(0).allclose(identity_channel(QUTRIT))
    assert leakage_seepage_rates(erasure_channel(0.1)) == pytest.approx((0.1, 0))
    with pytest.raises(ValidationError):
        erasure_channel(1.5)
    with pytest.raises(ValidationError):
        erasure_channel(0.1, QUTRIT, sink_index=1)


@given(st.floats(0, 1), st.integers(0, 40))
def test_erasure_accumulation(p, m):
    rho = projector(basis_state(3, 0))
    got = state_leakage(power(erasure_channel(p), m)(rho), QUTRIT)
    assert got == pytest.approx(1 - (1 - p) ** m, abs=1e-12)


def test_depolarizing_blocks():
    assert np.allclose(depolarizing_block(1, 1, QUTRIT)(projector(basis_state(3, 0))), np.diag([0.5, 0.5, 0]))
    assert np.allclose(depolarizing_block(2, 1, QUTRIT)(np.diag([0.5, 0.5, 0])), np.diag([0, 0, 1.0]))
    assert np.allclose(depolarizing_block(1, 2, QUTRIT)(projector(basis_state(3, 2))), np.diag([0.5, 0.5, 0]))
    with pytest.raises(ValidationError):
        depolarizing_block(3, 1, QUTRIT)


def test_dle_identity_inner():
    chan = dle(DleParams(0.0, 0.0))
    rho = np.array([[0.5, 0.2, 0.1], [0.2, 0.3, 0.05], [0.1, 0.05, 0.2]])
    out = chan(rho)
    assert np.allclose(out[:2, :2], rho[:2, :2]) and out[2, 2] == pytest.approx(0.2)
    assert np.allclose(out[:2, 2], 0)


def test_dlm_rates_fidelity_and_cptp():
    chan = dlm(0.9, 0.01, 0.02)
    assert leakage_seepage_rates(chan) == pytest.approx((0.01, 0.02), abs=1e-15)
    assert fidelities(chan).avg_fidelity == pytest.approx(0.9405, abs=1e-12)
    assert check_cptp(chan).ok
    assert dlm_parameters(chan) == pytest.approx((0.9, 0.01, 0.02), abs=1e-12)


def test_dlm_rejects_non_cp_mu1():
    with pytest.raises(ValidationError):
        dlm(-0.5, 0.1, 0.1)
    assert check_cptp(dlm(-1 / 3, 0.1, 0.1)).ok


@given(st.floats(-1 / 3, 1), st.floats(0, 1), st.floats(0, 1))
def test_dlm_always_cptp(mu1, L1, L2):
    assert check_cptp(dlm(mu1, L1, L2)).ok


def test_dle_with_erasure_free_inner_matches_lemma(rng):
    inner = random_channel(SubspacePartition.no_leakage(2), rng).sop
    chan = dle(DleParams(0.07, 0.0, inner_channel=inner))
    rho = np.diag([0.6, 0.3, 0.1])
    for m in range(10):
        got = state_leakage(power(chan, m)(rho), QUTRIT)
        assert got == pytest.approx(1 - (1 - 0.07) ** m * 0.9, abs=1e-12)


def test_dle_accumulation_examples():
    assert dle_accumulation(0.1, 0.2, 0.0, 1) == pytest.approx(0.1)
    assert dle_accumulation(0.1, 0.2, 0.0, 2) == pytest.approx(0.17)
    assert dle_accumulation(0.1, 0.2, 0.0, 10_000) == pytest.approx(1 / 3)
    assert dle_accumulation(0.0, 0.0, 0.3, 5) == 0.3


def test_lemma1_against_powers(rng):
    for _ in range(100):
        L1, L2, p0 = rng.random(3)
        m = int(rng.integers(0, 51))
        inner = random_channel(SubspacePartition.no_leakage(2), rng).sop
        chan = dle(DleParams(L1, L2, inner_channel=inner))
        rho = _with_leakage(random_density(3, rng), p0)
        got = state_leakage(power(chan, m)(rho), QUTRIT)
        assert got == pytest.approx(dle_accumulation(L1, L2, p0, m), abs=1e-9)


def _with_leakage(rho, p0):
    """Rescale the blocks of ``rho`` so its leakage is exactly ``p0``."""
    out = rho.copy()
    c = np.trace(rho[:2, :2]).real
    out[:2, :2] *= (1 - p0) / c
    out[2, 2] = p0
    out[:2, 2] = out[2, :2] = 0
    return out


def test_twirl_parameter_example():
    assert twirl_parameter(0.75, 2) == pytest.approx(0.5)


def test_dlm_project_fixed_point():
    chan = dlm(0.8, 0.03, 0.1)
    assert dlm_project(chan).allclose(chan, atol=1e-10)


def test_dlm_project_exchange():
    ex = exchange_unitary(np.pi / 2)
    proj = dlm_project(ex)
    mu1, L1, L2 = dlm_parameters(ex)
    assert (L1, L2) == pytest.approx((0.25, 0.5))
    # block fidelity of the normalized computational block, computed directly
    u = np.diag([1.0, np.cos(np.pi / 4)])
    f_pro_block = abs(np.trace(u)) ** 2 / 4 / (1 - L1)
    f_block = (2 * f_pro_block + 1) / 3
    assert mu1 == pytest.approx(twirl_parameter(f_block, 2), abs=1e-12)
    assert proj.allclose(dlm(mu1, L1, L2), atol=1e-10)


def test_dlm_project_idempotent_and_metric_preserving(rng):
    for _ in range(20):
        chan = random_channel(QUTRIT, rng)
        p = dlm_project(chan)
        assert dlm_project(p).allclose(p, atol=1e-9)
        a, b = fidelities(chan), fidelities(p)
        assert (a.avg_fidelity, a.L1, a.L2) == pytest.approx((b.avg_fidelity, b.L1, b.L2), abs=1e-9)


def test_weyl_heisenberg_is_one_design(rng):
    for d in (1, 2, 3):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        avg = sum(u @ a @ u.conj().T for u in weyl_heisenberg(d)) / d**2
        assert np.allclose(avg, np.trace(a) * np.eye(d) / d)


def test_dlm_project_empty_design():
    with pytest.raises(ValidationError):
        dlm_project(dlm(0.9, 0.1, 0.1), two_design=[])


def test_dlm_fidelity_decay_examples():
    assert dlm_fidelity_decay(0.9, 0.01, 0.02, 2, 0) == pytest.approx(1)
    assert dlm_fidelity_decay(1, 0, 0, 2, np.arange(5)) == pytest.approx(np.ones(5))
    chan = dlm(0.9, 0.01, 0.02)
    assert dlm_fidelity_decay(0.9, 0.01, 0.02, 2, 10) == pytest.approx(fidelities(power(chan, 10)).avg_fidelity, abs=1e-10)


def test_exchange_closed_forms_examples():
    f = exchange_closed_forms(0.0)
    assert (f.L1, f.L2, f.CL_state, f.CL1) == (0, 0, 0, 0)
    assert exchange_unitary(0).allclose(identity_channel(QUTRIT))
    f = exchange_closed_forms(np.pi)
    assert (f.L1, f.L2) == pytest.approx((0.5, 1.0))
    assert f.CL1 == pytest.approx(2 / 3)
    assert exchange_closed_forms(np.pi / 2).CL_state == pytest.approx(1.0)


def test_exchange_numerics_match_closed_forms(rng):
    for t in rng.uniform(-2 * np.pi, 2 * np.pi, 20):
        f = exchange_closed_forms(t)
        chan = exchange_unitary(t)
        L1, L2 = leakage_seepage_rates(chan)
        assert (L1, L2) == pytest.approx((f.L1, f.L2), abs=1e-12)
        assert 2 * L1 == pytest.approx(L2, abs=1e-12)
        rho = chan(projector(basis_state(3, 1)))
        assert coherence_of_leakage(rho, QUTRIT) == pytest.approx(f.CL_state, abs=1e-10)


def test_exchange_cl1_printed_form_vs_haar_average(rng):
    """Monte Carlo agrees with the quadrature Haar average (pi/4 at t = pi)
    and not with the printed closed form (2/3)."""
    from qleak.metrics import coherent_rates

    f = exchange_closed_forms(np.pi)
    r = coherent_rates(exchange_unitary(np.pi), 40_000, rng)
    assert f.CL1_quadrature == pytest.approx(np.pi / 4, abs=1e-10)
    assert abs(r.CL1 - f.CL1_quadrature) < 3 * r.CL1_stderr
    assert abs(r.CL1 - f.CL1) > 10 * r.CL1_stderr
    assert r.CL1 <= f.CL1_bound + 3 * r.CL1_stderr


def test_imperfect_twirl_examples():
    dt = 2 * np.arcsin(np.sqrt(2 / 3))
    c = imperfect_dlm_iteration(dt, 1.0, 10)
    assert c.p_l[1:] == pytest.approx(np.full(10, 1 / 3), abs=1e-12)
    c = imperfect_dlm_iteration(np.pi, 1.0, 3)
    assert c.p_l[1] == pytest.approx(0.5, abs=1e-12)
    c = imperfect_dlm_iteration(0.3, 0.0, 200)
    assert not c.monotone and c.first_decrease is not None


def test_imperfect_twirl_full_depolarization_matches_closed_form(rng):
    for dt in rng.uniform(0.01, 3.0, 10):
        c = imperfect_dlm_iteration(dt, 1.0, 60)
        assert c.p_l == pytest.approx(qutrit_unitary_dlm_leakage(dt, c.m), abs=1e-10)


def test_clifford_twirl_preserves_rates():
    ex = exchange_unitary(0.7)
    tw = clifford_twirl(ex)
    assert leakage_seepage_rates(tw) == pytest.approx(leakage_seepage_rates(ex), abs=1e-12)
    assert len(clifford_unitaries_embedded()) == 24


def test_simple_dissipative_examples():
    assert simple_dissipative_channel(1.0, 2.0, 0.0).allclose(identity_channel(QUTRIT))
    assert simple_dissipative_rates(1.0, 1.0, 1e3) == pytest.approx((0.25, 0.5))
    for t in (0.1, 1.0, 5.0):
        rho = projector(basis_state(3, 1))
        closed = simple_dissipative_state_leakage(rho, 0.8, 0.0, t)
        assert closed == pytest.approx(1 - np.exp(-0.8 * t), abs=1e-12)
        assert state_leakage(simple_dissipative_channel(0.8, 0.0, t)(rho), QUTRIT) == pytest.approx(closed, abs=1e-12)
    with pytest.raises(ValidationError):
        simple_dissipative_channel(-1.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        simple_dissipative_channel(1.0, 0.0, -1.0)


def test_simple_dissipative_closed_forms(rng):
    for _ in range(100):
        g1, g2, t = rng.uniform(0, 3, 3)
        chan = simple_dissipative_channel(g1, g2, t)
        assert check_cptp(chan).ok
        assert leakage_seepage_rates(chan) == pytest.approx(simple_dissipative_rates(g1, g2, t), abs=1e-10)
        rho = random_density(3, rng)
        assert state_leakage(chan(rho), QUTRIT) == pytest.approx(simple_dissipative_state_leakage(rho, g1, g2, t), abs=1e-10)


def test_all_models_cptp():
    for name, rep in all_models_cptp().items():
        assert rep.ok, name
