import json

import numpy as np
import pytest

from qleak.clifford import gateset_from_error
from qleak.fitting import (
    FIT_REPORT_SCHEMA_VERSION,
    FitError,
    bootstrap_ci,
    estimate_fidelity,
    estimate_rates,
    fit_dataset,
    fit_fidelity_decay,
    fit_leakage_decay,
    fit_report,
    monotonicity_flag,
    spam_coefficients,
)
from qleak.lrb import LrbConfig, LrbDataset, SpamModel, dlm_lrb_closed_form, run_lrb
from qleak.metrics import fidelities
from qleak.models import dlm, imperfect_dlm_iteration
from qleak.operators import SubspacePartition, ValidationError, identity_channel

M = np.arange(1, 1002, 100)


def test_synthetic_leakage_recovery():
    p = 2 / 3 + 1 / 3 * 0.97**M
    fit = fit_leakage_decay(M, p)
    assert (fit.A, fit.B, fit.lambda1) == pytest.approx((2 / 3, 1 / 3, 0.97), abs=1e-6)
    direct = fit_leakage_decay(M, 1 - p, direct=True)
    assert (direct.A, direct.B, direct.lambda1) == pytest.approx((fit.A, fit.B, fit.lambda1), abs=1e-9)


@pytest.mark.parametrize("A, B, lam", [(0.999, 0.001, 0.9999), (0.5, 0.5, 0.5), (0.9, 0.05, 0.995)])
def test_recovery_over_parameter_range(A, B, lam):
    m = np.array([1, 3, 10, 30, 100, 300, 1000])
    fit = fit_leakage_decay(m, A + B * lam**m)
    assert (fit.A, fit.B, fit.lambda1) == pytest.approx((A, B, lam), abs=1e-6)


def test_constant_data():
    fit = fit_leakage_decay(M, np.ones(len(M)))
    assert fit.A + fit.B * fit.lambda1 ** M[0] == pytest.approx(1, abs=1e-12)
    assert fit.B * abs(fit.lambda1 ** M[-1] - fit.lambda1 ** M[0]) < 1e-9
    assert not fit.lambda_identifiable


def test_fit_needs_three_lengths():
    with pytest.raises(ValidationError):
        fit_leakage_decay([1, 2, 2], [1, 0.9, 0.9])


def test_fit_error_carries_residual():
    err = FitError("did not converge", 0.123, [("grid", (1, 0, 0.5))])
    assert "1.230e-01" in str(err) and err.trace


def test_estimate_rates_examples():
    L1, L2 = estimate_rates(2 / 3, 0.97)
    assert (L1, L2) == pytest.approx((0.01, 0.02), abs=1e-15)
    assert estimate_rates(0.3, 1.0) == (0.0, 0.0)
    assert estimate_rates(1.0, 0.9)[0] == 0
    for A, lam in np.random.default_rng(3).uniform(0, 1, (50, 2)):
        a, b = estimate_rates(A, lam)
        assert a + b == pytest.approx(1 - lam, abs=1e-15)


def test_fidelity_example():
    mu1, L1, L2 = 0.9, 0.01, 0.02
    lam2 = (1 - L1) * mu1
    assert lam2 == pytest.approx(0.891)
    assert estimate_fidelity(lam2, L1, 2) == pytest.approx(0.9405)
    assert estimate_fidelity(lam2, L1, 2) == pytest.approx(fidelities(dlm(mu1, L1, L2)).avg_fidelity, abs=1e-12)
    assert estimate_fidelity(1.0, 0.0, 2) == 1.0


def test_noiseless_fit():
    gs = gateset_from_error(identity_channel(SubspacePartition.qutrit()))
    fit = fit_dataset(run_lrb(gs, LrbConfig(tuple(M[:5]), seeds=2)))
    assert fit.F == pytest.approx(1, abs=1e-12) and fit.L1 == pytest.approx(0, abs=1e-12)
    assert fit.fidelity.lambda2 == 1.0 and not fit.fidelity.lambda_identifiable


def test_dlm_end_to_end():
    params = (0.95, 0.002, 0.004)
    gs = gateset_from_error(dlm(*params))
    fit = fit_dataset(run_lrb(gs, LrbConfig((1, 20, 50, 100, 200, 400, 800), seeds=2)))
    ref = fidelities(dlm(*params))
    assert fit.L1 == pytest.approx(0.002, abs=1e-6) and fit.L2 == pytest.approx(0.004, abs=1e-6)
    assert fit.F == pytest.approx(ref.avg_fidelity, abs=1e-8)
    assert fit.fidelity.model == "three-term"


def test_weak_leakage_fallback():
    m = np.arange(1, 500, 25)
    fit = fit_fidelity_decay(m, 0.5 + 0.5 * 0.99**m, lambda1=1.0, A=1.0, B=0.0)
    assert fit.model == "single"
    assert fit.lambda2 == pytest.approx(0.99, abs=1e-8) and fit.B0 == 0


def test_spam_coefficient_examples():
    s = spam_coefficients(0.01, 0.02)
    assert s.eps_M == 0 and s.eps_Q == 0 and s.A == pytest.approx(2 / 3)
    s = spam_coefficients(0.01, 0.02, q1=0.0, q2=0.01)
    assert s.eps_Q == pytest.approx(1e-4)
    assert s.A == pytest.approx(0.0201 / 0.03)
    assert s.A == pytest.approx(0.67)
    assert s.L1_est_A == pytest.approx(0.0099)
    assert s.bias_A == pytest.approx(-s.eps_Q) and s.variance == pytest.approx(1e-8)
    with pytest.raises(ValidationError):
        spam_coefficients(0.01, 0.02, q1=2)


def test_a_estimator_beats_b_estimator(rng):
    for L1, L2, q1, q2, pl in rng.uniform(0, 0.05, (200, 5)):
        s = spam_coefficients(L1, L2, q1, q2, pl)
        assert s.bias_B == pytest.approx(s.bias_A - s.eps_M * (L1 + L2), abs=1e-15)
        if s.eps_M * (L1 + L2) > 0 and s.eps_Q >= 0:
            assert s.a_better


def test_b_estimator_can_win_when_eps_q_negative():
    # eps_Q < 0 and 0 < eps_M (L1 + L2) < 2 |eps_Q|: the two biases partly cancel
    s = spam_coefficients(0.001, 0.03, q1=0.01, q2=0.0)
    assert s.eps_Q < 0 and 0 < s.eps_M * 0.031 < 2 * abs(s.eps_Q)
    assert abs(s.bias_B) < abs(s.bias_A) and not s.a_better


def test_injected_spam_bias():
    mu1, L1, L2 = 0.9, 0.01, 0.02
    spam = SpamModel(q1=0.0, q2=0.01)
    gs = gateset_from_error(dlm(mu1, L1, L2))
    fit = fit_dataset(run_lrb(gs, LrbConfig((1, 10, 30, 60, 100, 200, 400), seeds=2, spam=spam)))
    s = spam_coefficients(L1, L2, 0.0, 0.01)
    assert fit.L1 - L1 == pytest.approx(-s.eps_Q, abs=1e-8)
    assert fit.L2 - L2 == pytest.approx(s.eps_Q, abs=1e-8)


def _dlm_dataset(seeds, shots, seed=0):
    gs = gateset_from_error(dlm(0.95, 0.01, 0.02))
    return run_lrb(gs, LrbConfig((1, 10, 25, 50, 100, 200), seeds=seeds, shots=shots, master_seed=seed))


def test_bootstrap_zero_noise_has_zero_width():
    ds = _dlm_dataset(4, 0)
    ci = bootstrap_ci(ds, 50)
    for name in ("L1", "L2", "E"):
        lo, hi = ci[name]
        assert hi - lo < 1e-9


def test_bootstrap_refuses_single_seed():
    with pytest.raises(ValidationError, match="at least 2 seeds"):
        bootstrap_ci(_dlm_dataset(1, 100), 10)


def test_bootstrap_deterministic_and_shrinks():
    ds = _dlm_dataset(10, 100)
    a = bootstrap_ci(ds, 200, master_seed=5)
    assert a == bootstrap_ci(ds, 200, master_seed=5)
    widths = []
    for k in (10, 40):
        ds = _dlm_dataset(k, 100, seed=1)
        ci = bootstrap_ci(ds, 200, master_seed=2)
        widths.append(np.median([ci[n][1] - ci[n][0] for n in ("L1", "L2", "E")]))
    assert widths[1] < widths[0]


@pytest.mark.slow
def test_bootstrap_stable_across_seeds():
    ds = _dlm_dataset(20, 200)
    w = []
    for s in (1, 2):
        ci = bootstrap_ci(ds, 1000, master_seed=s)
        w.append(np.array([ci[n][1] - ci[n][0] for n in ("L1", "L2", "E")]))
    assert (np.abs(w[0] - w[1]) / w[0] < 0.1).all()


def test_monotonicity_flag():
    assert not monotonicity_flag([1.0, 0.9, 0.8, 0.7]).non_monotone
    assert monotonicity_flag([1.0, 0.9, 0.95, 0.7]).non_monotone
    # a rise within one standard error is only flagged at z = 0
    mean, se = [1.0, 0.9, 0.901, 0.8], [0.01] * 4
    assert monotonicity_flag(mean, se).non_monotone
    assert not monotonicity_flag(mean, se, z=1.0).non_monotone


def test_twirl_diagnostic():
    undepolarized = imperfect_dlm_iteration(0.1, 0.0, 200)
    dephased = imperfect_dlm_iteration(0.1, 1.0, 200)
    assert monotonicity_flag(1 - undepolarized.p_l).non_monotone
    assert not monotonicity_flag(1 - dephased.p_l).non_monotone


def test_fit_report_json():
    ds = _dlm_dataset(3, 0)
    fit = fit_dataset(ds)
    rep = fit_report(fit, bootstrap_ci(ds, 20), {"a": 1}, {"non_monotone": False})
    text = json.dumps(rep)
    back = json.loads(text)
    assert back["schema_version"] == FIT_REPORT_SCHEMA_VERSION
    assert len(back["config_sha256"]) == 64
    assert set(back["parameters"]) >= {"A", "B", "lambda1", "lambda2", "L1", "L2", "F", "E"}
    assert back["flags"]["lambda1_identifiable"] is True
    assert back["flags"]["lambda2_identifiable"] is True


def test_fit_from_csv(tmp_path):
    ds = _dlm_dataset(3, 0)
    ds.to_csv(tmp_path / "d.csv")
    fit = fit_dataset(LrbDataset.from_csv(tmp_path / "d.csv"))
    assert fit.L1 == pytest.approx(fit_dataset(ds).L1, abs=1e-14)


def test_closed_form_consistent_with_fit_model():
    comp, _ = dlm_lrb_closed_form(0.9, 0.01, 0.02, 2, 1, M)
    fit = fit_leakage_decay(M, comp)
    # the noise acts m+1 times, so the fitted B carries one extra lambda1
    assert fit.B == pytest.approx((1 - 2 / 3) * 0.97, abs=1e-8)
