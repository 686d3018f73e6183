import numpy as np
import pytest

from qleak.clifford import build_gateset, gateset_from_error
from qleak.operators import vec
from qleak.lrb import LrbConfig, LrbDataset, SpamModel, dlm_lrb_closed_form, expected_lrb_curve, run_lrb
from qleak.models import dlm, exchange_unitary
from qleak.operators import SubspacePartition, ValidationError, identity_channel

LENGTHS = (1, 2, 5, 10, 30, 60, 100)
DLM = (0.9, 0.01, 0.02)


def test_noiseless_survival_is_one():
    gs = gateset_from_error(identity_channel(SubspacePartition.qutrit()))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=5))
    assert np.allclose(ds.p[:, 0], 1, atol=1e-12)
    assert np.allclose(ds.p_comp, 1, atol=1e-12)
    assert np.allclose(ds.p_leak, 0, atol=1e-12)


def test_dlm_matches_closed_form():
    gs = gateset_from_error(dlm(*DLM))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=4))
    comp, p0 = dlm_lrb_closed_form(*DLM, 2, 1, LENGTHS)
    assert np.abs(ds.comp_series()[0] - comp).max() < 1e-10
    assert np.abs(ds.survival_series()[0] - p0).max() < 1e-10
    # A + B lambda1^m with the noise applied m + 1 times
    A, lam = 0.02 / 0.03, 0.97
    assert np.allclose(comp, A + (1 - A) * lam * lam ** np.array(LENGTHS), atol=1e-14)


def test_dlm_with_spam_matches_closed_form():
    spam = SpamModel(q1=0.005, q2=0.01, p_l=0.02)
    gs = gateset_from_error(dlm(*DLM))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=3, spam=spam))
    comp, p0 = dlm_lrb_closed_form(*DLM, 2, 1, LENGTHS, spam)
    assert np.abs(ds.comp_series()[0] - comp).max() < 1e-10
    assert np.abs(ds.survival_series()[0] - p0).max() < 1e-10


def test_probabilities_sum_to_one(rng):
    from conftest import random_channel

    part = SubspacePartition.qutrit()
    gs = gateset_from_error(random_channel(part, rng))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=6, spam=SpamModel(0.01, 0.02, 0.0)))
    assert np.abs(ds.p_comp + ds.p_leak - 1).max() < 1e-12


def test_spam_effects_sum_to_identity():
    part = SubspacePartition(2, (2,))
    eff = SpamModel(0.1, 0.2, 0.3).effects(part)
    assert eff.shape == (4, 4, 4)
    assert np.allclose(eff.sum(axis=0), np.eye(4))
    rho = SpamModel(p_l=0.3).initial_state(part)
    assert np.trace(rho) == pytest.approx(1) and rho[2, 2] == pytest.approx(0.15)


def test_config_validation():
    with pytest.raises(ValidationError, match="strictly increasing"):
        LrbConfig((1, 5, 5))
    with pytest.raises(ValidationError):
        LrbConfig((1, 2), seeds=0)
    with pytest.raises(ValidationError):
        SpamModel(q1=1.5)
    with pytest.raises(ValidationError):
        run_lrb(gateset_from_error(identity_channel(SubspacePartition.no_leakage(2))), LrbConfig((1, 2, 3)))


def test_reproducible_and_thread_independent():
    gs = gateset_from_error(dlm(*DLM))
    cfg = LrbConfig(LENGTHS, seeds=5, shots=200, master_seed=7)
    a = run_lrb(gs, cfg)
    b = run_lrb(gs, LrbConfig(LENGTHS, seeds=5, shots=200, master_seed=7, threads=4))
    c = run_lrb(gs, LrbConfig(LENGTHS, seeds=5, shots=200, master_seed=8))
    assert np.array_equal(a.p, b.p) and np.array_equal(a.p_leak, b.p_leak)
    assert not np.array_equal(a.p, c.p)
    # shot frequencies are multiples of 1/shots
    assert np.allclose(a.p * 200, np.round(a.p * 200))


def test_shots_are_unbiased():
    gs = gateset_from_error(dlm(*DLM))
    ds = run_lrb(gs, LrbConfig((1, 20, 50), seeds=400, shots=500, master_seed=3))
    comp, _ = dlm_lrb_closed_form(*DLM, 2, 1, (1, 20, 50))
    mean, se = ds.comp_series()
    assert (np.abs(mean - comp) < 5 * se).all()


def test_csv_round_trip(tmp_path):
    gs = gateset_from_error(dlm(*DLM))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=3))
    path = ds.to_csv(tmp_path / "d.csv")
    assert path.read_text().splitlines()[0] == "m,seed,p_0,p_1,p_comp,p_leak"
    back = LrbDataset.from_csv(path)
    assert np.array_equal(back.p, ds.p) and np.array_equal(back.m, ds.m) and np.array_equal(back.p_leak, ds.p_leak)
    (tmp_path / "bad.csv").write_text("m,seed,p_comp\n1,0,1.0\n")
    with pytest.raises(ValidationError, match="required columns"):
        LrbDataset.from_csv(tmp_path / "bad.csv")


def test_take_and_series():
    gs = gateset_from_error(dlm(*DLM))
    ds = run_lrb(gs, LrbConfig(LENGTHS, seeds=4))
    sub = ds.take(np.nonzero(ds.seed < 2)[0])
    assert (sub.seeds_per_length == 2).all()
    assert list(ds.lengths) == list(LENGTHS)


def test_expected_curve_matches_dlm_closed_form():
    gs = gateset_from_error(dlm(*DLM))
    spam = SpamModel(0.01, 0.02, 0.01)
    comp, p0 = expected_lrb_curve(gs, LENGTHS, spam)
    ref_comp, ref_p0 = dlm_lrb_closed_form(*DLM, 2, 1, LENGTHS, spam)
    assert np.abs(comp - ref_comp).max() < 1e-12 and np.abs(p0 - ref_p0).max() < 1e-12


def test_expected_curve_is_seed_average(transmon_gatesets):
    gs = transmon_gatesets("GAUSS", 8).gateset
    lengths = (1, 3, 6)
    comp, p0 = expected_lrb_curve(gs, lengths)
    # 24^6 sequences is too many to enumerate; compare to a large sample
    ds = run_lrb(gs, LrbConfig(lengths, seeds=3000, master_seed=1))
    mean, se = ds.comp_series()
    assert (np.abs(mean - comp) < 5 * se + 1e-12).all()
    mean0, se0 = ds.survival_series()
    assert (np.abs(mean0 - p0) < 5 * se0 + 1e-12).all()


def test_expected_curve_exhaustive_short_sequences():
    # every length-2 sequence enumerated exactly
    gs = gateset_from_error(exchange_unitary(0.3))
    comp, _ = expected_lrb_curve(gs, [2])
    sops = np.array([c.sop for c in gs.noisy_channels])
    rho = vec(np.diag([1.0, 0, 0]))
    total = 0.0
    for a in range(24):
        for b in range(24):
            r = gs.group.recovery_index([a, b])
            out = sops[r] @ sops[b] @ sops[a] @ rho
            total += np.real(out[0] + out[4])
    assert comp[0] == pytest.approx(total / 576, abs=1e-13)
