"""End-to-end transmon LRB runs: gate set, simulated data, fits, intervals
and the directly computed reference values, plus CSV writers for each data
product."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .clifford import GatesetMetrics, gateset_theory_metrics
from .fitting import LrbFit, MonotonicityReport, bootstrap_ci, fit_dataset, monotonicity_flag
from .lindblad import pulse_first_order_leakage, qutrit_thermal_series, thermal_channel, thermal_closed_forms
from .metrics import leakage_seepage_rates
from .lrb import LrbConfig, LrbDataset, expected_lrb_curve, run_lrb
from .models import imperfect_dlm_iteration, qutrit_unitary_dlm_leakage
from .pulses import gaussian_pulse
from .transmon import TransmonGateSet, TransmonParams, thermal_reference_rates, transmon_gateset


@dataclass(frozen=True)
class CellResult:
    """One (pulse kind, duration) cell of a sweep."""

    tg: TransmonGateSet
    theory: GatesetMetrics
    thermal: tuple[float, float]
    dataset: LrbDataset
    fit: LrbFit
    ci: dict
    flag: MonotonicityReport

    @property
    def kind(self) -> str:
        return self.tg.kind

    @property
    def duration(self) -> float:
        return self.tg.duration

    def within_ci(self, name: str) -> bool:
        lo, hi = self.ci[name]
        return lo <= getattr(self.theory, name) <= hi


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _ns(t: float) -> float:
    return round(t * 1e9, 9)


def cell_name(kind: str, duration: float) -> str:
    return f"{kind}_{_ns(duration):g}ns"


def run_cell(
    kind: str,
    duration: float,
    params: TransmonParams,
    cfg: LrbConfig,
    n_resamples: int = 1000,
    bootstrap_seed: int | None = None,
) -> CellResult:
    tg = transmon_gateset(kind, duration, params)
    ds = run_lrb(tg.gateset, cfg, tg.measurement)
    fit = fit_dataset(ds)
    seed = cfg.master_seed if bootstrap_seed is None else bootstrap_seed
    ci = bootstrap_ci(ds, n_resamples, master_seed=seed)
    mean, se = ds.comp_series()
    return CellResult(
        tg,
        gateset_theory_metrics(tg.gateset),
        thermal_reference_rates(tg.gateset, params),
        ds,
        fit,
        ci,
        monotonicity_flag(mean, se),
    )


def run_sweep(
    kinds: Sequence[str],
    durations: Sequence[float],
    params: TransmonParams,
    cfg: LrbConfig,
    n_resamples: int = 1000,
    threads: int = 1,
) -> list[CellResult]:
    """All (kind, duration) cells in kind-major order.

    Every cell uses the same master seed, so the sampled Clifford sequences
    are shared between cells. Output order and values do not depend on
    ``threads``.
    """
    cells = [(k, t) for k in kinds for t in durations]
    inner = replace(cfg, threads=1)

    def job(c):
        return run_cell(c[0], c[1], params, inner, n_resamples)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, cells))
    return [job(c) for c in cells]


SUMMARY_COLUMNS = (
    "pulse",
    "duration_ns",
    "drag_alpha",
    "z_pre",
    "z_post",
    "E_theory",
    "E_fit",
    "E_lo",
    "E_hi",
    "L1_theory",
    "L1_fit",
    "L1_lo",
    "L1_hi",
    "L2_theory",
    "L2_fit",
    "L2_lo",
    "L2_hi",
    "L1_thermal",
    "L2_thermal",
    "lambda1",
    "lambda2",
    "fidelity_model",
    "non_monotone",
)


def summary_rows(cells: Sequence[CellResult]):
    for c in cells:
        p = c.tg.pulse
        row = [c.kind, _ns(c.duration), p.drag_alpha, p.z_pre, p.z_post]
        for name in ("E", "L1", "L2"):
            row += [getattr(c.theory, name), getattr(c.fit, name), c.ci[name][0], c.ci[name][1]]
        row += [c.thermal[0], c.thermal[1], c.fit.leakage.lambda1, c.fit.fidelity.lambda2, c.fit.fidelity.model, c.flag.non_monotone]
        yield row


def write_sweep(cells: Sequence[CellResult], out: str | Path) -> list[Path]:
    out = Path(out)
    paths = [write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(cells))]
    for c in cells:
        (out / "datasets").mkdir(parents=True, exist_ok=True)
        paths.append(c.dataset.to_csv(out / "datasets" / f"{cell_name(c.kind, c.duration)}.csv"))
    return paths


# ---------------------------------------------------------------------------
# Seeds convergence and decay-curve dumps


SEEDS_COLUMNS = ("seeds", "E_fit", "E_lo", "E_hi", "L1_fit", "L1_lo", "L1_hi", "L2_fit", "L2_lo", "L2_hi", "E_theory", "L1_theory", "L2_theory")


def seeds_convergence(
    kind: str,
    duration: float,
    seed_counts: Sequence[int],
    params: TransmonParams,
    cfg: LrbConfig,
    n_resamples: int = 1000,
):
    """Fits and intervals using the first ``K`` sequences per length for each
    ``K`` in ``seed_counts`` (nested subsets of one simulated run)."""
    seed_counts = sorted(int(k) for k in seed_counts)
    if seed_counts[0] < 2:
        raise ValueError("each seed count must be >= 2 for bootstrap intervals")
    tg = transmon_gateset(kind, duration, params)
    theory = gateset_theory_metrics(tg.gateset)
    full = run_lrb(tg.gateset, replace(cfg, seeds=max(seed_counts)), tg.measurement)
    rows = []
    for k in seed_counts:
        ds = full.take(np.nonzero(full.seed < k)[0])
        fit = fit_dataset(ds)
        ci = bootstrap_ci(ds, n_resamples, master_seed=cfg.master_seed)
        row = [k]
        for name in ("E", "L1", "L2"):
            row += [getattr(fit, name), ci[name][0], ci[name][1]]
        row += [theory.E, theory.L1, theory.L2]
        rows.append(row)
    return rows


CURVE_COLUMNS = ("duration_ns", "m", "p_comp_mean", "p_comp_se", "p0_mean", "p0_se", "p_comp_fit", "p0_fit", "p_comp_expected", "p0_expected")


def decay_curves(kind: str, durations: Sequence[float], params: TransmonParams, cfg: LrbConfig):
    """Seed-averaged decay data, the fitted models and the infinite-seed
    expectation for each duration."""
    rows = []
    for t in durations:
        tg = transmon_gateset(kind, t, params)
        ds = run_lrb(tg.gateset, cfg, tg.measurement)
        fit = fit_dataset(ds)
        comp, comp_se = ds.comp_series()
        p0, p0_se = ds.survival_series()
        m = ds.lengths
        exp_comp, exp_p0 = expected_lrb_curve(tg.gateset, m, cfg.spam, tg.measurement)
        lf, ff = fit.leakage, fit.fidelity
        comp_fit = lf.A + lf.B * lf.lambda1**m
        p0_fit = ff.A0 + ff.B0 * lf.lambda1**m + ff.C0 * ff.lambda2**m
        for i in range(len(m)):
            rows.append([_ns(t), m[i], comp[i], comp_se[i], p0[i], p0_se[i], comp_fit[i], p0_fit[i], exp_comp[i], exp_p0[i]])
    return rows


# ---------------------------------------------------------------------------
# Model figures


FIG4_COLUMNS = ("depol_p", "m", "p_leak", "p_leak_ideal")


def fig4_rows(dt: float, depol_ps: Sequence[float], m_max: int):
    """Imperfectly twirled exchange leakage, with the fully depolarized
    closed form alongside."""
    m = np.arange(m_max + 1)
    ideal = qutrit_unitary_dlm_leakage(dt, m)
    rows = []
    for p in depol_ps:
        curve = imperfect_dlm_iteration(dt, p, m_max)
        rows += [[p, int(m[i]), curve.p_l[i], ideal[i]] for i in range(len(m))]
    return rows


FIG5_COLUMNS = ("duration_ns", "alpha", "L1_first_order")


def fig5_rows(durations: Sequence[float], alphas: Sequence[float], params: TransmonParams):
    rows = []
    for a in alphas:
        for t in durations:
            pulse = gaussian_pulse(t, a, params.anharmonicity, sigma_fraction=params.sigma_fraction, dt=params.dt)
            rows.append([_ns(t), a, pulse_first_order_leakage(pulse, params.dim)])
    return rows


THERMAL_COLUMNS = ("kappa_dt", "nbar", "L1", "L2", "L1_second_order", "L2_second_order", "L1_series", "L2_series", "equilibrium_leakage")


def thermal_rows(nbars: Sequence[float], kappa_dts: Sequence[float], dim: int = 3):
    """Exact rates of the qutrit photon-loss channel over one step
    ``kappa * dt`` (kappa set to 1) next to the printed second-order forms
    and the qutrit Taylor series (the two differ at second order)."""
    rows = []
    for kdt in kappa_dts:
        for nb in nbars:
            L1, L2 = leakage_seepage_rates(thermal_channel(1.0, nb, kdt, dim))
            forms = thermal_closed_forms(1.0, nb, kdt)
            s1, s2 = qutrit_thermal_series(1.0, nb, kdt)
            rows.append([kdt, nb, L1, L2, forms.L1_2nd, forms.L2_2nd, s1, s2, forms.equilibrium_leakage])
    return rows
