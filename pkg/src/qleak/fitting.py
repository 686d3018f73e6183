"""Decay-model fits and leakage/fidelity estimators for LRB data."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .lrb import LrbDataset
from .operators import ValidationError
from .seeding import derive_rng

WEAK_LEAKAGE_THRESHOLD = 0.05  # B < threshold * A selects the single-exponential fidelity model
# starting decay constants: exp(-r) for per-length decay rates r from 1e-9 to 20
LAMBDA_GRID = np.concatenate([[1.0], np.exp(-np.geomspace(1e-9, 20.0, 400))])
FIT_REPORT_SCHEMA_VERSION = 1
_LSQ = dict(method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=5000)


class FitError(RuntimeError):
    """A decay fit failed to converge."""

    def __init__(self, message: str, best_residual: float, trace: list):
        super().__init__(f"{message} (best residual norm {best_residual:.3e})")
        self.best_residual = best_residual
        self.trace = trace


# ---------------------------------------------------------------------------
# Leakage decay  p(m) = A + B lambda1^m


@dataclass(frozen=True)
class LeakageFit:
    A: float
    B: float
    lambda1: float
    residual_norm: float
    lambda_identifiable: bool = True
    direct: bool = False
    init_trace: tuple = ()


def _powers(lam, m):
    # lam^m for lam possibly negative and m integer-valued
    return np.power(lam, m)


def _log_linear_guess(m, p, a_guess):
    dev = np.abs(p - a_guess)
    ok = dev > 1e-14 * max(1.0, np.abs(p).max())
    if ok.sum() < 2:
        return None
    slope, intercept = np.polyfit(m[ok], np.log(dev[ok]), 1)
    lam = float(np.clip(np.exp(slope), -1.0, 1.0))
    return a_guess, float(np.exp(intercept)), lam


def _grid_linear(m, y, columns, clip_lo, clip_hi):
    """For each lambda in the grid solve the linear least-squares problem in
    the amplitudes (columns are ``1``, optional fixed decays and ``lambda^m``),
    clip to the box and keep the best."""
    best = None
    for lam in LAMBDA_GRID:
        design = np.column_stack(columns + [_powers(lam, m)])
        coef = np.linalg.lstsq(design, y, rcond=None)[0]
        coef = np.clip(coef, clip_lo, clip_hi)
        cost = float(np.sum((design @ coef - y) ** 2))
        if best is None or cost < best[0]:
            best = (cost, coef, lam)
    return best[1], best[2]


def _varpro_guess(m, p):
    coef, lam = _grid_linear(m, p, [np.ones_like(m)], [0, 0], [np.inf, np.inf])
    return coef[0], coef[1], lam


def fit_leakage_decay(m, p, direct: bool = False, init: tuple | None = None) -> LeakageFit:
    """Fit ``p(m) = A + B lambda1^m`` with ``A, B >= 0`` and ``|lambda1| <= 1``.

    With ``direct=True`` the data are leakage populations and the model is
    ``1 - A - B lambda1^m``. ``init = (A, B, lambda1)`` replaces the
    default starting points.
    """
    m = np.asarray(m, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(np.unique(m)) < 3:
        raise ValidationError("the leakage fit needs at least 3 distinct lengths")
    y = 1.0 - p if direct else p

    def resid(x):
        return x[0] + x[1] * _powers(x[2], m) - y

    if init is not None:
        guesses = [("warm", tuple(init))]
    else:
        tail = y[m >= np.quantile(m, 2 / 3)]
        guesses = []
        g = _log_linear_guess(m, y, float(tail.mean()))
        if g is not None:
            guesses.append(("log-linear", g))
        guesses.append(("grid", _varpro_guess(m, y)))
    trace, best = [], None
    lo, hi = [0.0, 0.0, -1.0], [np.inf, np.inf, 1.0]
    for name, x0 in guesses:
        x0 = np.clip(np.array(x0, dtype=float), [0, 0, -1], [np.inf, np.inf, 1])
        x0 = np.minimum(np.maximum(x0, lo), hi)
        try:
            res = least_squares(resid, x0, bounds=(lo, hi), x_scale="jac", **_LSQ)
        except ValueError as exc:
            trace.append((name, tuple(x0), str(exc)))
            continue
        trace.append((name, tuple(float(v) for v in x0), float(np.linalg.norm(res.fun)), int(res.status)))
        if res.status > 0 and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError("leakage decay fit did not converge", float("inf"), trace)
    A, B, lam = (float(v) for v in best.x)
    x = _powers(lam, m)
    identifiable = B * (x.max() - x.min()) > 1e-10
    return LeakageFit(A, B, lam, float(np.linalg.norm(best.fun)), bool(identifiable), direct, tuple(trace))


def estimate_rates(A: float, lambda1: float) -> tuple[float, float]:
    """``L1 = (1-A)(1-lambda1)``, ``L2 = A(1-lambda1)``."""
    return (1 - A) * (1 - lambda1), A * (1 - lambda1)


# ---------------------------------------------------------------------------
# Fidelity decay  p0(m) = A0 + B0 lambda1^m + C0 lambda2^m


@dataclass(frozen=True)
class FidelityFit:
    A0: float
    B0: float
    C0: float
    lambda2: float
    residual_norm: float
    model: str  # "three-term" or "single"
    lambda_identifiable: bool = True


def fit_fidelity_decay(
    m,
    p0,
    lambda1: float,
    A: float = 1.0,
    B: float | None = None,
    threshold: float = WEAK_LEAKAGE_THRESHOLD,
    init: FidelityFit | None = None,
) -> FidelityFit:
    """Fit the survival probability with ``lambda1`` held fixed.

    Constraints: ``0 <= A0 <= A``, ``0 <= C0 <= 1``, ``0 <= A0+B0+C0 <= 1``.
    If ``B < threshold * A`` the leakage term is dropped and
    ``A0 + C0 lambda2^m`` is fitted instead.

    When the fitted ``C0`` term does not change measurably over the lengths
    the data show no decay and ``lambda2`` is reported as 1.
    """
    m = np.asarray(m, dtype=float)
    y = np.asarray(p0, dtype=float)
    single = B is not None and B < threshold * A
    x1 = _powers(lambda1, m)
    a_cap = float(min(max(A, 0.0), 1.0))
    if single:

        def resid(x):
            return x[0] + x[1] * _powers(x[2], m) - y

        if init is not None and init.model == "single":
            x0 = np.array([init.A0, init.C0, init.lambda2])
        else:
            coef, lam = _grid_linear(m, y, [np.ones_like(m)], [0, 0], [1, 1])
            x0 = np.array([coef[0], coef[1], lam])
        lo, hi = [0.0, 0.0, -1.0], [1.0, 1.0, 1.0]
    else:

        def resid(x):
            a0, s, c0, lam2 = x
            return a0 + (s - a0 - c0) * x1 + c0 * _powers(lam2, m) - y

        if init is not None and init.model == "three-term":
            a0, b0, c0, lam = init.A0, init.B0, init.C0, init.lambda2
        else:
            coef, lam = _grid_linear(m, y, [np.ones_like(m), x1], [0, -np.inf, 0], [a_cap, np.inf, 1])
            a0, b0, c0 = coef
        x0 = np.array([a0, np.clip(a0 + b0 + c0, 0, 1), c0, lam])
        lo, hi = [0.0, 0.0, 0.0, -1.0], [a_cap, 1.0, 1.0, 1.0]
    x0 = np.minimum(np.maximum(x0, lo), hi)
    res = least_squares(resid, x0, bounds=(lo, hi), x_scale="jac", **_LSQ)
    if res.status <= 0:
        raise FitError("fidelity decay fit did not converge", float(np.linalg.norm(res.fun)), [("grid", tuple(x0))])
    norm = float(np.linalg.norm(res.fun))
    if single:
        a0, c0, lam2 = (float(v) for v in res.x)
        b0, model = 0.0, "single"
    else:
        a0, s, c0, lam2 = (float(v) for v in res.x)
        b0, model = s - a0 - c0, "three-term"
    x2 = _powers(lam2, m)
    identifiable = c0 * (x2.max() - x2.min()) > 1e-10
    if not identifiable:
        a0, c0, lam2 = a0 + c0 * x2.mean(), 0.0, 1.0
    return FidelityFit(a0, b0, c0, lam2, norm, model, bool(identifiable))


def estimate_fidelity(lambda2: float, L1: float, d1: int) -> float:
    """``F = ((d1-1) lambda2 + 1 - L1) / d1``."""
    return ((d1 - 1) * lambda2 + 1 - L1) / d1


# ---------------------------------------------------------------------------
# SPAM analysis


@dataclass(frozen=True)
class SpamCoefficients:
    A: float
    B: float
    eps_M: float
    eps_Q: float
    L1_est_A: float
    L2_est_A: float
    L1_est_B: float
    L2_est_B: float
    bias_A: float  # L1 estimator bias using A (L2 bias is its negative)
    bias_B: float
    variance: float
    a_better: bool  # |bias_A| <= |bias_B|


def spam_coefficients(L1: float, L2: float, q1: float = 0.0, q2: float = 0.0, p_l: float = 0.0) -> SpamCoefficients:
    """Decay coefficients and estimator biases under measurement leakage
    ``q1``, measurement seepage ``q2`` and initial leakage ``p_l``."""
    for name, v in (("L1", L1), ("L2", L2), ("q1", q1), ("q2", q2), ("p_l", p_l)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {v}")
    if L1 + L2 == 0:
        raise ValidationError("L1 + L2 must be positive")
    s = L1 + L2
    eps_m = q1 + p_l * (1 - q1 - q2)
    eps_q = L1 * q2 - L2 * q1
    A = (L2 + eps_q) / s
    B = (L1 - eps_q) / s - eps_m
    lam = 1 - s
    l1a, l2a = (1 - A) * (1 - lam), A * (1 - lam)
    l1b, l2b = B * (1 - lam), (1 - B) * (1 - lam)
    bias_a = l1a - L1
    bias_b = l1b - L1
    return SpamCoefficients(A, B, eps_m, eps_q, l1a, l2a, l1b, l2b, bias_a, bias_b, eps_q**2, abs(bias_a) <= abs(bias_b))


# ---------------------------------------------------------------------------
# Full analysis, bootstrap and diagnostics


@dataclass(frozen=True)
class LrbFit:
    leakage: LeakageFit
    fidelity: FidelityFit
    L1: float
    L2: float
    F: float

    @property
    def E(self) -> float:
        return 1.0 - self.F

    def as_dict(self) -> dict:
        return {
            "A": self.leakage.A,
            "B": self.leakage.B,
            "lambda1": self.leakage.lambda1,
            "A0": self.fidelity.A0,
            "B0": self.fidelity.B0,
            "C0": self.fidelity.C0,
            "lambda2": self.fidelity.lambda2,
            "L1": self.L1,
            "L2": self.L2,
            "F": self.F,
            "E": self.E,
        }


def fit_series(m, p_leak_signal, p0, d1: int, direct: bool = False, init: LrbFit | None = None) -> LrbFit:
    lf_init = None if init is None else (init.leakage.A, init.leakage.B, init.leakage.lambda1)
    lf = fit_leakage_decay(m, p_leak_signal, direct=direct, init=lf_init)
    L1, L2 = estimate_rates(lf.A, lf.lambda1)
    ff = fit_fidelity_decay(m, p0, lf.lambda1, A=lf.A, B=lf.B, init=None if init is None else init.fidelity)
    F = float(np.clip(estimate_fidelity(ff.lambda2, L1, d1), 0.0, 1.0))
    return LrbFit(lf, ff, L1, L2, F)


def fit_dataset(ds: LrbDataset) -> LrbFit:
    """Leakage fit, rate estimates, fidelity fit and fidelity estimate."""
    leak, _ = ds.leakage_series()
    p0, _ = ds.survival_series()
    return fit_series(ds.lengths, leak, p0, ds.d1, direct=ds.direct)


def bootstrap_ci(
    ds: LrbDataset, n_resamples: int = 1000, master_seed: int = 0, level: float = 0.95
) -> dict[str, tuple[float, float]]:
    """Percentile intervals from resampling seeds within each length."""
    counts = ds.seeds_per_length
    if counts.min() < 2:
        raise ValidationError("bootstrap needs at least 2 seeds per length")
    rng = derive_rng(master_seed, "bootstrap", 0)
    lengths = ds.lengths
    rows = [ds.rows_for(m) for m in lengths]
    leak_vals = ds.p_leak if ds.direct else ds.p_comp
    surv_vals = ds.p[:, 0]
    point = fit_dataset(ds)
    samples: dict[str, list[float]] = {}
    for _ in range(n_resamples):
        picks = [r[rng.integers(0, len(r), size=len(r))] for r in rows]
        leak = np.array([leak_vals[p].mean() for p in picks])
        surv = np.array([surv_vals[p].mean() for p in picks])
        try:
            fit = fit_series(lengths, leak, surv, ds.d1, direct=ds.direct, init=point)
        except FitError:
            try:
                fit = fit_series(lengths, leak, surv, ds.d1, direct=ds.direct)
            except FitError:
                continue
        for k, v in fit.as_dict().items():
            samples.setdefault(k, []).append(v)
    if not samples:
        raise FitError("every bootstrap resample failed to fit", float("inf"), [])
    a = (1 - level) / 2
    return {k: (float(np.quantile(v, a)), float(np.quantile(v, 1 - a))) for k, v in samples.items()}


@dataclass(frozen=True)
class MonotonicityReport:
    non_monotone: bool
    largest_rise: float
    largest_fall: float


def monotonicity_flag(mean, se=None, z: float = 0.0, atol: float = 1e-12) -> MonotonicityReport:
    """Flag a series that both rises and falls between consecutive lengths
    by more than ``z`` combined standard errors (plus ``atol``).

    The default ``z = 0`` flags any visible rise in a decaying seed-averaged
    curve; pass ``se`` and ``z > 0`` to demand statistical significance.
    """
    mean = np.asarray(mean, dtype=float)
    se = np.zeros_like(mean) if se is None else np.nan_to_num(np.asarray(se, dtype=float))
    diff = np.diff(mean)
    tol = z * np.sqrt(se[:-1] ** 2 + se[1:] ** 2) + atol
    rises = diff - tol
    falls = -diff - tol
    return MonotonicityReport(bool(rises.max(initial=-np.inf) > 0 and falls.max(initial=-np.inf) > 0), float(diff.max(initial=0.0)), float(-diff.min(initial=0.0)))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()


def fit_report(fit: LrbFit, ci: dict | None, config: dict | None = None, flags: dict | None = None) -> dict:
    from . import __version__

    return {
        "schema_version": FIT_REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "config_sha256": config_hash(config or {}),
        "parameters": fit.as_dict(),
        "ci95": ci or {},
        "residuals": {"leakage": fit.leakage.residual_norm, "fidelity": fit.fidelity.residual_norm},
        "fidelity_model": fit.fidelity.model,
        "weak_leakage_threshold": WEAK_LEAKAGE_THRESHOLD,
        "flags": dict(
            flags or {},
            lambda1_identifiable=fit.leakage.lambda_identifiable,
            lambda2_identifiable=fit.fidelity.lambda_identifiable,
        ),
    }
