"""Leakage randomized benchmarking simulation.

Random Clifford sequences with a recovery gate are applied to a prepared
state; for each sequence we record the computational-basis outcome
probabilities, their sum (population left in the computational subspace)
and its complement.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clifford import CliffordGateSet
from .operators import Channel, SubspacePartition, ValidationError, vec
from .seeding import derive_rng


@dataclass(frozen=True)
class SpamModel:
    """Measurement leakage ``q1``, measurement seepage ``q2`` and initial
    leakage ``p_l``.

    The computational effects are ``M_j = (1-q1)|j><j| + q2 1_2/d1`` so that
    ``sum_j M_j = (1-q1) 1_1 + q2 1_2``; the initial state is
    ``(1-p_l)|0><0| + p_l 1_2/d2``.
    """

    q1: float = 0.0
    q2: float = 0.0
    p_l: float = 0.0

    def __post_init__(self):
        for name in ("q1", "q2", "p_l"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")

    def initial_state(self, part: SubspacePartition) -> np.ndarray:
        rho = np.zeros((part.dim, part.dim), dtype=complex)
        rho[0, 0] = 1.0 - self.p_l
        if self.p_l:
            if part.d2 == 0:
                raise ValidationError("initial leakage needs a leakage subspace")
            rho = rho + self.p_l * part.p_leak / part.d2
        return rho

    def effects(self, part: SubspacePartition) -> np.ndarray:
        """``(d1 + d2, d, d)`` stack: ``M_0 .. M_{d1-1}`` then one effect per
        leakage level, together summing to the identity."""
        d1, d2 = part.d1, part.d2
        if d2 == 0 and (self.q1 or self.q2):
            raise ValidationError("measurement leakage needs a leakage subspace")
        out = []
        for j in range(d1):
            m = np.zeros((part.dim, part.dim))
            m[j, j] = 1.0 - self.q1
            if d2:
                m = m + self.q2 * part.p_leak / d1
            out.append(m)
        for j in part.leak_indices:
            n = np.zeros((part.dim, part.dim))
            n[j, j] = 1.0 - self.q2
            n = n + self.q1 * part.p_comp / d2
            out.append(n)
        return np.array(out)


@dataclass(frozen=True)
class LrbConfig:
    lengths: tuple[int, ...]
    seeds: int = 30
    shots: int = 0  # 0 means exact probabilities
    master_seed: int = 0
    spam: SpamModel = field(default_factory=SpamModel)
    direct_leakage_measurement: bool = False
    threads: int = 1

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ValidationError("at least one sequence length is required")
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValidationError(f"sequence lengths must be strictly increasing, got {lengths}")
        if lengths[0] < 1:
            raise ValidationError("sequence lengths must be >= 1")
        if self.seeds < 1:
            raise ValidationError(f"seeds per length must be >= 1, got {self.seeds}")
        if self.shots < 0:
            raise ValidationError("shots must be >= 0")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")


@dataclass(frozen=True, eq=False)
class LrbDataset:
    """Per-sequence outcome probabilities; one row per (m, seed)."""

    d1: int
    m: np.ndarray
    seed: np.ndarray
    p: np.ndarray  # (rows, d1) computational outcome probabilities
    p_leak: np.ndarray
    direct: bool = False

    def __post_init__(self):
        for name in ("m", "seed", "p", "p_leak"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(int) if name in ("m", "seed") else arr.astype(float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.p.ndim != 2 or self.p.shape[1] != self.d1:
            raise ValidationError(f"expected {self.d1} outcome columns, got shape {self.p.shape}")
        n = len(self.m)
        if not (len(self.seed) == len(self.p) == len(self.p_leak) == n):
            raise ValidationError("dataset columns have different lengths")

    @property
    def p_comp(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def lengths(self) -> np.ndarray:
        return np.unique(self.m)

    @property
    def seeds_per_length(self) -> np.ndarray:
        return np.array([np.sum(self.m == m) for m in self.lengths])

    def _per_length(self, values: np.ndarray):
        out_mean, out_se = [], []
        for m in self.lengths:
            v = values[self.m == m]
            out_mean.append(v.mean())
            out_se.append(v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else np.nan)
        return np.array(out_mean), np.array(out_se)

    def leakage_series(self):
        """Mean and standard error per length of the fitted leakage signal:
        ``p_comp`` normally, ``p_leak`` for direct leakage measurement."""
        return self._per_length(self.p_leak if self.direct else self.p_comp)

    def comp_series(self):
        return self._per_length(self.p_comp)

    def survival_series(self):
        return self._per_length(self.p[:, 0])

    def rows_for(self, m: int) -> np.ndarray:
        return np.nonzero(self.m == m)[0]

    def take(self, rows: np.ndarray) -> "LrbDataset":
        rows = np.asarray(rows)
        return LrbDataset(self.d1, self.m[rows], self.seed[rows], self.p[rows], self.p_leak[rows], self.direct)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "seed"] + [f"p_{j}" for j in range(self.d1)] + ["p_comp", "p_leak"])
            pc = self.p_comp
            for i in range(len(self.m)):
                w.writerow(
                    [int(self.m[i]), int(self.seed[i])]
                    + [repr(float(x)) for x in self.p[i]]
                    + [repr(float(pc[i])), repr(float(self.p_leak[i]))]
                )
        return path

    @classmethod
    def from_csv(cls, path: str | Path, direct: bool = False) -> "LrbDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
        pcols = [i for i, h in enumerate(header) if h.startswith("p_") and h[2:].isdigit()]
        need = {"m", "seed", "p_comp", "p_leak"}
        if not need.issubset(header) or not pcols:
            raise ValidationError(f"CSV header {header} lacks required columns m, seed, p_0.., p_comp, p_leak")
        ix = {h: i for i, h in enumerate(header)}
        data = np.array(rows, dtype=float)
        return cls(len(pcols), data[:, ix["m"]], data[:, ix["seed"]], data[:, pcols], data[:, ix["p_leak"]], direct)


# ---------------------------------------------------------------------------
# Simulation


def _sequence_outcomes(
    gs: CliffordGateSet,
    sops: np.ndarray,
    seqs: np.ndarray,
    rho0_vec: np.ndarray,
    effects_vec: np.ndarray,
    meas: np.ndarray | None,
) -> np.ndarray:
    """Exact outcome probabilities for a batch of sequences of equal length."""
    group = gs.group
    k, m = seqs.shape
    states = np.repeat(rho0_vec[None, :], k, axis=0)
    for t in range(m):
        states = np.einsum("kij,kj->ki", sops[seqs[:, t]], states)
    rec = np.array([group.recovery_index(s) for s in seqs])
    states = np.einsum("kij,kj->ki", sops[rec], states)
    if meas is not None:
        states = states @ meas.T
    # Tr[E rho] = vec(E^dag)^dag vec(rho) = sum(conj(vec(E^dag)) * vec(rho)); effects are Hermitian
    probs = np.real(states @ effects_vec.conj().T)
    return probs


def _run_length(args):
    gs, sops, cfg, idx, rho0_vec, effects_vec, meas = args
    m = cfg.lengths[idx]
    seqs = np.empty((cfg.seeds, m), dtype=int)
    sample_rngs = []
    for k in range(cfg.seeds):
        rng = derive_rng(cfg.master_seed, f"sequence-m{m}", k)
        seqs[k] = rng.integers(0, gs.group.size, size=m)
        sample_rngs.append(rng)
    probs = _sequence_outcomes(gs, sops, seqs, rho0_vec, effects_vec, meas)
    if cfg.shots:
        out = np.empty_like(probs)
        for k in range(cfg.seeds):
            p = np.clip(probs[k], 0.0, None)
            p = p / p.sum()
            out[k] = sample_rngs[k].multinomial(cfg.shots, p) / cfg.shots
        probs = out
    return probs


def run_lrb(gs: CliffordGateSet, cfg: LrbConfig, measurement: Channel | None = None) -> LrbDataset:
    """Simulate the LRB experiment.

    ``measurement`` is an optional channel applied once after the recovery
    gate (for example relaxation during readout). Results depend only on
    ``cfg.master_seed``, not on ``cfg.threads``.
    """
    part = gs.partition
    if part.d2 == 0:
        raise ValidationError("LRB needs a leakage subspace")
    if measurement is not None and measurement.partition != part:
        raise ValidationError("measurement channel acts on a different partition")
    sops = np.array([c.sop for c in gs.noisy_channels])
    rho0_vec = vec(cfg.spam.initial_state(part))
    effects = cfg.spam.effects(part)
    effects_vec = np.array([vec(e.conj().T) for e in effects])
    meas = None if measurement is None else np.asarray(measurement.sop)
    tasks = [(gs, sops, cfg, i, rho0_vec, effects_vec, meas) for i in range(len(cfg.lengths))]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_run_length, tasks))
    else:
        results = [_run_length(t) for t in tasks]
    probs = np.concatenate(results, axis=0)
    ms = np.repeat(np.array(cfg.lengths), cfg.seeds)
    seeds = np.tile(np.arange(cfg.seeds), len(cfg.lengths))
    d1 = part.d1
    return LrbDataset(d1, ms, seeds, probs[:, :d1], probs[:, d1:].sum(axis=1), cfg.direct_leakage_measurement)


# ---------------------------------------------------------------------------
# Closed forms for gate-independent depolarizing leakage noise


def dlm_lrb_closed_form(
    mu1: float, L1: float, L2: float, d1: int, d2: int, lengths: Sequence[int], spam: SpamModel | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """``(p_comp(m), p_0(m))`` when every gate is ``DLM o C``.

    The noise acts once per Clifford including the recovery, i.e. ``m+1``
    times; the leakage population relaxes with ``lambda1 = 1-L1-L2`` toward
    ``L2/(L1+L2)`` and the computational polarization decays with
    ``lambda2 = (1-L1) mu1``.
    """
    spam = SpamModel() if spam is None else spam
    n = np.asarray(lengths, dtype=float) + 1
    lam1 = 1 - L1 - L2
    lam2 = (1 - L1) * mu1
    x0 = 1 - spam.p_l
    a_inf = L2 / (L1 + L2) if L1 + L2 > 0 else x0
    x = a_inf + (x0 - a_inf) * lam1**n
    y = 1 - x
    q1, q2 = spam.q1, spam.q2
    p_comp = (1 - q1) * x + q2 * y
    p0 = (1 - q1) * (x / d1 + (1 - spam.p_l) * lam2**n * (1 - 1 / d1)) + q2 * y / d1
    return p_comp, p0


def expected_lrb_curve(
    gs: CliffordGateSet,
    lengths: Sequence[int],
    spam: SpamModel | None = None,
    measurement: Channel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Infinite-seed average ``(p_comp(m), p_0(m))`` for arbitrary gate noise.

    Tracks one state per accumulated ideal Clifford (24 for a qubit): a
    uniformly random gate ``c`` moves the branch with product ``g`` to
    ``c g``. The recovery for product ``g`` is ``inv(g)``, so the readout of
    each branch is a fixed linear functional.
    """
    spam = SpamModel() if spam is None else spam
    group = gs.group
    part = gs.partition
    n = group.size
    sops = np.array([c.sop for c in gs.noisy_channels])
    effects = spam.effects(part)
    e_comp = vec(effects[: part.d1].sum(axis=0)).conj()
    e_zero = vec(effects[0]).conj()
    meas = np.eye(part.dim**2) if measurement is None else np.asarray(measurement.sop)
    rec = sops[np.asarray(group.inverse_table)]
    r_comp = np.einsum("j,jk,gkl->gl", e_comp, meas, rec)
    r_zero = np.einsum("j,jk,gkl->gl", e_zero, meas, rec)
    lengths = np.asarray(lengths, dtype=int)
    if lengths.size == 0 or lengths.min() < 0:
        raise ValidationError("lengths must be non-negative")
    branches = np.zeros((n, part.dim**2), dtype=complex)
    branches[0] = vec(spam.initial_state(part))
    mult = np.asarray(group.mult_table)
    out_comp, out_zero = {}, {}
    wanted = set(int(m) for m in lengths)
    for m in range(int(lengths.max()) + 1):
        if m in wanted:
            out_comp[m] = float(np.real(np.sum(r_comp * branches)))
            out_zero[m] = float(np.real(np.sum(r_zero * branches)))
        if m == lengths.max():
            break
        moved = np.einsum("cij,gj->cgi", sops, branches) / n
        nxt = np.zeros_like(branches)
        for c in range(n):
            np.add.at(nxt, mult[c], moved[c])
        branches = nxt
    return np.array([out_comp[int(m)] for m in lengths]), np.array([out_zero[int(m)] for m in lengths])
