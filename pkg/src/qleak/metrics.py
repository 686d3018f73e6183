"""Leakage figures of merit for states and channels.

All rates are computed from the superoperator directly. Haar averages that
have no closed form (the coherent leakage and seepage rates) are estimated by
Monte Carlo and returned with their standard errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .operators import (
    Channel,
    SubspacePartition,
    ValidationError,
    haar_random_states,
    unvec,
    vec,
)


@dataclass(frozen=True)
class LeakageReport:
    L1: float
    L2: float
    avg_fidelity: float
    process_fidelity: float

    @property
    def infidelity(self) -> float:
        return 1.0 - self.avg_fidelity


def _check_state(rho: np.ndarray, part: SubspacePartition) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (part.dim, part.dim):
        raise ValidationError(f"state of shape {rho.shape} does not match partition dimension {part.dim}")
    return rho


def state_leakage(rho: np.ndarray, part: SubspacePartition) -> float:
    """Population of ``rho`` in the leakage subspace."""
    rho = _check_state(rho, part)
    return float(np.real(np.trace(part.p_leak @ rho)))


def _require_leakage(part: SubspacePartition):
    if part.d2 == 0:
        raise ValidationError("partition has no leakage subspace; rates are undefined")


def leakage_seepage_rates(chan: Channel) -> tuple[float, float]:
    """``L1 = L(E(1_1/d1))`` and ``L2 = 1 - L(E(1_2/d2))``."""
    part = chan.partition
    _require_leakage(part)
    L1 = state_leakage(chan(part.p_comp / part.d1), part)
    L2 = 1.0 - state_leakage(chan(part.p_leak / part.d2), part)
    return L1, L2


def worst_case_bounds(chan: Channel) -> tuple[float, float]:
    """Upper bounds ``(d1*L1, d2*L2)`` on the leakage of any computational
    input state and on the seepage of any leakage input state."""
    L1, L2 = leakage_seepage_rates(chan)
    return chan.partition.d1 * L1, chan.partition.d2 * L2


def process_fidelity(chan: Channel) -> float:
    """``Tr[(1_1 kron 1_1) S] / d1^2``: process fidelity with the identity on
    the computational subspace."""
    part = chan.partition
    d, d1 = part.dim, part.d1
    idx = (np.arange(d1)[:, None] + d * np.arange(d1)[None, :]).ravel()
    return float(np.real(np.trace(chan.sop[np.ix_(idx, idx)]))) / d1**2


def fidelities(chan: Channel, target: Channel | None = None) -> LeakageReport:
    """Leakage rates with average and process fidelity.

    If ``target`` is given the fidelities refer to the error channel
    ``target^dag o chan`` (valid for unitary targets).
    """
    if target is not None:
        chan = Channel(target.sop.conj().T @ chan.sop, chan.partition)
    part = chan.partition
    f_pro = process_fidelity(chan)
    if part.d2:
        L1, L2 = leakage_seepage_rates(chan)
    else:
        L1, L2 = 0.0, 0.0
    d1 = part.d1
    f_avg = (d1 * f_pro + 1.0 - L1) / (d1 + 1)
    return LeakageReport(L1, L2, f_avg, f_pro)


# ---------------------------------------------------------------------------
# Coherence of leakage


def ils_project(rho: np.ndarray, part: SubspacePartition) -> np.ndarray:
    """Block-diagonal part ``1_1 rho 1_1 + 1_2 rho 1_2``."""
    rho = _check_state(rho, part)
    p1, p2 = part.p_comp, part.p_leak
    return p1 @ rho @ p1 + p2 @ rho @ p2


def cls_project(rho: np.ndarray, part: SubspacePartition) -> np.ndarray:
    """Block-off-diagonal part ``1_1 rho 1_2 + 1_2 rho 1_1``."""
    rho = _check_state(rho, part)
    p1, p2 = part.p_comp, part.p_leak
    return p1 @ rho @ p2 + p2 @ rho @ p1


def coherence_of_leakage(rho: np.ndarray, part: SubspacePartition) -> float:
    """Trace norm of the coherent-leakage projection."""
    c = cls_project(rho, part)
    return float(np.linalg.svd(c, compute_uv=False).sum())


def coherence_bound(p_leak: float) -> float:
    """``2 sqrt(p (1 - p))``; tight for pure states."""
    p = min(max(p_leak, 0.0), 1.0)
    return 2.0 * np.sqrt(p * (1.0 - p))


def _batched_outputs(chan: Channel, psis: np.ndarray) -> np.ndarray:
    d = chan.dim
    # vec(|psi><psi|) = conj(psi) kron psi under column stacking
    vecs = (psis.conj()[:, :, None] * psis[:, None, :]).reshape(len(psis), d * d)
    out = vecs @ chan.sop.T
    return out.reshape(len(psis), d, d).transpose(0, 2, 1)


def _batched_cl(outs: np.ndarray, part: SubspacePartition) -> np.ndarray:
    c = outs.copy()
    i1, i2 = part.comp_indices, part.leak_indices
    c[:, i1[:, None], i1[None, :]] = 0.0
    c[:, i2[:, None], i2[None, :]] = 0.0
    return np.linalg.svd(c, compute_uv=False).sum(axis=1)


@dataclass(frozen=True)
class CoherentRates:
    CL1: float
    CL1_stderr: float
    CL2: float
    CL2_stderr: float
    n_samples: int


def coherent_rates(
    chan: Channel, n_samples: int = 10_000, rng: np.random.Generator | None = None, batch: int = 4096
) -> CoherentRates:
    """Monte-Carlo Haar averages of the coherence of leakage of
    ``E(|psi_1><psi_1|)`` and ``E(|psi_2><psi_2|)``."""
    part = chan.partition
    _require_leakage(part)
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    results = []
    for block, dj in ((1, part.d1), (2, part.d2)):
        idx = part.comp_indices if block == 1 else part.leak_indices
        vals = []
        remaining = n_samples
        while remaining > 0:
            n = min(batch, remaining)
            local = haar_random_states(dj, n, rng)
            psis = np.zeros((n, part.dim), dtype=complex)
            psis[:, idx] = local
            vals.append(_batched_cl(_batched_outputs(chan, psis), part))
            remaining -= n
        vals = np.concatenate(vals)
        err = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("nan")
        results.append((float(vals.mean()), err))
    return CoherentRates(results[0][0], results[0][1], results[1][0], results[1][1], n_samples)


# ---------------------------------------------------------------------------
# Incoherent decomposition


def block_projection_superop(part: SubspacePartition, block: int) -> np.ndarray:
    """Superoperator of ``rho -> 1_i rho 1_i``."""
    p = part.p_comp if block == 1 else part.p_leak
    return np.kron(p, p).astype(complex)


@dataclass(frozen=True)
class IncoherentDecomposition:
    components: dict  # (i, j) -> Channel or None, normalized I_i E I_j
    weights: dict  # (i, j) -> weight (1-L1, L2, L1, 1-L2)
    remainder: Channel  # E - P_I E P_I, the CLS-coupling part

    def reassemble(self) -> Channel:
        part = self.remainder.partition
        total = self.remainder.sop.copy()
        for key, comp in self.components.items():
            if comp is not None:
                total = total + self.weights[key] * comp.sop
        return Channel(total, part)


def incoherent_decomposition(chan: Channel, tol: float = 1e-14) -> IncoherentDecomposition:
    """Split ``E`` into normalized block maps ``E_ij = I_i E I_j / Tr[1_i E(1_j/d_j)]``
    weighted by ``(1-L1, L2, L1, 1-L2)`` plus the remainder that couples to
    the coherent leakage subspace."""
    part = chan.partition
    _require_leakage(part)
    proj = {1: block_projection_superop(part, 1), 2: block_projection_superop(part, 2)}
    dims = {1: part.d1, 2: part.d2}
    pmat = {1: part.p_comp, 2: part.p_leak}
    components, weights = {}, {}
    incoherent = np.zeros_like(chan.sop)
    for i in (1, 2):
        for j in (1, 2):
            block = proj[i] @ chan.sop @ proj[j]
            incoherent = incoherent + block
            w = float(np.real(np.trace(pmat[i] @ unvec(block @ vec(pmat[j] / dims[j]), part.dim))))
            weights[(i, j)] = w
            components[(i, j)] = Channel(block / w, part) if abs(w) > tol else None
            if components[(i, j)] is None:
                weights[(i, j)] = 0.0
    remainder = Channel(chan.sop - incoherent, part)
    return IncoherentDecomposition(components, weights, remainder)


# ---------------------------------------------------------------------------
# Multiple leakage subspaces


@dataclass(frozen=True)
class MultiSubspaceMetrics:
    state_leakages: tuple[float, ...] | None
    L1: tuple[float, ...] | None
    L2: tuple[float, ...] | None
    total_state_leakage: float | None
    total_L1: float | None
    total_L2_weighted: float | None  # sum_j d_{Y_j} L2_{Y_j}
    merged_L2: float | None  # seepage rate of the merged partition


def multi_subspace_metrics(obj, part: SubspacePartition | None = None) -> MultiSubspaceMetrics:
    """Per-subspace leakage for a state (``obj`` a matrix, ``part`` given) or
    per-subspace leakage and seepage rates for a channel.

    The total seepage is reported as ``sum_j d_{Y_j} L2_{Y_j}``; this equals
    ``d2 * L2`` of the merged partition, so a warning is raised whenever it
    differs from the merged seepage rate.
    """
    if isinstance(obj, Channel):
        chan = obj
        part = chan.partition
        _require_leakage(part)
        rho1 = chan(part.p_comp / part.d1)
        l1 = tuple(float(np.real(np.trace(py @ rho1))) for py in part.leak_projectors)
        l2 = []
        for py, dy in zip(part.leak_projectors, part.leak_dims):
            l2.append(float(np.real(np.trace(part.p_comp @ chan(py / dy)))))
        l2 = tuple(l2)
        weighted = float(sum(dy * x for dy, x in zip(part.leak_dims, l2)))
        merged = leakage_seepage_rates(Channel(chan.sop, part.merged()))[1]
        if abs(weighted - merged) > 1e-12:
            warnings.warn(
                f"weighted subspace seepage total {weighted:.6g} differs from merged "
                f"seepage rate {merged:.6g} (ratio d2 = {part.d2})",
                stacklevel=2,
            )
        return MultiSubspaceMetrics(None, l1, l2, None, float(sum(l1)), weighted, merged)
    if part is None:
        raise ValidationError("a partition is required for state metrics")
    rho = _check_state(obj, part)
    ls = tuple(float(np.real(np.trace(py @ rho))) for py in part.leak_projectors)
    return MultiSubspaceMetrics(ls, None, None, float(sum(ls)), None, None, None)
