"""Leakage channel models and their closed-form predictions.

Covers erasure, the depolarizing leakage extension (DLE) of an arbitrary
computational channel, the depolarizing leakage model (DLM) and the twirl that
projects any channel onto one, exchange-type unitary leakage, the imperfectly
twirled exchange error, and purely dissipative two-level leakage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from .clifford import clifford_unitaries_embedded
from .metrics import fidelities, leakage_seepage_rates, state_leakage
from .operators import (
    Channel,
    SubspacePartition,
    ValidationError,
    check_cptp,
    dissipator_superop,
    embed_block,
    identity_channel,
    projector,
    basis_state,
    superop_of_unitary,
    vec,
)


def _check_prob(name: str, x: float):
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {x}")


# ---------------------------------------------------------------------------
# Erasure


def erasure_channel(p: float, part: SubspacePartition | None = None, sink_index: int | None = None) -> Channel:
    """``rho -> (1-p) rho + p Tr[rho] |s><s|`` with ``|s>`` a leakage basis state."""
    part = SubspacePartition.qutrit() if part is None else part
    _check_prob("erasure probability", p)
    sink = part.d1 if sink_index is None else int(sink_index)
    if not (part.d1 <= sink < part.dim):
        raise ValidationError(f"sink index {sink} is not in the leakage subspace")
    d = part.dim
    s = projector(basis_state(d, sink))
    sop = (1 - p) * np.eye(d * d) + p * np.outer(vec(s), vec(np.eye(d)).conj())
    return Channel(sop, part)


# ---------------------------------------------------------------------------
# Depolarizing leakage


def _block_projector(part: SubspacePartition, i: int) -> np.ndarray:
    return part.p_comp if i == 1 else part.p_leak


def depolarizing_block(i: int, j: int, part: SubspacePartition) -> Channel:
    """``D_ij(rho) = Tr[1_j rho] 1_i / d_i``."""
    if i not in (1, 2) or j not in (1, 2):
        raise ValidationError(f"block indices must be 1 or 2, got ({i}, {j})")
    pi, pj = _block_projector(part, i), _block_projector(part, j)
    di = part.d1 if i == 1 else part.d2
    return Channel(np.outer(vec(pi), vec(pj)) / di, part)


def embed_computational(inner_sop: np.ndarray, part: SubspacePartition) -> np.ndarray:
    """Full-space superoperator acting as ``inner`` on L(X_1) and as zero on
    every other block."""
    d, d1 = part.dim, part.d1
    inner_sop = np.asarray(inner_sop)
    if inner_sop.shape != (d1 * d1, d1 * d1):
        raise ValidationError(f"inner superoperator must be {d1**2}x{d1**2}, got {inner_sop.shape}")
    idx = (np.arange(d1)[:, None] + d * np.arange(d1)[None, :]).ravel(order="F")
    out = np.zeros((d * d, d * d), dtype=complex)
    out[np.ix_(idx, idx)] = inner_sop
    return out


def depolarizing_inner(mu1: float, d1: int) -> np.ndarray:
    """``mu1 * I + (1 - mu1) * D`` on a ``d1``-dimensional space."""
    eye = np.eye(d1)
    return mu1 * np.eye(d1 * d1) + (1 - mu1) * np.outer(vec(eye), vec(eye)) / d1


def mu1_bounds(d1: int) -> tuple[float, float]:
    return -1.0 / (d1 * d1 - 1), 1.0


@dataclass(frozen=True)
class DleParams:
    L1: float
    L2: float
    inner_channel: np.ndarray | None = None  # d1^2 x d1^2 superoperator on X_1
    mu1: float | None = None


def dle(params: DleParams, part: SubspacePartition | None = None) -> Channel:
    """``(1-L1) E_1 + L1 D_21 + L2 D_12 + (1-L2) D_22``."""
    part = SubspacePartition.qutrit() if part is None else part
    _check_prob("L1", params.L1)
    _check_prob("L2", params.L2)
    if params.inner_channel is not None:
        inner = np.asarray(params.inner_channel)
    elif params.mu1 is not None:
        lo, hi = mu1_bounds(part.d1)
        if not (lo - 1e-12 <= params.mu1 <= hi + 1e-12):
            raise ValidationError(f"mu1={params.mu1} outside [{lo:.6g}, {hi}] is not completely positive")
        inner = depolarizing_inner(params.mu1, part.d1)
    else:
        inner = np.eye(part.d1**2)
    sop = (
        (1 - params.L1) * embed_computational(inner, part)
        + params.L1 * depolarizing_block(2, 1, part).sop
        + params.L2 * depolarizing_block(1, 2, part).sop
        + (1 - params.L2) * depolarizing_block(2, 2, part).sop
    )
    return Channel(sop, part)


def dlm(mu1: float, L1: float, L2: float, part: SubspacePartition | None = None) -> Channel:
    return dle(DleParams(L1, L2, mu1=mu1), part)


def dle_accumulation(L1: float, L2: float, p0: float, m) -> np.ndarray | float:
    """State leakage after ``m`` applications of a DLE starting from leakage ``p0``."""
    m = np.asarray(m, dtype=float)
    if L1 + L2 == 0:
        out = np.full_like(m, p0)
    else:
        fix = L1 / (L1 + L2)
        out = fix - (fix - p0) * (1.0 - L1 - L2) ** m
    return float(out) if out.ndim == 0 else out


def twirl_parameter(block_fidelity: float, d1: int) -> float:
    """``mu1 = (d1 F - 1) / (d1 - 1)`` for the average fidelity ``F`` of the
    normalized computational block."""
    return (d1 * block_fidelity - 1.0) / (d1 - 1.0)


def dlm_parameters(chan: Channel) -> tuple[float, float, float]:
    """``(mu1, L1, L2)`` of the DLM that the twirl maps ``chan`` to."""
    part = chan.partition
    L1, L2 = leakage_seepage_rates(chan)
    d1 = part.d1
    rep = fidelities(chan)
    if 1.0 - L1 <= 0:
        return 0.0, L1, L2
    f_pro_block = rep.process_fidelity / (1.0 - L1)
    block_fid = (d1 * f_pro_block + 1.0) / (d1 + 1.0)
    return twirl_parameter(block_fid, d1), L1, L2


def dlm_fidelity_decay(mu1: float, L1: float, L2: float, d1: int, m) -> np.ndarray | float:
    """Average gate fidelity of ``m`` repeated applications of a DLM."""
    p_l = dle_accumulation(L1, L2, 0.0, m)
    m = np.asarray(m, dtype=float)
    out = (1.0 - p_l + (d1 - 1) * (1.0 - L1) ** m * mu1**m) / d1
    return float(out) if np.ndim(out) == 0 else out


def weyl_heisenberg(d: int) -> list[np.ndarray]:
    """Clock-and-shift operators; an exact unitary 1-design in dimension ``d``."""
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)]


def _block_unitary_superop(u: np.ndarray, part: SubspacePartition, block: int) -> np.ndarray:
    full = embed_block(u, part, block)
    return np.kron(full.conj(), full)


def dlm_project(
    chan: Channel,
    two_design: Sequence[np.ndarray] | None = None,
    one_design: Sequence[np.ndarray] | None = None,
) -> Channel:
    """Independent group average over a 2-design on X_1 and a 1-design on X_2.

    Each term conjugates by the phase-averaged superoperators
    ``S_{U_1} + S_{V_2}`` (left) and ``S_{U_1}^dag + S_{U_2}`` (right),
    so block-coupling coherences are discarded.
    """
    part = chan.partition
    if two_design is None:
        if part.d1 != 2:
            raise ValidationError("a two-design must be supplied when d1 != 2")
        two_design = [u[:2, :2] for u in clifford_unitaries_embedded(SubspacePartition(2, (1,)))]
    if one_design is None:
        one_design = weyl_heisenberg(part.d2)
    if len(two_design) == 0 or len(one_design) == 0:
        raise ValidationError("design sets must be non-empty")
    s1 = [_block_unitary_superop(u, part, 1) for u in two_design]
    s2 = [_block_unitary_superop(v, part, 2) for v in one_design]
    avg1 = sum(s1) / len(s1)
    avg2 = sum(s2) / len(s2)
    s = chan.sop
    twirl = sum(a @ s @ a.conj().T for a in s1) / len(s1)
    out = twirl + avg1 @ s @ avg2 + avg2 @ s @ avg1 + avg2 @ s @ avg2
    return Channel(out, part)


# ---------------------------------------------------------------------------
# Exchange unitary leakage


def exchange_hamiltonian() -> np.ndarray:
    """``(|1><2| + |2><1|) / 2`` on a qutrit."""
    h = np.zeros((3, 3), dtype=complex)
    h[1, 2] = h[2, 1] = 0.5
    return h


def exchange_unitary_matrix(t: float) -> np.ndarray:
    """``exp(-i t H)`` for the exchange Hamiltonian."""
    c, s = np.cos(t / 2), np.sin(t / 2)
    u = np.eye(3, dtype=complex)
    u[1, 1] = u[2, 2] = c
    u[1, 2] = u[2, 1] = -1j * s
    return u


def exchange_unitary(t: float) -> Channel:
    return superop_of_unitary(exchange_unitary_matrix(t), SubspacePartition.qutrit())


@dataclass(frozen=True)
class ExchangeClosedForms:
    L1: float
    L2: float
    CL_state: float  # coherence of leakage of |1><1| evolved for time t
    CL1: float  # printed closed form for the coherent leakage rate
    CL1_bound: float
    CL1_quadrature: float  # Haar average by one-dimensional quadrature


def exchange_closed_forms(t: float) -> ExchangeClosedForms:
    d1, d2 = 2, 1
    s, c = np.sin(t / 2), np.cos(t / 2)
    s2 = s * s
    if abs(1 - np.cos(t)) < 1e-15:
        cl1 = 0.0
    else:
        cl1 = 2 * abs(s) * (2 - (1 + np.cos(t)) * abs(c)) / (3 * (1 - np.cos(t)))
    bound = 2 / d1 * abs(s) * np.sqrt(d1 - s2)
    # for a qubit Haar state u = |<1|psi>|^2 is uniform on [0, 1]; the output is
    # pure with leakage u s^2, so its coherence is 2 sqrt(u s^2 (1 - u s^2))
    quad_val = quad(lambda u: 2 * np.sqrt(max(u * s2 * (1 - u * s2), 0.0)), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]
    return ExchangeClosedForms(s2 / d1, s2 / d2, abs(np.sin(t)), float(cl1), float(bound), float(quad_val))


# ---------------------------------------------------------------------------
# Imperfect twirl of exchange leakage


@dataclass(frozen=True)
class LeakageCurve:
    m: np.ndarray
    p_l: np.ndarray
    first_decrease: int | None  # first m with p_l(m) < p_l(m-1)
    max_amplitude: float  # largest peak-to-trough drop

    @property
    def monotone(self) -> bool:
        return self.first_decrease is None


def oscillation_report(m: np.ndarray, p: np.ndarray, tol: float = 1e-12) -> tuple[int | None, float]:
    diffs = np.diff(p)
    dec = np.where(diffs < -tol)[0]
    first = int(m[dec[0] + 1]) if dec.size else None
    running_max = np.maximum.accumulate(p)
    amp = float(np.max(running_max - p)) if p.size else 0.0
    return first, amp


def leakage_subspace_depolarizer(p: float, part: SubspacePartition) -> Channel:
    """``(1-p) I + p (I_1 + D_2)``."""
    _check_prob("depolarizing probability", p)
    d = part.dim
    i1 = np.kron(part.p_comp, part.p_comp)
    d2 = depolarizing_block(2, 2, part).sop
    return Channel((1 - p) * np.eye(d * d) + p * (i1 + d2), part)


def clifford_twirl(chan: Channel, unitaries: Sequence[np.ndarray] | None = None) -> Channel:
    """Average of ``U^dag o E o U`` over full-space unitaries (default: the
    Cliffords extended as the identity on the leakage level)."""
    part = chan.partition
    unitaries = clifford_unitaries_embedded(part) if unitaries is None else unitaries
    acc = np.zeros_like(chan.sop)
    for u in unitaries:
        su = np.kron(u.conj(), u)
        acc = acc + su.conj().T @ chan.sop @ su
    return Channel(acc / len(unitaries), part)


def imperfect_dlm_step(dt: float, depol_p: float) -> Channel:
    """One step: Clifford twirl of the exchange error followed by partial
    depolarization of the leakage subspace."""
    part = SubspacePartition.qutrit()
    tw = clifford_twirl(exchange_unitary(dt))
    dep = leakage_subspace_depolarizer(depol_p, part)
    return Channel(dep.sop @ tw.sop, part)


def imperfect_dlm_iteration(dt: float, depol_p: float, m_max: int) -> LeakageCurve:
    """State leakage ``p_l(m)`` for ``m = 0..m_max`` starting from ``|0><0|``."""
    part = SubspacePartition.qutrit()
    step = imperfect_dlm_step(dt, depol_p)
    v = vec(projector(basis_state(3, 0)))
    leak_row = vec(part.p_leak).conj()
    vals = []
    for _ in range(m_max + 1):
        vals.append(float(np.real(leak_row @ v)))
        v = step.sop @ v
    m = np.arange(m_max + 1)
    p = np.array(vals)
    first, amp = oscillation_report(m, p)
    return LeakageCurve(m, p, first, amp)


def qutrit_unitary_dlm_leakage(dt: float, m) -> np.ndarray | float:
    """``1/3 - 1/3 [1 - 3/2 sin^2(dt/2)]^m``."""
    m = np.asarray(m, dtype=float)
    out = 1 / 3 - (1 / 3) * (1 - 1.5 * np.sin(dt / 2) ** 2) ** m
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Simple dissipative leakage


def simple_dissipative_generator(
    gamma1: float, gamma2: float, part: SubspacePartition | None = None, comp_index: int = 1, leak_index: int | None = None
) -> np.ndarray:
    part = SubspacePartition.qutrit() if part is None else part
    if gamma1 < 0 or gamma2 < 0:
        raise ValidationError(f"rates must be non-negative, got {gamma1}, {gamma2}")
    leak_index = part.d1 if leak_index is None else leak_index
    d = part.dim
    a21 = np.zeros((d, d))
    a21[leak_index, comp_index] = 1.0
    return dissipator_superop(a21, gamma1) + dissipator_superop(a21.T, gamma2)


def simple_dissipative_channel(
    gamma1: float, gamma2: float, t: float, part: SubspacePartition | None = None, comp_index: int = 1, leak_index: int | None = None
) -> Channel:
    """``exp(t D)`` with leakage ``|1> -> |2>`` at rate ``gamma1`` and
    seepage ``|2> -> |1>`` at rate ``gamma2``."""
    part = SubspacePartition.qutrit() if part is None else part
    if t < 0:
        raise ValidationError(f"time must be non-negative, got {t}")
    gen = simple_dissipative_generator(gamma1, gamma2, part, comp_index, leak_index)
    return Channel(expm(t * gen), part)


def simple_dissipative_rates(gamma1: float, gamma2: float, t: float, d1: int = 2, d2: int = 1) -> tuple[float, float]:
    g = gamma1 + gamma2
    if g == 0:
        return 0.0, 0.0
    f = 1 - np.exp(-t * g)
    return gamma1 * f / (d1 * g), gamma2 * f / (d2 * g)


def simple_dissipative_state_leakage(
    rho: np.ndarray, gamma1: float, gamma2: float, t: float, part: SubspacePartition | None = None, comp_index: int = 1, leak_index: int | None = None
) -> float:
    part = SubspacePartition.qutrit() if part is None else part
    leak_index = part.d1 if leak_index is None else leak_index
    g = gamma1 + gamma2
    l0 = state_leakage(rho, part)
    if g == 0:
        return l0
    drive = gamma1 * np.real(rho[comp_index, comp_index]) - gamma2 * np.real(rho[leak_index, leak_index])
    return float(l0 + drive / g * (1 - np.exp(-t * g)))


def bundled_models() -> dict[str, Channel]:
    """One representative qutrit instance of each bundled model."""
    part = SubspacePartition.qutrit()
    return {
        "erasure": erasure_channel(0.1, part),
        "dle": dle(DleParams(0.05, 0.1), part),
        "dlm": dlm(0.9, 0.01, 0.02, part),
        "exchange": exchange_unitary(1.0),
        "dissipative": simple_dissipative_channel(1.0, 0.5, 0.7, part),
        "imperfect_twirl": imperfect_dlm_step(0.5, 0.1),
        "identity": identity_channel(part),
    }


def all_models_cptp(tol: float = 1e-8) -> dict:
    """CPTP reports for each of ``bundled_models``."""
    return {k: check_cptp(v, tol) for k, v in bundled_models().items()}
