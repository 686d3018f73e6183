"""Single-qubit Clifford group built from +-pi/2 X and Y rotations, embedded
in a transmon as ``U (+) 1`` on the leakage level, and noisy gate sets made
by composing propagated primitive pulse channels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .metrics import fidelities, leakage_seepage_rates
from .operators import (
    Channel,
    SubspacePartition,
    ValidationError,
    compose,
    direct_sum,
    identity_channel,
    superop_of_unitary,
)

PRIMITIVES = ("X90", "-X90", "Y90", "-Y90")

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def rotation(axis: str, angle: float) -> np.ndarray:
    pauli = _PAULI_X if axis == "x" else _PAULI_Y
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * pauli


def primitive_unitary(name: str) -> np.ndarray:
    sign = -1.0 if name.startswith("-") else 1.0
    return rotation(name.lstrip("-")[0].lower(), sign * np.pi / 2)


def same_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
    d = u.shape[0]
    return abs(abs(np.trace(u.conj().T @ v)) - d) < tol


def _phase_key(u: np.ndarray) -> tuple:
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    flat = flat * abs(flat[k]) / flat[k]
    return tuple(np.round(flat, 8))


@dataclass(frozen=True)
class CliffordGroup:
    """The 24 single-qubit Cliffords with a shortest decomposition of each
    into primitive pulses (applied left to right in time order)."""

    unitaries: tuple[np.ndarray, ...]
    decompositions: tuple[tuple[str, ...], ...]
    mult_table: np.ndarray  # mult_table[a, b] = index of U_a @ U_b
    inverse_table: np.ndarray

    @property
    def size(self) -> int:
        return len(self.unitaries)

    def index_of(self, u: np.ndarray) -> int:
        for i, v in enumerate(self.unitaries):
            if same_up_to_phase(u, v):
                return i
        raise ValidationError("unitary is not a Clifford")

    def compose_sequence(self, seq: Sequence[int]) -> int:
        """Index of ``C_m ... C_1`` for a time-ordered sequence ``(C_1, ..., C_m)``."""
        acc = 0
        for g in seq:
            acc = int(self.mult_table[g, acc])
        return acc

    def recovery_index(self, seq: Sequence[int]) -> int:
        """The Clifford that undoes the time-ordered sequence."""
        if len(seq) == 0:
            raise ValidationError("recovery of an empty sequence is undefined")
        return int(self.inverse_table[self.compose_sequence(seq)])

    def embedded(self, index: int) -> np.ndarray:
        return direct_sum(self.unitaries[index], np.eye(1))


@lru_cache(maxsize=1)
def clifford_group() -> CliffordGroup:
    """Breadth-first enumeration from the identity; index 0 is the identity
    and each entry's decomposition has minimal primitive count."""
    units = [np.eye(2, dtype=complex)]
    decomps: list[tuple[str, ...]] = [()]
    seen = {_phase_key(units[0])}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for name in PRIMITIVES:
                u = primitive_unitary(name) @ units[i]
                k = _phase_key(u)
                if k not in seen:
                    seen.add(k)
                    units.append(u)
                    decomps.append(decomps[i] + (name,))
                    nxt.append(len(units) - 1)
        frontier = nxt
    n = len(units)
    if n != 24:
        raise RuntimeError(f"expected 24 Cliffords, generated {n}")
    keys = {_phase_key(u): i for i, u in enumerate(units)}
    mult = np.empty((n, n), dtype=int)
    for a in range(n):
        for b in range(n):
            mult[a, b] = keys[_phase_key(units[a] @ units[b])]
    inv = np.array([int(np.where(mult[a] == 0)[0][0]) for a in range(n)])
    return CliffordGroup(tuple(units), tuple(decomps), mult, inv)


def clifford_unitaries_embedded(part: SubspacePartition | None = None) -> list[np.ndarray]:
    """Cliffords as ``U (+) 1_2`` on the full space."""
    part = SubspacePartition.qutrit() if part is None else part
    if part.d1 != 2:
        raise ValidationError("single-qubit Cliffords need d1 = 2")
    return [direct_sum(u, np.eye(part.d2)) for u in clifford_group().unitaries]


# ---------------------------------------------------------------------------
# Noisy gate sets


@dataclass(frozen=True)
class CliffordGateSet:
    group: CliffordGroup
    ideal_channels: tuple[Channel, ...]
    noisy_channels: tuple[Channel, ...]
    durations: tuple[float, ...] = field(default=())  # seconds per Clifford

    @property
    def partition(self) -> SubspacePartition:
        return self.noisy_channels[0].partition


def build_gateset(
    primitive_channels: Mapping[str, Channel],
    idle_channel: Channel,
    slot_duration: float = 0.0,
) -> CliffordGateSet:
    """Compose propagated primitive pulses into the 24 Cliffords.

    The identity Clifford is one idle slot (``idle_channel``)."""
    missing = [p for p in PRIMITIVES if p not in primitive_channels]
    if missing:
        raise ValidationError(f"pulse library is missing primitives {missing}")
    group = clifford_group()
    part = idle_channel.partition
    noisy, ideal, durations = [], [], []
    for idx, seq in enumerate(group.decompositions):
        ideal.append(superop_of_unitary(direct_sum(group.unitaries[idx], np.eye(part.d2)), part))
        if not seq:
            noisy.append(idle_channel)
            durations.append(slot_duration)
            continue
        chan = identity_channel(part)
        for name in seq:
            chan = compose(primitive_channels[name], chan)
        noisy.append(chan)
        durations.append(slot_duration * len(seq))
    return CliffordGateSet(group, tuple(ideal), tuple(noisy), tuple(durations))


def gateset_from_error(error: Channel) -> CliffordGateSet:
    """Gate set whose every gate is ``error o U``: gate-independent noise."""
    group = clifford_group()
    part = error.partition
    ideal = tuple(superop_of_unitary(direct_sum(u, np.eye(part.d2)), part) for u in group.unitaries)
    noisy = tuple(compose(error, g) for g in ideal)
    return CliffordGateSet(group, ideal, noisy, tuple(0.0 for _ in ideal))


@dataclass(frozen=True)
class GatesetMetrics:
    E: float
    L1: float
    L2: float


def gateset_theory_metrics(gs: CliffordGateSet) -> GatesetMetrics:
    """Mean infidelity, leakage and seepage over the 24 noisy gates."""
    reports = [fidelities(n, target=i) for n, i in zip(gs.noisy_channels, gs.ideal_channels)]
    return GatesetMetrics(
        float(np.mean([1.0 - r.avg_fidelity for r in reports])),
        float(np.mean([r.L1 for r in reports])),
        float(np.mean([r.L2 for r in reports])),
    )


def average_rates(channels: Sequence[Channel]) -> tuple[float, float]:
    rates = np.array([leakage_seepage_rates(c) for c in channels])
    return float(rates[:, 0].mean()), float(rates[:, 1].mean())


def export_gateset(gs: CliffordGateSet, directory: str | Path) -> list[Path]:
    """Write each noisy superoperator as a ``gate_XX_real.csv`` /
    ``gate_XX_imag.csv`` pair."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for idx, chan in enumerate(gs.noisy_channels):
        for part_name, arr in (("real", chan.sop.real), ("imag", chan.sop.imag)):
            path = directory / f"gate_{idx:02d}_{part_name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                for row in arr:
                    w.writerow([repr(float(x)) for x in row])
            written.append(path)
    with open(directory / "decompositions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "primitives"])
        for idx, seq in enumerate(gs.group.decompositions):
            w.writerow([idx, " ".join(seq) if seq else "idle"])
    return written


def read_superop_csv(real_path: str | Path, imag_path: str | Path, part: SubspacePartition) -> Channel:
    re = np.loadtxt(real_path, delimiter=",", ndmin=2)
    im = np.loadtxt(imag_path, delimiter=",", ndmin=2)
    if re.shape != im.shape:
        raise ValidationError(f"real/imag CSV shapes differ: {re.shape} vs {im.shape}")
    return Channel(re + 1j * im, part)
