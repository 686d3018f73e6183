"""Lindblad evolution of a driven, weakly anharmonic oscillator.

The propagator of ``d rho/dt = -i[H(t), rho] + D rho`` is built as a full
``d^2 x d^2`` superoperator. Driven segments use fixed-step classical
Runge-Kutta; segments with a constant generator use a matrix exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .metrics import leakage_seepage_rates
from .operators import (
    Channel,
    SubspacePartition,
    ValidationError,
    check_cptp,
    dissipator_superop,
    hamiltonian_superop,
)
from .pulses import PulseSchedule


class StepSizeError(RuntimeError):
    """The fixed-step integrator is unstable or inaccurate at this step."""


# ---------------------------------------------------------------------------
# Operators


def annihilation(dim: int) -> np.ndarray:
    if dim < 2:
        raise ValidationError(f"ladder operators need dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def transmon_drift(anharmonicity: float, dim: int = 3) -> np.ndarray:
    """Drift in the frame rotating at the 0-1 frequency.

    For a qutrit this is ``-anharmonicity |2><2|``; higher levels follow the
    Kerr ladder ``-anharmonicity * n(n-1)/2``.
    """
    n = np.arange(dim)
    return np.diag(-anharmonicity * n * (n - 1) / 2).astype(complex)


def drive_operators(dim: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """``H_x = a + a^dag`` and ``H_y = i(a^dag - a)``."""
    a = annihilation(dim)
    return a + a.conj().T, 1j * (a.conj().T - a)


def transmon_partition(dim: int = 3) -> SubspacePartition:
    return SubspacePartition(2, (dim - 2,))


# ---------------------------------------------------------------------------
# Model


Control = tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """``H(t) = drift + sum_k f_k(t) H_k`` plus dissipators ``rate * D[A]``.

    The control functions take an array of times and return an array of
    real coefficients of the same shape.
    """

    drift: np.ndarray
    controls: tuple[Control, ...] = ()
    dissipators: tuple[tuple[float, np.ndarray], ...] = ()
    partition: SubspacePartition | None = None

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=complex)
        d = drift.shape[0]
        if drift.shape != (d, d):
            raise ValidationError(f"drift must be square, got {drift.shape}")
        if np.linalg.norm(drift - drift.conj().T) > 1e-9 * max(1.0, np.abs(drift).max()):
            raise ValidationError("drift Hamiltonian is not Hermitian")
        for op, _ in self.controls:
            op = np.asarray(op)
            if op.shape != (d, d):
                raise ValidationError(f"control operator shape {op.shape} does not match {d}")
            if np.linalg.norm(op - op.conj().T) > 1e-9 * max(1.0, np.abs(op).max()):
                raise ValidationError("control operator is not Hermitian")
        diss = []
        for rate, op in self.dissipators:
            if rate < 0:
                raise ValidationError(f"dissipation rates must be >= 0, got {rate}")
            op = np.asarray(op, dtype=complex)
            if op.shape != (d, d):
                raise ValidationError(f"dissipator shape {op.shape} does not match {d}")
            diss.append((float(rate), op))
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "dissipators", tuple(diss))
        if self.partition is None:
            object.__setattr__(self, "partition", transmon_partition(d) if d >= 3 else SubspacePartition.no_leakage(d))
        elif self.partition.dim != d:
            raise ValidationError("partition dimension does not match the Hamiltonian")

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        h = self.drift.copy()
        for op, fn in self.controls:
            h = h + float(np.asarray(fn(np.asarray([t])))[0]) * op
        return h

    def dissipator_generator(self) -> np.ndarray:
        d = self.dim
        g = np.zeros((d * d, d * d), dtype=complex)
        for rate, op in self.dissipators:
            if rate:
                g = g + dissipator_superop(op, rate)
        return g

    def static_generator(self) -> np.ndarray:
        return hamiltonian_superop(self.drift) + self.dissipator_generator()

    def generator(self, t: float) -> np.ndarray:
        return hamiltonian_superop(self.hamiltonian(t)) + self.dissipator_generator()

    def with_dissipators(self, dissipators) -> "LindbladModel":
        return replace(self, dissipators=tuple(dissipators))

    def without_controls(self) -> "LindbladModel":
        return replace(self, controls=())


def transmon_hamiltonian(
    anharmonicity: float, pulse: PulseSchedule | None = None, dim: int = 3, leak_coupling: float = 1.0
) -> LindbladModel:
    """Driven transmon ``H0 + Omega_x/2 H_x + Omega_y/2 H_y`` with no dissipation.

    ``leak_coupling`` scales the 1-2 (and higher) drive matrix elements; 0
    reduces the drive to an ideal qubit drive.
    """
    if pulse is not None and pulse.drag_alpha != 0 and anharmonicity == 0:
        raise ValidationError("a DRAG pulse needs a nonzero anharmonicity")
    hx, hy = drive_operators(dim)
    if leak_coupling != 1.0:
        scale = np.full((dim, dim), leak_coupling)
        scale[:2, :2] = 1.0
        hx, hy = hx * scale, hy * scale
    drift = transmon_drift(anharmonicity, dim)
    if pulse is None:
        return LindbladModel(drift)
    controls = (
        (0.5 * hx, lambda t, p=pulse: p.omega(t)[0]),
        (0.5 * hy, lambda t, p=pulse: p.omega(t)[1]),
    )
    return LindbladModel(drift, controls)


def photon_loss_dissipator(kappa: float, nbar: float, dim: int = 3) -> list[tuple[float, np.ndarray]]:
    """``kappa(1+nbar) D[a] + kappa nbar D[a^dag]`` as (rate, operator) pairs;
    zero-rate terms are dropped."""
    if kappa < 0 or nbar < 0:
        raise ValidationError(f"kappa and nbar must be >= 0, got {kappa}, {nbar}")
    a = annihilation(dim)
    out = []
    if kappa * (1 + nbar) > 0:
        out.append((kappa * (1 + nbar), a))
    if kappa * nbar > 0:
        out.append((kappa * nbar, a.conj().T))
    return out


# ---------------------------------------------------------------------------
# Propagation


STABILITY_LIMIT = 2.5  # RK4 on the imaginary axis is stable up to 2*sqrt(2)


def _rk4(g0: np.ndarray, gks: Sequence[np.ndarray], coeffs: np.ndarray, dt: float, x0: np.ndarray) -> np.ndarray:
    """Integrate ``dX/dt = G(t) X`` with ``G = g0 + sum_k c_k g_k``.

    ``coeffs[k, i]`` holds ``c_k`` at ``t0 + i dt/2``. The constant part is
    removed exactly: RK4 runs on ``G_I(t) = e^{-g0 t} (G - g0) e^{g0 t}`` and
    the result is multiplied by ``e^{g0 T}``. Only the slow drive envelope is
    then resolved by the step, not the fast drift phases.
    """
    n = (coeffs.shape[1] - 1) // 2
    if n == 0:
        return x0.copy()
    e_half = expm(0.5 * dt * g0)
    e_half_inv = expm(-0.5 * dt * g0)
    f = np.eye(g0.shape[0], dtype=complex)
    f_inv = f.copy()
    frames = []
    for i in range(2 * n + 1):
        gi = np.zeros_like(g0)
        for k, gk in enumerate(gks):
            if coeffs[k, i] != 0:
                gi += coeffs[k, i] * gk
        frames.append(f_inv @ gi @ f)
        f = f @ e_half
        f_inv = e_half_inv @ f_inv
    x = x0.copy()
    for s in range(n):
        ga, gb, gc = frames[2 * s], frames[2 * s + 1], frames[2 * s + 2]
        k1 = ga @ x
        k2 = gb @ (x + 0.5 * dt * k1)
        k3 = gb @ (x + 0.5 * dt * k2)
        k4 = gc @ (x + dt * k3)
        x = x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return expm(n * dt * g0) @ x


def _steps(T: float, dt: float) -> int:
    if T < 0 or dt <= 0:
        raise ValidationError(f"need T >= 0 and dt > 0, got T={T}, dt={dt}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(T, dt):
        raise ValidationError(f"dt = {dt} does not divide T = {T}")
    return n


def _control_coefficients(model: LindbladModel, t0: float, n: int, dt: float) -> np.ndarray:
    times = t0 + 0.5 * dt * np.arange(2 * n + 1)
    return np.array([np.asarray(fn(times), dtype=float) for _, fn in model.controls]).reshape(len(model.controls), -1)


def _stability_check(norm_bound: float, dt: float):
    if dt * norm_bound > STABILITY_LIMIT:
        raise StepSizeError(
            f"dt * ||G|| = {dt * norm_bound:.3g} exceeds the RK4 stability limit {STABILITY_LIMIT}; use a smaller dt"
        )


def propagate(
    model: LindbladModel, T: float, dt: float = 0.05e-9, t0: float = 0.0, check: bool = True, tol: float = 1e-7
) -> Channel:
    """Superoperator of the evolution from ``t0`` to ``t0 + T``.

    A model without controls is propagated exactly with a matrix
    exponential; otherwise classical RK4 with step ``dt`` is used in the
    frame of the static generator (drift plus dissipators).
    Raises ``StepSizeError`` if the step is unstable or the result fails the
    CPTP check at ``tol``.
    """
    d = model.dim
    part = model.partition
    g0 = model.static_generator()
    if not model.controls:
        _steps(T, dt) if T else None
        return Channel(expm(T * g0), part)
    n = _steps(T, dt)
    gks = [hamiltonian_superop(op) for op, _ in model.controls]
    coeffs = _control_coefficients(model, t0, n, dt)
    bound = sum(np.abs(coeffs[k]).max() * np.linalg.norm(gk, 2) for k, gk in enumerate(gks))
    _stability_check(bound, dt)
    sop = _rk4(g0, gks, coeffs, dt, np.eye(d * d, dtype=complex))
    chan = Channel(sop, part)
    if check:
        rep = check_cptp(chan, tol)
        if not rep.ok:
            raise StepSizeError(
                f"propagated channel fails the CPTP check (TP defect {rep.tp_defect:.2e}, "
                f"min Choi eigenvalue {rep.min_choi_eig:.2e}); reduce dt"
            )
    return chan


def propagate_unitary(model: LindbladModel, T: float, dt: float = 0.05e-9, t0: float = 0.0) -> np.ndarray:
    """Schroedinger propagator of the Hamiltonian part only (dissipators ignored)."""
    d = model.dim
    g0 = -1j * model.drift
    if not model.controls:
        return expm(T * g0)
    n = _steps(T, dt)
    gks = [-1j * np.asarray(op, dtype=complex) for op, _ in model.controls]
    coeffs = _control_coefficients(model, t0, n, dt)
    bound = sum(np.abs(coeffs[k]).max() * np.linalg.norm(gk, 2) for k, gk in enumerate(gks))
    _stability_check(bound, dt)
    return _rk4(g0, gks, coeffs, dt, np.eye(d, dtype=complex))


def trace_trajectory(model: LindbladModel, rho0: np.ndarray, T: float, dt: float = 0.05e-9, t0: float = 0.0):
    """Traces of ``rho(t)`` at every step; for monitoring trace preservation."""
    n = _steps(T, dt)
    d = model.dim
    g0 = model.static_generator()
    gks = [hamiltonian_superop(op) for op, _ in model.controls]
    coeffs = _control_coefficients(model, t0, n, dt) if gks else np.zeros((0, 2 * n + 1))
    x = np.asarray(rho0, dtype=complex).reshape(-1, 1, order="F")
    traces = [np.trace(rho0).real]
    for s in range(n):
        sub = coeffs[:, 2 * s : 2 * s + 3]
        if gks:
            x = _rk4(g0, gks, sub, dt, x)
        else:
            x = expm(dt * g0) @ x
        traces.append(np.trace(x.reshape(d, d, order="F")).real)
    return np.array(traces)


# ---------------------------------------------------------------------------
# Thermal relaxation


@dataclass(frozen=True)
class ThermalForms:
    equilibrium_leakage: float
    L1_2nd: float
    L2_2nd: float


def thermal_closed_forms(kappa: float, nbar: float, dt: float, d2: int = 1) -> ThermalForms:
    """Equilibrium leakage ``(nbar/(1+nbar))^2`` and the second-order
    short-time leakage and seepage rates of photon-loss relaxation."""
    if kappa < 0 or nbar < 0 or dt < 0:
        raise ValidationError("kappa, nbar and dt must be >= 0")
    x = kappa * dt
    eq = (nbar / (1 + nbar)) ** 2
    l1 = kappa * nbar * dt * (1 - (3 + 4 * nbar) * x)
    l2 = 2 * (1 + nbar) * x / d2 * (1 + (1 - 4 * nbar) * x)
    return ThermalForms(eq, l1, l2)


def qutrit_thermal_series(kappa: float, nbar: float, dt: float) -> tuple[float, float]:
    """Second-order Taylor coefficients of the exact qutrit rates.

    The first-order terms agree with ``thermal_closed_forms``; the
    ``(kappa*dt)**2`` terms do not. At ``nbar = 0`` the seepage is exactly
    ``1 - exp(-2 kappa dt)``, which fixes the sign of the correction.
    """
    if kappa < 0 or nbar < 0 or dt < 0:
        raise ValidationError("kappa, nbar and dt must be >= 0")
    x = kappa * dt
    l1 = nbar * x * (1 - 0.5 * (3 + 4 * nbar) * x)
    l2 = 2 * (1 + nbar) * x * (1 - (1 + 2 * nbar) * x)
    return l1, l2


def truncated_equilibrium_leakage(nbar: float, dim: int = 3) -> float:
    """Population above level 1 of the thermal state on ``dim`` levels."""
    if nbar == 0:
        return 0.0
    r = nbar / (1 + nbar)
    return (r**2 - r**dim) / (1 - r**dim)


def stationary_state(gen: np.ndarray) -> np.ndarray:
    """Unit-trace null vector of a Lindblad generator."""
    d = int(round(np.sqrt(gen.shape[0])))
    w, v = np.linalg.eig(gen)
    k = int(np.argmin(np.abs(w)))
    rho = v[:, k].reshape(d, d, order="F")
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def thermal_channel(kappa: float, nbar: float, dt: float, dim: int = 3) -> Channel:
    model = LindbladModel(np.zeros((dim, dim)), dissipators=tuple(photon_loss_dissipator(kappa, nbar, dim)))
    return propagate(model, dt, dt=dt if dt > 0 else 1.0)


# ---------------------------------------------------------------------------
# First-order (Dyson) leakage estimate


def dyson_leakage_estimate(
    hamiltonian: Callable[[float], np.ndarray],
    T: float,
    part: SubspacePartition,
    frame: np.ndarray | None = None,
    n_nodes: int = 200,
) -> tuple[float, float]:
    """Leading-order leakage and seepage from the time-averaged Hamiltonian.

    ``L_j ~ (T^2/d_j) Tr[1_2 Hbar 1_1 Hbar]`` with ``Hbar = (1/T) int H_I dt``
    evaluated by Gauss-Legendre quadrature. If ``frame`` (a diagonal
    Hamiltonian) is given, ``H_I(t) = e^{i frame t} (H(t) - frame) e^{-i frame t}``.
    """
    if T <= 0:
        raise ValidationError(f"T must be positive, got {T}")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    ts = 0.5 * T * (x + 1)
    ws = 0.5 * T * w
    d = part.dim
    hbar = np.zeros((d, d), dtype=complex)
    fdiag = None if frame is None else np.real(np.diag(frame))
    for t, wt in zip(ts, ws):
        h = np.asarray(hamiltonian(float(t)), dtype=complex)
        if fdiag is not None:
            h = h - np.diag(fdiag)
            ph = np.exp(1j * fdiag * t)
            h = ph[:, None] * h * ph.conj()[None, :]
        hbar += wt * h
    hbar /= T
    q = float(np.real(np.trace(part.p_leak @ hbar @ part.p_comp @ hbar)))
    return T**2 * q / part.d1, T**2 * q / part.d2


def pulse_first_order_leakage(pulse: PulseSchedule, dim: int = 3, n_nodes: int = 200) -> float:
    """First-order ``L1`` of a pulse in the interaction frame of the drift."""
    model = transmon_hamiltonian(pulse.anharmonicity, pulse, dim)
    return dyson_leakage_estimate(model.hamiltonian, pulse.duration, model.partition, frame=model.drift, n_nodes=n_nodes)[0]


# ---------------------------------------------------------------------------
# Additivity of unitary and dissipative leakage


def ladder_order(op: np.ndarray, tol: float = 1e-12) -> int:
    """Return ``k`` if every nonzero entry of ``op`` lies on the ``k``-th
    off-diagonal (``k != 0``), else raise."""
    op = np.asarray(op)
    rows, cols = np.nonzero(np.abs(op) > tol)
    if len(rows) == 0:
        raise ValidationError("dissipation operator is zero")
    offsets = set((cols - rows).tolist())
    if len(offsets) != 1 or 0 in offsets:
        raise ValidationError(
            "dissipation operator is not a raising or lowering ladder operator "
            f"(nonzero off-diagonals {sorted(offsets)}); unitary and dissipative "
            "leakage are not additive in this case"
        )
    return offsets.pop()


@dataclass(frozen=True)
class AdditivityResult:
    L_combined: tuple[float, float]
    L_sum: tuple[float, float]
    residual: float


def lindblad_additivity_check(
    hamiltonian: np.ndarray,
    dissipators: Sequence[tuple[float, np.ndarray]],
    dt: float,
    part: SubspacePartition | None = None,
) -> AdditivityResult:
    """Compare the rates of ``exp(dt (H + D))`` with those of ``exp(dt H)``
    plus ``exp(dt D)``; the residual is the larger of the two rate
    differences."""
    for _, op in dissipators:
        ladder_order(op)
    h = np.asarray(hamiltonian, dtype=complex)
    d = h.shape[0]
    part = transmon_partition(d) if part is None else part
    gh = hamiltonian_superop(h)
    gd = sum((dissipator_superop(op, r) for r, op in dissipators), np.zeros((d * d, d * d), dtype=complex))
    comb = leakage_seepage_rates(Channel(expm(dt * (gh + gd)), part))
    uni = leakage_seepage_rates(Channel(expm(dt * gh), part))
    dis = leakage_seepage_rates(Channel(expm(dt * gd), part))
    summed = (uni[0] + dis[0], uni[1] + dis[1])
    res = max(abs(comb[0] - summed[0]), abs(comb[1] - summed[1]))
    return AdditivityResult(comb, summed, float(res))


def convergence_order(values: Sequence[float]) -> np.ndarray:
    """``log2`` ratios of successive residuals under step halving."""
    v = np.asarray(values, dtype=float)
    return np.log2(v[:-1] / v[1:])
