"""Calibrated single-qubit transmon gate sets.

Builds the four pulse variants (GAUSS, DRAG-F, DRAG-L, DRAG-Z), propagates
each +-pi/2 X/Y primitive with 4 ns idle gaps and photon-loss relaxation,
and composes the 24 Cliffords from them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, minimize

from .clifford import PRIMITIVES, CliffordGateSet, build_gateset, primitive_unitary
from .lindblad import (
    LindbladModel,
    photon_loss_dissipator,
    propagate,
    propagate_unitary,
    transmon_hamiltonian,
)
from .metrics import leakage_seepage_rates
from .operators import Channel, ValidationError, compose, superop_of_unitary
from .pulses import PRIMITIVE_PHASES, PulseSchedule, nominal_amplitude

PULSE_KINDS = ("GAUSS", "DRAG-F", "DRAG-L", "DRAG-Z")


@dataclass(frozen=True)
class TransmonParams:
    anharmonicity: float = -2 * np.pi * 300e6  # rad/s
    kappa: float = 1e4  # 1/s
    nbar: float = 0.01
    dim: int = 3
    gap: float = 4e-9  # s, before and after each pulse
    dt: float = 0.05e-9
    measurement_time: float = 5e-6
    sigma_fraction: float = 0.25
    leak_coupling: float = 1.0

    def __post_init__(self):
        if self.dim < 3:
            raise ValidationError("a transmon model needs at least 3 levels")
        if self.kappa < 0 or self.nbar < 0:
            raise ValidationError("kappa and nbar must be >= 0")

    @classmethod
    def noiseless(cls, **kw) -> "TransmonParams":
        """No relaxation and no drive coupling out of the qubit levels."""
        return cls(kappa=0.0, nbar=0.0, leak_coupling=0.0, **kw)

    @property
    def dissipators(self):
        return photon_loss_dissipator(self.kappa, self.nbar, self.dim)

    def idle_model(self) -> LindbladModel:
        return transmon_hamiltonian(self.anharmonicity, None, self.dim).with_dissipators(self.dissipators)


def virtual_z(phi: float, dim: int = 3) -> np.ndarray:
    """Frame change ``diag(1, e^{-i phi}, e^{-2i phi}, ...)``."""
    return np.diag(np.exp(-1j * phi * np.arange(dim)))


# ---------------------------------------------------------------------------
# Coherent pulse figures


def pulse_unitary(pulse: PulseSchedule, params: TransmonParams) -> np.ndarray:
    """Unitary of the bare pulse including its virtual-Z frame changes."""
    model = transmon_hamiltonian(params.anharmonicity, pulse, params.dim, params.leak_coupling)
    u = propagate_unitary(model, pulse.duration, pulse.dt)
    return virtual_z(pulse.z_post, params.dim) @ u @ virtual_z(pulse.z_pre, params.dim)


def rotation_angle(u: np.ndarray) -> float:
    """Rotation angle of the computational block acting on ``|0>``."""
    return 2.0 * float(np.arctan2(abs(u[1, 0]), abs(u[0, 0])))


def unitary_figures(u: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """(average gate fidelity, leakage rate) of ``u`` against a 2x2 target."""
    b = u[:2, :2]
    c = target.conj().T @ b
    f_pro = abs(np.trace(c)) ** 2 / 4
    L1 = 1.0 - np.linalg.norm(b) ** 2 / 2
    return (2 * f_pro + 1 - L1) / 3, L1


def calibrate_amplitude(pulse: PulseSchedule, params: TransmonParams, angle: float = np.pi / 2) -> PulseSchedule:
    """Rescale the amplitude so the X pulse rotates ``|0>`` by ``angle``."""
    probe = replace(pulse, phase=0.0, z_pre=0.0, z_post=0.0)

    def err(amp):
        return rotation_angle(pulse_unitary(replace(probe, amplitude=amp), params)) - angle

    a0 = nominal_amplitude(pulse.duration, angle, pulse.sigma_fraction)
    lo, hi = 0.8 * a0, 1.2 * a0
    for _ in range(10):
        if err(lo) < 0 < err(hi):
            break
        lo, hi = 0.8 * lo, 1.2 * hi
    else:
        raise ValidationError("could not bracket the pulse amplitude")
    amp = brentq(err, lo, hi, xtol=1e-9 * a0, rtol=1e-14)
    return replace(pulse, amplitude=amp)


def golden_section(f, a: float, b: float, tol: float = 1e-6) -> float:
    """Minimizer of a unimodal ``f`` on ``[a, b]``."""
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def base_pulse(duration: float, params: TransmonParams, alpha: float = 0.0) -> PulseSchedule:
    return PulseSchedule(
        duration,
        nominal_amplitude(duration, sigma_fraction=params.sigma_fraction),
        drag_alpha=alpha,
        anharmonicity=params.anharmonicity,
        sigma_fraction=params.sigma_fraction,
        pre_gap=params.gap,
        post_gap=params.gap,
        dt=params.dt,
    )


def design_pulse(kind: str, duration: float, params: TransmonParams, alpha_tol: float = 1e-5) -> PulseSchedule:
    """Calibrated X90 pulse of the requested variant.

    DRAG-F minimizes the coherent infidelity and DRAG-L the coherent leakage
    rate over ``alpha`` in ``[0, 2]``; DRAG-Z keeps the DRAG-L ``alpha`` and
    adds frame changes before and after the pulse that maximize fidelity.
    """
    if kind not in PULSE_KINDS:
        raise ValidationError(f"unknown pulse kind {kind!r}; expected one of {PULSE_KINDS}")
    target = primitive_unitary("X90")

    def calibrated(alpha):
        return calibrate_amplitude(base_pulse(duration, params, alpha), params)

    if kind == "GAUSS":
        return calibrated(0.0)
    if kind == "DRAG-F":
        alpha = golden_section(lambda a: 1 - unitary_figures(pulse_unitary(calibrated(a), params), target)[0], 0.0, 2.0, alpha_tol)
        return calibrated(alpha)
    alpha = golden_section(lambda a: unitary_figures(pulse_unitary(calibrated(a), params), target)[1], 0.0, 2.0, alpha_tol)
    pulse = calibrated(alpha)
    if kind == "DRAG-L":
        return pulse
    u = pulse_unitary(pulse, params)

    def infid(z):
        uz = virtual_z(z[1], params.dim) @ u @ virtual_z(z[0], params.dim)
        return 1 - unitary_figures(uz, target)[0]

    grid = np.linspace(-0.2, 0.2, 21)
    best = min(((infid((a, b)), a, b) for a in grid for b in grid))
    res = minimize(infid, x0=[best[1], best[2]], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 2000})
    return replace(pulse, z_pre=float(res.x[0]), z_post=float(res.x[1]))


# ---------------------------------------------------------------------------
# Noisy channels and gate sets


def idle_channel(duration: float, params: TransmonParams) -> Channel:
    return propagate(params.idle_model(), duration, dt=params.dt)


def primitive_channel(pulse: PulseSchedule, params: TransmonParams) -> Channel:
    """One slot: gap, frame change, pulse, frame change, gap."""
    model = transmon_hamiltonian(params.anharmonicity, pulse, params.dim, params.leak_coupling).with_dissipators(
        params.dissipators
    )
    core = propagate(model, pulse.duration, pulse.dt)
    part = core.partition
    zpre = superop_of_unitary(virtual_z(pulse.z_pre, params.dim), part)
    zpost = superop_of_unitary(virtual_z(pulse.z_post, params.dim), part)
    pre = idle_channel(pulse.pre_gap, params)
    post = idle_channel(pulse.post_gap, params)
    return compose(post, compose(zpost, compose(core, compose(zpre, pre))))


def measurement_channel(params: TransmonParams) -> Channel:
    """Free relaxation during the readout window."""
    return idle_channel(params.measurement_time, params)


def primitive_library(pulse: PulseSchedule, params: TransmonParams) -> dict[str, Channel]:
    return {name: primitive_channel(replace(pulse, phase=PRIMITIVE_PHASES[name]), params) for name in PRIMITIVES}


@dataclass(frozen=True)
class TransmonGateSet:
    kind: str
    duration: float
    pulse: PulseSchedule
    gateset: CliffordGateSet
    measurement: Channel


def transmon_gateset(kind: str, duration: float, params: TransmonParams | None = None) -> TransmonGateSet:
    params = TransmonParams() if params is None else params
    pulse = design_pulse(kind, duration, params)
    lib = primitive_library(pulse, params)
    idle = idle_channel(pulse.slot_duration, params)
    gs = build_gateset(lib, idle, pulse.slot_duration)
    return TransmonGateSet(kind, duration, pulse, gs, measurement_channel(params))


def thermal_reference_rates(gs: CliffordGateSet, params: TransmonParams) -> tuple[float, float]:
    """Gate-set averaged leakage and seepage of pure relaxation lasting as
    long as each Clifford."""
    model = LindbladModel(np.zeros((params.dim, params.dim)), dissipators=tuple(params.dissipators))
    g = model.static_generator()
    part = gs.partition
    rates = [leakage_seepage_rates(Channel(expm(t * g), part)) for t in gs.durations]
    r = np.array(rates)
    return float(r[:, 0].mean()), float(r[:, 1].mean())


def pulse_error_summary(pulse: PulseSchedule, params: TransmonParams) -> dict:
    """Coherent infidelity and leakage of the bare pulse (no relaxation)."""
    f, L1 = unitary_figures(pulse_unitary(pulse, params), primitive_unitary("X90"))
    return {"infidelity": 1 - f, "L1": L1, "alpha": pulse.drag_alpha, "amplitude": pulse.amplitude}

