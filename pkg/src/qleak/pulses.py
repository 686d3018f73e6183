"""Truncated-Gaussian drive envelopes with a DRAG quadrature and virtual-Z
frame changes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

# drive phase of each primitive: X90, -X90, Y90, -Y90
PRIMITIVE_PHASES = {"X90": 0.0, "-X90": np.pi, "Y90": np.pi / 2, "-Y90": 3 * np.pi / 2}


@dataclass(frozen=True)
class PulseSchedule:
    """One calibrated pulse slot.

    The in-phase envelope is a Gaussian of width ``sigma_fraction * duration``
    with its value at the pulse edges subtracted, so it starts and ends at
    zero. The quadrature is the DRAG term ``-(alpha / detuning) dOmega_x/dt``
    where ``detuning`` is the frame energy of the second excited level
    (``-anharmonicity`` for the transmon drift used here).
    """

    duration: float  # s
    amplitude: float  # rad/s, peak of the baseline-subtracted Gaussian
    drag_alpha: float = 0.0
    anharmonicity: float = -2 * np.pi * 300e6  # rad/s
    phase: float = 0.0
    sigma_fraction: float = 0.25
    pre_gap: float = 4e-9
    post_gap: float = 4e-9
    z_pre: float = 0.0
    z_post: float = 0.0
    dt: float = 0.05e-9

    @property
    def sigma(self) -> float:
        return self.sigma_fraction * self.duration

    @property
    def slot_duration(self) -> float:
        return self.pre_gap + self.duration + self.post_gap

    @property
    def drag_scale(self) -> float:
        # -(alpha / detuning) with detuning = -anharmonicity
        if self.drag_alpha == 0:
            return 0.0
        return self.drag_alpha / self.anharmonicity

    def _gauss(self, t):
        t = np.asarray(t, dtype=float)
        mid = self.duration / 2
        g = np.exp(-((t - mid) ** 2) / (2 * self.sigma**2))
        edge = np.exp(-(mid**2) / (2 * self.sigma**2))
        inside = (t >= 0) & (t <= self.duration)
        shape = np.where(inside, g - edge, 0.0)
        dshape = np.where(inside, -(t - mid) / self.sigma**2 * g, 0.0)
        return shape, dshape

    def unit_area(self) -> float:
        """Integral of the unit-amplitude in-phase envelope."""
        from scipy.special import erf

        mid = self.duration / 2
        s = self.sigma
        return s * np.sqrt(2 * np.pi) * erf(mid / (np.sqrt(2) * s)) - self.duration * np.exp(-(mid**2) / (2 * s**2))

    def complex_envelope(self, t) -> np.ndarray:
        """``Omega_x + i Omega_y`` including the drive phase."""
        shape, dshape = self._gauss(t)
        base = self.amplitude * (shape + 1j * self.drag_scale * dshape)
        return np.exp(1j * self.phase) * base

    def omega(self, t) -> tuple[np.ndarray, np.ndarray]:
        z = self.complex_envelope(t)
        return z.real, z.imag

    def sample_times(self) -> np.ndarray:
        n = int(round(self.duration / self.dt))
        return np.arange(n + 1) * self.dt

    def samples(self) -> np.ndarray:
        """``(n, 3)`` array of ``(t, Omega_x, Omega_y)`` at the sample grid."""
        t = self.sample_times()
        ox, oy = self.omega(t)
        return np.column_stack([t, ox, oy])

    def with_phase(self, phase: float) -> "PulseSchedule":
        return replace(self, phase=phase)

    def for_primitive(self, name: str) -> "PulseSchedule":
        return self.with_phase(PRIMITIVE_PHASES[name])


def nominal_amplitude(duration: float, angle: float = np.pi / 2, sigma_fraction: float = 0.25) -> float:
    """Amplitude whose envelope area equals the rotation ``angle``."""
    probe = PulseSchedule(duration, 1.0, sigma_fraction=sigma_fraction)
    return angle / probe.unit_area()


def gaussian_pulse(duration: float, alpha: float = 0.0, anharmonicity: float = -2 * np.pi * 300e6, **kw) -> PulseSchedule:
    return PulseSchedule(duration, nominal_amplitude(duration, sigma_fraction=kw.get("sigma_fraction", 0.25)), alpha, anharmonicity, **kw)


def export_pulse_csv(pulse: PulseSchedule, path: str | Path) -> Path:
    """Columns ``t_ns, omega_x, omega_y`` (rad/s)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "omega_x", "omega_y"])
        for t, ox, oy in pulse.samples():
            w.writerow([repr(float(t * 1e9)), repr(float(ox)), repr(float(oy))])
    return path


def import_pulse_csv(path: str | Path) -> np.ndarray:
    """``(n, 3)`` array of ``(t_seconds, Omega_x, Omega_y)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    data[:, 0] *= 1e-9
    return data
