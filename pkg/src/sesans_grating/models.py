"""Closed-form echo polarization for the single-path and two-path models.

The two-path (entangled) model predicts the bare grating autocorrelation
for any packet width; the single-path model multiplies it by the Gaussian
damping ``exp(-xi^2 / 2 Delta^2)``.  On a time-of-flight instrument the
wall phase and the spin echo length both change with wavelength, which is
handled by :func:`tof_pattern` and :func:`background`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .grating import GratingSpec, fourier_coefficient

if TYPE_CHECKING:
    from .instrument import InstrumentConfig

#: packet width of an infinite plane wave
PLANE_WAVE = math.inf


@dataclass(frozen=True)
class WavePacketSpec:
    """Transverse Gaussian packet.

    ``delta_nm`` sets the width: ``|psi(y)|^2 ~ exp(-2 y^2 / delta^2)``.
    ``PLANE_WAVE`` (``math.inf``) is the plane-wave limit.
    """

    delta_nm: float = PLANE_WAVE
    k0: tuple[float, float, float] = (0.0, 0.0, 2 * math.pi / 0.5)

    def __post_init__(self):
        from .errors import ValidationError

        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        if not self.delta_nm > 0:
            out.append(f"packet: delta_nm must be > 0 or infinite (got {self.delta_nm})")
        if len(self.k0) != 3:
            out.append("packet: k0 must have three components")
        else:
            if self.k0[1] != 0:
                out.append(f"packet: k0 y-component must be 0 (got {self.k0[1]})")
            if not self.k0[2] > 0:
                out.append(f"packet: k0 z-component must be > 0 (got {self.k0[2]})")
        return out

    @property
    def is_plane_wave(self) -> bool:
        return math.isinf(self.delta_nm)

    @classmethod
    def from_wavelength(cls, delta_nm: float, lambda_nm: float) -> WavePacketSpec:
        return cls(delta_nm=delta_nm, k0=(0.0, 0.0, 2 * math.pi / lambda_nm))


@dataclass
class EchoPattern:
    """Sampled ``P/P0`` against spin echo length (nm), ascending in ``xi``."""

    xi_nm: np.ndarray
    polarization: np.ndarray
    lambda_nm: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi_nm = np.asarray(self.xi_nm, dtype=float)
        self.polarization = np.asarray(self.polarization, dtype=float)
        if self.lambda_nm is not None:
            self.lambda_nm = np.asarray(self.lambda_nm, dtype=float)
            if self.lambda_nm.shape != self.xi_nm.shape:
                raise ValueError("lambda_nm and xi_nm differ in length")
        if self.xi_nm.shape != self.polarization.shape or self.xi_nm.ndim != 1:
            raise ValueError("xi_nm and polarization must be 1-D arrays of equal length")
        if np.any(np.diff(self.xi_nm) <= 0):
            raise ValueError("xi_nm must be strictly increasing")
        if np.any(np.abs(self.polarization) > 1 + 1e-9):
            raise ValueError("polarization outside [-1, 1]")

    def __len__(self):
        return self.xi_nm.size

    def with_values(self, polarization, label=None) -> EchoPattern:
        return EchoPattern(self.xi_nm, polarization, self.lambda_nm,
                           self.label if label is None else label, dict(self.meta))


def plane_wave_polarization(g: GratingSpec, phi, xi_nm):
    """Echo polarization of a plane wave (and of the two-path model).

    Piecewise-linear and ``p``-periodic in ``xi``: a linear drop up to
    ``min(2a, b-a)``, a plateau up to ``max(2a, b-a)``, then a linear rise
    back to 1 at ``xi = p``.  Broadcasts over ``phi`` and ``xi_nm``.
    """
    p = g.period_nm
    lo = min(g.wall_nm, g.channel_nm)
    hi = max(g.wall_nm, g.channel_nm)
    x = np.mod(np.abs(np.asarray(xi_nm, dtype=float)), p)
    slope = 2.0 * (1.0 - np.cos(phi)) / p
    out = np.where(x <= lo, 1.0 - slope * x,
                   np.where(x <= hi, 1.0 - slope * lo, 1.0 + slope * (x - p)))
    return out if out.ndim else float(out)


def damping(xi_nm, packet: WavePacketSpec):
    """Single-path damping ``G = exp(-xi^2 / (2 Delta^2))``; exactly 1 for a plane wave."""
    xi = np.asarray(xi_nm, dtype=float)
    if packet.is_plane_wave:
        out = np.ones_like(xi)
    else:
        out = np.exp(-xi**2 / (2.0 * packet.delta_nm**2))
    return out if out.ndim else float(out)


def semiclassical_polarization(g: GratingSpec, phi, xi_nm, packet: WavePacketSpec):
    """Single-path prediction: damping times the plane-wave autocorrelation."""
    return damping(xi_nm, packet) * plane_wave_polarization(g, phi, xi_nm)


def fourier_series_polarization(g: GratingSpec, phi, xi_nm, n_max: int):
    """Diffraction-order sum ``sum_{|n| <= n_max} |c_n|^2 cos(2 pi n xi / p)``.

    Independent route to the plane-wave curve via the grating orders.  The
    full-series normalisation ``sum |c_n|^2`` is exactly 1 for a unit-modulus
    transmission, so the truncated sum is not renormalised (that would add an
    ``O(1/n_max)`` bias).  Vectorised over ``xi_nm``; ``phi`` is a scalar.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(1, n_max + 1)
    w0 = abs(fourier_coefficient(g, phi, 0)) ** 2
    # |c_n| = |c_-n| for the centred wall
    wn = np.abs(fourier_coefficient(g, phi, n)) ** 2
    xi = np.atleast_1d(np.asarray(xi_nm, dtype=float))
    phase = 2 * np.pi * np.outer(np.mod(xi, g.period_nm), n) / g.period_nm
    out = w0 + 2.0 * np.cos(phase) @ wn
    return out if np.ndim(xi_nm) else float(out[0])


def tof_phase(g: GratingSpec, lambda_nm):
    """Phase picked up crossing a wall: ``rho * h * lambda`` (rad)."""
    return g.sld_per_nm2 * g.depth_nm * np.asarray(lambda_nm, dtype=float)


def tof_pattern(g: GratingSpec, inst: InstrumentConfig, xi_grid) -> EchoPattern:
    """Resolution-free TOF pattern: each ``xi`` is measured at ``lambda = sqrt(xi/xi0)``
    whose wall phase sets the local autocorrelation."""
    xi = np.asarray(xi_grid, dtype=float)
    inst.check_band(xi)
    lam = inst.lambda_of_xi(xi)
    pol = plane_wave_polarization(g, tof_phase(g, lam), xi)
    return EchoPattern(xi, np.atleast_1d(pol), lam, label="ideal_tof")


def background(g: GratingSpec, inst: InstrumentConfig, xi_nm):
    """Sloping TOF background: the plateau level of the pattern at the local phase.

    ``BG = 1 - (2 min(2a, b-a) / p) (1 - cos(rho h sqrt(xi / xi0)))``
    """
    xi = np.asarray(xi_nm, dtype=float)
    inst.check_band(xi)
    frac = 2.0 * min(g.wall_nm, g.channel_nm) / g.period_nm
    out = 1.0 - frac * (1.0 - np.cos(tof_phase(g, inst.lambda_of_xi(xi))))
    return out if out.ndim else float(out)
