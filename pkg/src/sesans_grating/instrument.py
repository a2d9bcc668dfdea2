"""Time-of-flight SESANS instrument: kinematics, resolution, peak analysis.

Spin echo lengths are in nm, wavelengths in nm, so the spin echo
constant ``xi0`` is in nm^-1 (``xi = xi0 * lambda**2``).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants as sc
from scipy.interpolate import CubicSpline
from scipy.special import ndtr

from .errors import BandError, GridError, ValidationError
from .models import EchoPattern

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalConstants:
    neutron_mass_kg: float = sc.physical_constants["neutron mass"][0]
    planck_constant_Js: float = sc.h

    @property
    def hbar(self) -> float:
        return self.planck_constant_Js / (2 * math.pi)


CODATA = PhysicalConstants()


def spin_echo_constant(f_hz: float, arm_length_m: float, theta0_rad: float,
                       constants: PhysicalConstants = CODATA) -> float:
    """``xi0 = 2 m f L cot(theta0) / h`` in nm^-1."""
    if not (f_hz > 0 and arm_length_m > 0 and 0 < theta0_rad < math.pi / 2):
        raise ValueError("need f > 0, L > 0 and 0 < theta0 < pi/2")
    xi0_per_m = (2 * constants.neutron_mass_kg * f_hz * arm_length_m
                 / (math.tan(theta0_rad) * constants.planck_constant_Js))
    return xi0_per_m * 1e-9


@dataclass(frozen=True)
class InstrumentConfig:
    xi0_nm_per_nm2: float
    rf_frequency_hz: float = 2.0e6
    arm_length_m: float | None = None
    field_angle_rad: float = math.pi / 4
    lambda_band_nm: tuple[float, float] = (0.3, 1.3)
    tof_bin_nm: float = 0.0025

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        if not self.xi0_nm_per_nm2 > 0:
            out.append(f"instrument: xi0 must be > 0 (got {self.xi0_nm_per_nm2})")
        if not 0 < self.field_angle_rad < math.pi / 2:
            out.append(f"instrument: field angle must lie in (0, pi/2) (got {self.field_angle_rad})")
        lo, hi = self.lambda_band_nm
        if not 0 < lo < hi:
            out.append(f"instrument: need 0 < lambda_min < lambda_max (got {lo}, {hi})")
        if not self.tof_bin_nm > 0:
            out.append(f"instrument: tof_bin_nm must be > 0 (got {self.tof_bin_nm})")
        if self.arm_length_m is not None and not self.arm_length_m > 0:
            out.append(f"instrument: arm_length_m must be > 0 (got {self.arm_length_m})")
        return out

    @classmethod
    def from_geometry(cls, f_hz: float, arm_length_m: float, theta0_rad: float = math.pi / 4,
                      **kw) -> InstrumentConfig:
        xi0 = spin_echo_constant(f_hz, arm_length_m, theta0_rad)
        return cls(xi0, rf_frequency_hz=f_hz, arm_length_m=arm_length_m,
                   field_angle_rad=theta0_rad, **kw)

    @property
    def xi_band_nm(self) -> tuple[float, float]:
        lo, hi = self.lambda_band_nm
        return (self.xi_of_lambda(lo), self.xi_of_lambda(hi))

    def xi_of_lambda(self, lambda_nm):
        return self.xi0_nm_per_nm2 * np.square(lambda_nm)

    def lambda_of_xi(self, xi_nm):
        return np.sqrt(np.asarray(xi_nm, dtype=float) / self.xi0_nm_per_nm2)

    def check_band(self, xi_nm) -> None:
        lo, hi = self.xi_band_nm
        xi = np.asarray(xi_nm, dtype=float)
        slack = 1e-9 * hi
        if xi.size and (xi.min() < lo - slack or xi.max() > hi + slack):
            raise BandError(
                f"spin echo length outside the admissible interval [{lo:.6g}, {hi:.6g}] nm "
                f"(wavelength band {self.lambda_band_nm} nm)", (lo, hi))


def xi_of_lambda(inst: InstrumentConfig, lambda_nm):
    return inst.xi_of_lambda(lambda_nm)


def lambda_of_xi(inst: InstrumentConfig, xi_nm):
    return inst.lambda_of_xi(xi_nm)


@dataclass(frozen=True)
class ResolutionParams:
    """Standard deviations entering the spin echo length resolution.

    Defaults are the standard instrument values: beam divergence, channel misplacement,
    TOF-bin wavelength spread, and the linear pulse-width model
    ``delta_lambda = a_lambda + b_lambda * lambda``.
    """

    delta_theta_rad: float = 0.75e-3
    delta_J_nm: float = 10.0
    delta_b_nm: float = 1.0e-3
    a_lambda_nm: float = 3.33e-4
    b_lambda: float = 1.01e-4

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        return [f"resolution: {k} must be >= 0 (got {v})"
                for k, v in vars(self).items() if not v >= 0]

    @classmethod
    def zero(cls) -> ResolutionParams:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def scaled(self, s: float) -> ResolutionParams:
        return ResolutionParams(*(s * v for v in vars(self).values()))

    @property
    def is_zero(self) -> bool:
        return not any(vars(self).values())


def resolution_sigma(inst: InstrumentConfig, res: ResolutionParams, xi_nm):
    """Gaussian standard deviation of the spin echo length at ``xi``.

    ``(dxi/xi)^2 = 4 dtheta^2 / sin^2(2 theta0) + 4 (dlambda^2 + db^2) / lambda^2 + (dJ/xi)^2``
    """
    xi = np.asarray(xi_nm, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("resolution_sigma needs xi > 0")
    lam2 = xi / inst.xi0_nm_per_nm2
    dlam = res.a_lambda_nm + res.b_lambda * np.sqrt(lam2)
    rel2 = (4 * res.delta_theta_rad**2 / math.sin(2 * inst.field_angle_rad) ** 2
            + 4 * (dlam**2 + res.delta_b_nm**2) / lam2
            + res.delta_J_nm**2 / xi**2)
    out = xi * np.sqrt(rel2)
    return out if out.ndim else float(out)


def _phi_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def convolve_resolution(pattern: EchoPattern, inst: InstrumentConfig, res: ResolutionParams,
                        n_sigma: float = 6.0) -> EchoPattern:
    """Smear a pattern with a Gaussian of ``xi``-dependent width.

    Each output point uses its own ``sigma(xi)``; the linear interpolant of
    the samples is integrated exactly against the kernel on the truncated
    ``+-n_sigma`` window, and the kernel is renormalised on that window
    (and on the pattern's extent near its ends).
    """
    x, y = pattern.xi_nm, pattern.polarization
    label = pattern.label and f"{pattern.label}_smeared"
    if res.is_zero:
        return pattern.with_values(y.copy(), label=label)
    sig = np.atleast_1d(resolution_sigma(inst, res, x))
    slope = np.diff(y) / np.diff(x)
    out = np.empty_like(y)
    worst = None
    for j, (mu, s) in enumerate(zip(x, sig)):
        lo, hi = mu - n_sigma * s, mu + n_sigma * s
        i0 = max(np.searchsorted(x, lo, side="right") - 1, 0)
        i1 = min(np.searchsorted(x, hi, side="left"), x.size - 1)
        if i1 <= i0:
            out[j] = y[j]
            continue
        spacing = np.max(x[i0 + 1:i1 + 1] - x[i0:i1])
        if spacing > s / 4 and (worst is None or s / 4 < worst[1]):
            worst = (mu, s / 4, spacing)
        u = np.clip(x[i0:i1], lo, hi)
        v = np.clip(x[i0 + 1:i1 + 1], lo, hi)
        zu, zv = (u - mu) / s, (v - mu) / s
        line_at_mu = y[i0:i1] + slope[i0:i1] * (mu - x[i0:i1])
        mass = ndtr(zv) - ndtr(zu)
        num = np.sum(line_at_mu * mass + slope[i0:i1] * s * (_phi_pdf(zu) - _phi_pdf(zv)))
        out[j] = num / mass.sum()
    if worst is not None:
        mu, need, have = worst
        raise GridError(f"pattern grid too coarse for the resolution: spacing {have:.4g} nm near "
                        f"xi = {mu:.6g} nm, need <= {need:.4g} nm (sigma/4)")
    np.clip(out, y.min(), y.max(), out=out)
    return pattern.with_values(out, label=label)


@dataclass(frozen=True)
class PeakEstimate:
    order: int
    xi_peak_nm: float
    height: float
    width_nm: float


class Background:
    """Smooth background through the local minima between echo peaks.

    A not-a-knot cubic spline through the minima; evaluable (and
    extrapolated) at any ``xi``.
    """

    def __init__(self, xi_nm, values):
        self.xi_nm = np.asarray(xi_nm, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._spline = CubicSpline(self.xi_nm, self.values, bc_type="not-a-knot")

    def __call__(self, xi_nm):
        out = self._spline(np.asarray(xi_nm, dtype=float))
        return out if np.ndim(out) else float(out)


def _window_indices(x, lo, hi):
    return np.nonzero((x >= lo) & (x <= hi))[0]


def fit_background(pattern: EchoPattern, period_nm: float) -> Background:
    """Background fitted from the minimum in each window ``[n p, (n+1) p]``.

    A window minimum sitting on the first or last sample of the pattern is
    not a true minimum (the flank is cut off) and is dropped.
    """
    x, y = pattern.xi_nm, pattern.polarization
    if x[-1] - x[0] < 2 * period_nm:
        raise ValueError("fit_background needs a pattern spanning at least two periods")
    n_lo = math.floor(x[0] / period_nm)
    n_hi = math.floor(x[-1] / period_nm)
    knots = []
    for n in range(n_lo, n_hi + 1):
        idx = _window_indices(x, n * period_nm, (n + 1) * period_nm)
        if idx.size < 3:
            continue
        i = idx[np.argmin(y[idx])]
        if i in (0, x.size - 1):
            continue
        knots.append(i)
    if len(knots) < 2:
        raise ValueError(f"fit_background found {len(knots)} local minima, need at least 2")
    knots = np.unique(knots)
    return Background(x[knots], y[knots])


def find_peaks(pattern: EchoPattern, period_nm: float,
               background: Background | None = None) -> list[PeakEstimate]:
    """One estimate per echo order ``n >= 1`` from the window ``[n p - p/2, n p + p/2]``.

    Height is the sampled maximum; width is the full width at half
    prominence above the background (fitted here if not supplied, falling
    back to the window minimum).
    """
    x, y = pattern.xi_nm, pattern.polarization
    if x[-1] - x[0] < period_nm:
        raise ValueError("find_peaks needs a pattern spanning at least one period")
    if background is None:
        try:
            background = fit_background(pattern, period_nm)
        except ValueError:
            background = None
    peaks = []
    for n in range(max(1, math.ceil(x[0] / period_nm - 0.5)), math.floor(x[-1] / period_nm + 0.5) + 1):
        idx = _window_indices(x, (n - 0.5) * period_nm, (n + 0.5) * period_nm)
        if idx.size == 0:
            warnings.warn(f"echo order {n}: no samples in window, skipped", stacklevel=2)
            continue
        i = idx[np.argmax(y[idx])]
        if i in (0, x.size - 1):
            log.debug("echo order %d: maximum on the pattern edge, skipped", n)
            continue
        height = float(y[i])
        base = background(x[i]) if background is not None else float(y[idx].min())
        level = base + 0.5 * (height - base)
        peaks.append(PeakEstimate(n, float(x[i]), height, _width_at(x, y, i, level, idx)))
    return peaks


def _width_at(x, y, i, level, idx):
    lo_bound, hi_bound = idx[0], idx[-1]
    left = right = None
    j = i
    while j > lo_bound and y[j - 1] >= level:
        j -= 1
    if j > lo_bound:
        left = x[j - 1] + (level - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    j = i
    while j < hi_bound and y[j + 1] >= level:
        j += 1
    if j < hi_bound:
        right = x[j] + (y[j] - level) * (x[j + 1] - x[j]) / (y[j] - y[j + 1])
    if left is None or right is None:
        return math.nan
    return float(right - left)


def normalize_peaks(pattern: EchoPattern, background: Background) -> EchoPattern:
    """Remove the sloping background: ``(P - BG) / (1 - BG)``.

    The baseline becomes 0 and undamped peaks sit at 1.  Where the
    background has no contrast (``BG == 1``) the pattern is returned as is.
    """
    bg = np.asarray(background(pattern.xi_nm))
    span = 1.0 - bg
    flat = np.abs(span) < 1e-12
    out = np.where(flat, pattern.polarization,
                   (pattern.polarization - bg) / np.where(flat, 1.0, span))
    return pattern.with_values(np.clip(out, -1.0, 1.0), label=pattern.label and f"{pattern.label}_normalized")
