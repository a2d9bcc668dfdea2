"""Periodic rectangular phase grating.

One period is the cell ``(-a, b]``: a wall of width ``2a`` centred on the
origin imparts the phase ``phi``, the channel ``(a, b]`` is transparent.
All lengths are in nm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import QuadratureError, ValidationError

#: scattering length density of silicon [nm^-2]
SLD_SILICON = 2.06e-4


@dataclass(frozen=True)
class GratingSpec:
    a_nm: float
    b_nm: float
    depth_nm: float = 1.0e4
    sld_per_nm2: float = SLD_SILICON
    n_periods: int = 64  # finite aperture, only used by the wave-packet oracle

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        if not (self.b_nm > self.a_nm >= 0):
            out.append(f"grating: need b > a >= 0 (got a={self.a_nm}, b={self.b_nm})")
        if not self.depth_nm > 0:
            out.append(f"grating: depth_nm must be > 0 (got {self.depth_nm})")
        if not self.sld_per_nm2 >= 0:
            out.append(f"grating: sld_per_nm2 must be >= 0 (got {self.sld_per_nm2})")
        if int(self.n_periods) != self.n_periods or self.n_periods < 1:
            out.append(f"grating: n_periods must be a positive integer (got {self.n_periods})")
        return out

    @classmethod
    def from_period(cls, period_nm: float, channel_nm: float, **kw) -> GratingSpec:
        """Build from period and channel width (wall width = period - channel)."""
        a = 0.5 * (period_nm - channel_nm)
        return cls(a_nm=a, b_nm=a + channel_nm, **kw)

    @property
    def period_nm(self) -> float:
        return self.a_nm + self.b_nm

    @property
    def wall_nm(self) -> float:
        return 2.0 * self.a_nm

    @property
    def channel_nm(self) -> float:
        return self.b_nm - self.a_nm

    @property
    def aperture_nm(self) -> tuple[float, float]:
        """Extent of the finite grating: ``n_periods`` whole cells around 0."""
        m = self.n_periods // 2
        p = self.period_nm
        return (-self.a_nm - m * p, -self.a_nm + (self.n_periods - m) * p)


#: 2 um period silicon grating, 560 nm channels, 10 um deep
SILICON_GRATING = GratingSpec.from_period(2000.0, 560.0, depth_nm=1.0e4, sld_per_nm2=SLD_SILICON)


def _reduce(g: GratingSpec, y):
    # maps y into the canonical cell (-a, b]
    p = g.period_nm
    return g.b_nm - np.mod(g.b_nm - np.asarray(y, dtype=float), p)


def transmission(g: GratingSpec, phi: float, y):
    """Complex transmission ``T(y)``: ``exp(i phi)`` on walls, 1 in channels."""
    y_red = _reduce(g, y)
    out = np.where(y_red <= g.a_nm, np.exp(1j * phi), 1.0 + 0.0j)
    return out if out.ndim else complex(out)


def _breakpoints(g: GratingSpec, shift: float, lo: float, hi: float) -> np.ndarray:
    """Points in [lo, hi] where T(y) or T(y + shift) jumps."""
    p = g.period_nm
    pts = [lo, hi]
    for edge in (-g.a_nm, g.a_nm):
        for offset in (0.0, -shift):
            base = edge + offset
            k0 = math.floor((lo - base) / p)
            k1 = math.ceil((hi - base) / p)
            for k in range(k0, k1 + 1):
                y = base + k * p
                if lo < y < hi:
                    pts.append(y)
    return np.unique(np.asarray(pts))


def _panel_midpoint(g, phi, shift, edges, n_points):
    widths = np.diff(edges)
    widths = widths[widths > 0]
    starts = edges[:-1][np.diff(edges) > 0]
    total = widths.sum()
    counts = np.maximum(1, np.round(n_points * widths / total).astype(int))
    h = np.repeat(widths / counts, counts)
    first = np.repeat(starts, counts)
    idx = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    y = first + (idx + 0.5) * h
    integrand = np.conj(transmission(g, phi, y)) * transmission(g, phi, y + shift)
    return float(np.sum(integrand.real * h))


def autocorrelation(g: GratingSpec, phi: float, shift: float, n_points: int = 2**14,
                    rtol: float = 1e-8) -> float:
    """Normalised autocorrelation ``(1/p) Re int T*(y) T(y + shift) dy`` over one period.

    Computed by composite midpoint quadrature of the transmission itself on
    panels split at every jump of the integrand, with a doubling check.
    Raises QuadratureError if the two resolutions disagree by more than ``rtol``.
    """
    p = g.period_nm
    edges = _breakpoints(g, float(shift), -0.5 * p, 0.5 * p)
    coarse = _panel_midpoint(g, phi, shift, edges, n_points) / p
    fine = _panel_midpoint(g, phi, shift, edges, 2 * n_points) / p
    err = abs(fine - coarse)
    if err > rtol * max(1.0, abs(fine)):
        raise QuadratureError(
            f"autocorrelation quadrature did not converge: |I(2n) - I(n)| = {err:.3e}", err)
    return fine


def fourier_coefficient(g: GratingSpec, phi: float, n):
    """Fourier coefficient ``c_n = (1/p) int_0^p T(y) exp(-2 pi i n y / p) dy``.

    Closed form: the wall is a centred box of width ``2a``, so
    ``c_n = delta_n0 + (exp(i phi) - 1) (2a/p) sinc(2 n a / p)``.
    Vectorised over ``n``.
    """
    n = np.asarray(n)
    frac = g.wall_nm / g.period_nm
    c = (np.exp(1j * phi) - 1.0) * frac * np.sinc(n * frac) + (n == 0)
    return c if c.ndim else complex(c)


def effective_grating(g: GratingSpec, tilt_rad: float) -> GratingSpec:
    """Grating seen along the encoding direction when its channels make the
    angle ``tilt_rad`` with that direction: period and channel both grow by
    ``1/sin(tilt)``."""
    if not 0.0 < tilt_rad <= 0.5 * math.pi:
        raise ValueError(f"tilt must lie in (0, pi/2], got {tilt_rad}")
    s = math.sin(tilt_rad)
    if s == 1.0:
        return g
    return replace(g, a_nm=g.a_nm / s, b_nm=g.b_nm / s)
