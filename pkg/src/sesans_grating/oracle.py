"""Brute-force wave-packet oracle.

Builds the transverse Gaussian packet from its momentum distribution,
passes it through the phase-object grating and evaluates the echo
polarization from first principles, without using any of the closed forms
in :mod:`sesans_grating.models`:

* single-path: ``sum_q |f(q)|^2 cos(q xi)`` averaged over impact parameters;
* two-path (entangled): spinor wave function whose momentum-transfer
  components carry ``|chi_{kappa xi}>``, projected on ``sigma^y``;
* control: the same two-path pipeline with the spinor fixed at the mean
  momentum (an un-entangled packet).

Convolutions in momentum space are evaluated with FFTs on a periodic box
in ``y`` whose cells are aligned with the grating walls whenever the
geometry allows it.  Every result is computed twice, at the requested grid
and at double density, and the call fails if the two differ by more than
the grid tolerance.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import ConvergenceError, GridError
from .grating import GratingSpec, transmission
from .instrument import CODATA
from .models import WavePacketSpec

SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class BeamProfile:
    """Uniform impact-parameter distribution of total width ``width_nm``."""

    width_nm: float
    n_impact_samples: int = 16

    def __post_init__(self):
        from .errors import ValidationError

        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        if not self.width_nm > 0:
            out.append(f"beam: width_nm must be > 0 (got {self.width_nm})")
        if int(self.n_impact_samples) != self.n_impact_samples or self.n_impact_samples < 16:
            out.append(f"beam: n_impact_samples must be an integer >= 16 (got {self.n_impact_samples})")
        return out

    def impact_parameters(self) -> np.ndarray:
        """Stratified (mid-stratum) samples across the beam, centred on 0."""
        n = int(self.n_impact_samples)
        return -0.5 * self.width_nm + (np.arange(n) + 0.5) * self.width_nm / n

    @classmethod
    def covering(cls, packet: WavePacketSpec, g: GratingSpec, xi_nm: float = 0.0,
                 factor: float = 2.0, n_impact_samples: int = 16) -> BeamProfile:
        """Beam ``factor`` times wider than the largest of packet, period and
        ``xi``, rounded up to whole periods."""
        p = g.period_nm
        widest = max(packet.delta_nm, p, abs(xi_nm))
        return cls(math.ceil(factor * widest / p) * p, n_impact_samples)


@dataclass(frozen=True)
class Spinor:
    """Spin state in the ``x`` basis."""

    up_x: complex
    down_x: complex

    def norm(self) -> float:
        return math.sqrt(abs(self.up_x) ** 2 + abs(self.down_x) ** 2)

    def sigma_y(self, ket: Spinor | None = None) -> complex:
        """Matrix element ``<self| sigma^y |ket>`` (expectation value when ``ket`` is None)."""
        ket = self if ket is None else ket
        return (1j * self.up_x.conjugate() * ket.down_x
                - 1j * self.down_x.conjugate() * ket.up_x)


def _spinor_components(phase):
    """x-basis components of ``|chi_theta> = (e^{-i theta/2}|up> - i e^{i theta/2}|down>)/sqrt 2``."""
    half = 0.5 * np.asarray(phase)
    return SQRT_HALF * np.exp(-1j * half), -1j * SQRT_HALF * np.exp(1j * half)


def _sigma_y_density(up, down):
    # Phi^dagger sigma^y Phi with sigma^y = [[0, i], [-i, 0]] in the x basis
    return -2.0 * np.imag(np.conj(up) * down)


def entangled_state(k, xi) -> Spinor:
    """Spinor ``|chi_{k.xi}>`` for wave vector ``k`` and spin echo vector ``xi``.

    ``k`` is ``k_y`` or ``(k_x, k_y, k_z)``; ``xi`` is ``xi_y`` or
    ``(xi_y, xi_z)``.  Units must be reciprocal (nm^-1 and nm).
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    ky, kz = (k[0], 0.0) if k.size == 1 else (k[1], k[2])
    xy, xz = (xi[0], 0.0) if xi.size == 1 else (xi[0], xi[1])
    up, down = _spinor_components(ky * xy + kz * xz)
    return Spinor(complex(up), complex(down))


def dispersion(k) -> float:
    """Free-neutron angular frequency ``hbar |k|^2 / 2m`` (rad/s) for ``k`` in nm^-1."""
    k2 = float(np.sum(np.square(k)))
    return CODATA.hbar * k2 * 1e18 / (2 * CODATA.neutron_mass_kg)


@dataclass(frozen=True)
class QuadratureGrid:
    """Grid controls for the oracle.

    ``samples_per_period`` sets the ``y`` spacing (``dy = p / M``, with ``M``
    bumped up to align cells with the walls and with ``xi/2`` when those
    are rational multiples of the period).  The box holds the beam plus
    ``n_sigma/2`` packet widths on each side, is padded to a power of two,
    and the incident momenta span ``+-n_sigma / Delta``.  ``n_k`` is the
    number of nodes of the direct momentum quadrature in
    :func:`scattering_amplitude`.
    """

    samples_per_period: int = 2048
    n_sigma: float = 8.0
    n_k: int = 1024
    tolerance: float = 5e-3
    min_points: int = 256

    def __post_init__(self):
        if self.samples_per_period < 16:
            raise ValueError("samples_per_period must be >= 16")
        if self.n_k < 256 or self.n_k & (self.n_k - 1):
            raise ValueError("n_k must be a power of two >= 256")
        if self.min_points < 256 or self.min_points & (self.min_points - 1):
            raise ValueError("min_points must be a power of two >= 256")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.n_sigma < 6:
            raise ValueError("n_sigma must cover at least 6 standard deviations")

    def scaled(self, factor: float) -> QuadratureGrid:
        n_k = 1 << max(8, round(math.log2(self.n_k * factor)))
        return replace(self, samples_per_period=max(16, round(self.samples_per_period * factor)),
                       n_k=n_k)

    def refined(self) -> QuadratureGrid:
        return replace(self, samples_per_period=2 * self.samples_per_period, n_k=2 * self.n_k)


DEFAULT_GRID = QuadratureGrid()


def _rational(x: float, max_den: int) -> int | None:
    fr = Fraction(x).limit_denominator(max_den)
    if abs(float(fr) - x) <= 1e-12 * max(1.0, abs(x)):
        return fr.denominator
    return None


def _cells_per_period(g: GratingSpec, xi: float, m0: int) -> int:
    den = 1
    for frac in (g.wall_nm / g.period_nm, 0.5 * xi / g.period_nm):
        d = _rational(frac, m0)
        if d is None:
            continue
        lcm = den * d // math.gcd(den, d)
        if lcm <= m0:
            den = lcm
    return math.ceil(m0 / den) * den


def required_periods(g: GratingSpec, half_extent_nm: float) -> int:
    """Smallest ``n_periods`` whose aperture covers ``[-half_extent, half_extent]``."""
    n = 1
    while True:
        lo, hi = replace(g, n_periods=n).aperture_nm
        if lo <= -half_extent_nm and hi >= half_extent_nm:
            return n
        n += 1


def _reach(packet: WavePacketSpec, grid: QuadratureGrid, xi: float, t_s: float) -> float:
    return 0.5 * grid.n_sigma * _spread_width(packet, t_s) + abs(xi)


def fit_aperture(g: GratingSpec, packet: WavePacketSpec, beam: BeamProfile, xi_nm: float,
                 grid: QuadratureGrid = DEFAULT_GRID, t_s: float = 0.0) -> GratingSpec:
    """Copy of ``g`` with enough periods for the oracle at this ``xi`` (never fewer than given)."""
    need = required_periods(g, 0.5 * beam.width_nm + _reach(packet, grid, xi_nm, t_s))
    return g if g.n_periods >= need else replace(g, n_periods=need)


def _spread_width(packet: WavePacketSpec, t_s: float) -> float:
    if not t_s:
        return packet.delta_nm
    d_m = packet.delta_nm * 1e-9
    return packet.delta_nm * math.hypot(1.0, 2 * CODATA.hbar * t_s / (CODATA.neutron_mass_kg * d_m**2))


class _Box:
    """Periodic y box with cell centres ``y = y_first + i dy`` and FFT momenta ``k``."""

    def __init__(self, g: GratingSpec, phi: float, packet: WavePacketSpec, beam: BeamProfile,
                 xi: float, grid: QuadratureGrid, t_s: float):
        if packet.is_plane_wave:
            raise ValueError("the oracle needs a finite packet width")
        p = g.period_nm
        m = _cells_per_period(g, xi, grid.samples_per_period)
        self.dy = dy = p / m
        half = 0.5 * beam.width_nm + _reach(packet, grid, xi, t_s)
        ap_lo, ap_hi = g.aperture_nm
        if ap_lo > -half or ap_hi < half:
            raise GridError(f"grating aperture {g.n_periods} periods is too small for this packet/beam; "
                            f"need n_periods >= {required_periods(g, half)}")
        n = grid.min_points
        while n * dy < 2 * half:
            n *= 2
        self.n = n
        # first cell edge sits on a wall edge (-a mod dy)
        start = -g.a_nm + math.floor((-0.5 * n * dy + g.a_nm) / dy) * dy
        self.y = start + (np.arange(n) + 0.5) * dy
        self.k = 2 * np.pi * np.fft.fftfreq(n, dy)
        inside = (self.y > ap_lo) & (self.y <= ap_hi)
        self.t = np.where(inside, transmission(g, phi, self.y), 0.0)
        self.packet = packet
        self.grid = grid
        self.t_s = t_s

    def packet_at(self, y0: float) -> np.ndarray:
        """``psi(y - y0) = int dk g_y(k) exp(i k (y - y0))`` built on the box momenta."""
        delta = self.packet.delta_nm
        k = self.k
        gk = math.sqrt(delta / math.sqrt(2 * math.pi)) * np.exp(-(delta * k) ** 2 / 4)
        gk[np.abs(k) > self.grid.n_sigma / delta] = 0.0
        phase = k * (self.y[0] - y0)
        if self.t_s:
            phase = phase - CODATA.hbar * (k * 1e9) ** 2 / (2 * CODATA.neutron_mass_kg) * self.t_s
        dk = 2 * np.pi / (self.n * self.dy)
        return self.n * dk * np.fft.ifft(gk * np.exp(1j * phase))


def _check_inputs(g, packet, beam, xi):
    widest = max(packet.delta_nm, g.period_nm, abs(xi))
    if beam.width_nm <= widest:
        warnings.warn(f"beam width {beam.width_nm:g} nm <= max(Delta, p, xi) = {widest:g} nm; "
                      "the wide-beam approximation does not hold", RuntimeWarning, stacklevel=3)
    if packet.k0[2] * g.period_nm < 100:
        warnings.warn("k0z is not much larger than 1/p; the k'_z ~ k0z approximation is poor",
                      RuntimeWarning, stacklevel=3)


def _converged(evaluate, grid: QuadratureGrid, what: str) -> float:
    coarse = evaluate(grid)
    fine = evaluate(grid.refined())
    if abs(fine - coarse) > grid.tolerance:
        raise ConvergenceError(
            f"{what}: grid doubling changed the result from {coarse:.6g} to {fine:.6g} "
            f"(tolerance {grid.tolerance:g})", coarse, fine)
    return fine


def _check_norm(norm_out, norm_in, tol, what):
    if abs(norm_out / norm_in - 1.0) > tol:
        raise ConvergenceError(f"{what}: outgoing norm {norm_out:.6g} differs from incident "
                               f"{norm_in:.6g}; the packet leaves the box or aperture")


def exit_wave_amplitude(packet: WavePacketSpec, g: GratingSpec, phi: float, y0: float,
                        beam: BeamProfile | None = None, grid: QuadratureGrid = DEFAULT_GRID,
                        t_s: float = 0.0):
    """Scattering amplitude on the box momenta via the convolution theorem.

    Returns ``(q, f)`` with ``f(q) = (1/2 pi) int dy T(y) psi(y - y0) exp(i q y)``,
    which equals ``int dk g_y(k) exp(-i k y0) F(k + q)``.  ``q`` is sorted.
    """
    beam = beam or BeamProfile(g.period_nm, 16)
    box = _Box(g, phi, packet, BeamProfile(beam.width_nm + 2 * abs(y0), 16), 0.0, grid, t_s)
    f = np.fft.fft(box.t * box.packet_at(y0)) * box.dy / (2 * np.pi)
    # numpy bin k carries exp(-i k y); q = -k, and restore the absolute origin
    f = f * np.exp(-1j * box.k * box.y[0])
    q = -box.k
    order = np.argsort(q)
    return q[order], f[order]


def _aperture_transform(g: GratingSpec, phi: float, kappa: np.ndarray) -> np.ndarray:
    """``F(kappa) = (1/2 pi) int_aperture exp(i kappa y) T(y) dy`` in closed form."""
    lo, hi = g.aperture_nm
    n = g.n_periods
    j0 = -(n // 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        frame = np.where(np.abs(kappa) * (hi - lo) < 1e-12, hi - lo,
                         (np.exp(1j * kappa * hi) - np.exp(1j * kappa * lo)) / (1j * kappa))
        theta = kappa * g.period_nm
        s = np.sin(0.5 * theta)
        small = np.abs(s) < 1e-9
        dirichlet = np.where(small, n * np.cos(0.5 * n * theta) / np.cos(0.5 * theta),
                             np.sin(0.5 * n * theta) / np.where(small, 1.0, s))
    walls = np.exp(1j * theta * (j0 + 0.5 * (n - 1))) * dirichlet
    wall = g.wall_nm * np.sinc(kappa * g.a_nm / np.pi)
    return (frame + (np.exp(1j * phi) - 1.0) * walls * wall) / (2 * np.pi)


def scattering_amplitude(packet: WavePacketSpec, g: GratingSpec, phi: float, y0: float, q_y,
                         grid: QuadratureGrid = DEFAULT_GRID):
    """``f(q) = int dk g_y(k) exp(-i k y0) F(k + q)`` by direct quadrature over ``k``.

    ``F`` is the transform of the finite (``n_periods``) grating.  The
    momentum integral uses ``grid.n_k`` trapezoid nodes on ``+-n_sigma/Delta``
    and is repeated with twice as many; a relative change above the grid
    tolerance raises ConvergenceError.
    """
    if packet.is_plane_wave:
        raise ValueError("scattering_amplitude needs a finite packet width")
    q = np.atleast_1d(np.asarray(q_y, dtype=float))
    delta = packet.delta_nm

    def evaluate(n_k):
        k = np.linspace(-grid.n_sigma / delta, grid.n_sigma / delta, n_k)
        w = np.full(n_k, k[1] - k[0])
        w[[0, -1]] *= 0.5
        gk = math.sqrt(delta / math.sqrt(2 * math.pi)) * np.exp(-(delta * k) ** 2 / 4)
        out = np.empty(q.size, dtype=complex)
        for i, qi in enumerate(q):
            out[i] = np.sum(w * gk * np.exp(-1j * k * y0) * _aperture_transform(g, phi, k + qi))
        return out

    coarse = evaluate(grid.n_k)
    fine = evaluate(2 * grid.n_k)
    scale = max(np.max(np.abs(fine)), 1e-300)
    change = np.max(np.abs(fine - coarse)) / scale
    if change > grid.tolerance:
        raise ConvergenceError(f"scattering amplitude: doubling n_k changed f by {change:.3g} "
                               f"(relative, tolerance {grid.tolerance:g})", coarse, fine)
    return fine if np.ndim(q_y) else complex(fine[0])


def semiclassical_polarization_numeric(packet: WavePacketSpec, g: GratingSpec, phi: float,
                                       xi_nm: float, beam: BeamProfile,
                                       grid: QuadratureGrid = DEFAULT_GRID, t_s: float = 0.0) -> float:
    """Single-path echo polarization from ``|f(q)|^2``.

    ``P = sum_y0 sum_q |f(q; y0)|^2 cos(q xi) / sum_y0 sum_q |f(q; y0)|^2``
    with the impact parameters of ``beam``.
    """
    _check_inputs(g, packet, beam, xi_nm)

    def evaluate(gr):
        box = _Box(g, phi, packet, beam, xi_nm, gr, t_s)
        weight = np.cos(box.k * xi_nm)
        num = den = norm_in = 0.0
        for y0 in beam.impact_parameters():
            psi = box.packet_at(y0)
            intensity = np.abs(np.fft.fft(box.t * psi)) ** 2
            num += np.dot(intensity, weight)
            den += intensity.sum()
            norm_in += box.n * np.sum(np.abs(psi) ** 2)
        _check_norm(den, norm_in, gr.tolerance, "single-path oracle")
        return num / den

    return _converged(evaluate, grid, "single-path oracle")


def quantum_polarization_numeric(packet: WavePacketSpec, g: GratingSpec, phi: float,
                                 xi_nm: float, beam: BeamProfile,
                                 grid: QuadratureGrid = DEFAULT_GRID, t_s: float = 0.0) -> float:
    """Two-path (entangled) echo polarization.

    Each momentum-transfer component ``kappa`` of the scattered wave carries
    the spinor ``|chi_{kappa xi}>`` left by the disentangler; the spinor wave
    function is rebuilt in ``y`` and ``sigma^y`` is integrated over ``y`` and
    the impact parameters, then divided by the total norm.
    """
    _check_inputs(g, packet, beam, xi_nm)

    def evaluate(gr):
        box = _Box(g, phi, packet, beam, 0.5 * xi_nm, gr, t_s)
        spectrum = np.fft.fft(box.t)
        kappa = -box.k  # numpy bin k holds F(kappa = -k)
        w_up, w_down = _spinor_components(kappa * xi_nm)
        t_up = np.fft.ifft(spectrum * w_up)
        t_down = np.fft.ifft(spectrum * w_down)
        num = den = norm_in = 0.0
        for y0 in beam.impact_parameters():
            psi = box.packet_at(y0)
            up, down = t_up * psi, t_down * psi
            num += _sigma_y_density(up, down).sum()
            den += np.sum(np.abs(up) ** 2 + np.abs(down) ** 2)
            norm_in += np.sum(np.abs(psi) ** 2)
        _check_norm(den, norm_in, gr.tolerance, "two-path oracle")
        return num / den

    return _converged(evaluate, grid, "two-path oracle")


def unentangled_control(packet: WavePacketSpec, g: GratingSpec, phi: float, xi_nm: float,
                        beam: BeamProfile, grid: QuadratureGrid = DEFAULT_GRID,
                        t_s: float = 0.0) -> float:
    """Two-path pipeline with the incoming spinor fixed at ``|chi_{k0 xi}>``.

    The outgoing components then carry ``|chi_{(k0 - k') xi}>``, a function of
    the outgoing momentum only, so space and spin factorise.
    """
    _check_inputs(g, packet, beam, xi_nm)
    k0y = packet.k0[1]

    def evaluate(gr):
        box = _Box(g, phi, packet, beam, 0.5 * xi_nm, gr, t_s)
        w_up, w_down = _spinor_components((k0y - box.k) * xi_nm)
        num = den = norm_in = 0.0
        for y0 in beam.impact_parameters():
            psi = box.packet_at(y0)
            spectrum = np.fft.fft(box.t * psi)
            up, down = np.fft.ifft(spectrum * w_up), np.fft.ifft(spectrum * w_down)
            num += _sigma_y_density(up, down).sum()
            den += np.sum(np.abs(up) ** 2 + np.abs(down) ** 2)
            norm_in += np.sum(np.abs(psi) ** 2)
        _check_norm(den, norm_in, gr.tolerance, "control oracle")
        return num / den

    return _converged(evaluate, grid, "control oracle")
