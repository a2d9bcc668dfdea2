"""Echo polarization of neutron spin echo SANS from periodic phase gratings.

Closed forms for the single-path (damped) and two-path (Delta-independent)
models, a wave-packet oracle that derives both from first principles, and
the time-of-flight instrument model: background, resolution smearing and
peak extraction.
"""
__version__ = "0.1.0"

from .errors import (BandError, ConfigParseError, ConvergenceError, CurveError, ExportError,  # noqa: E402
                     GridError, QuadratureError, SesansError, ValidationError)
from .grating import (SILICON_GRATING, SLD_SILICON, GratingSpec, autocorrelation,  # noqa: E402
                      effective_grating, fourier_coefficient, transmission)
from .instrument import (CODATA, InstrumentConfig, PeakEstimate, PhysicalConstants,  # noqa: E402
                         ResolutionParams, convolve_resolution, find_peaks, fit_background,
                         lambda_of_xi, normalize_peaks, resolution_sigma, spin_echo_constant,
                         xi_of_lambda)
from .models import (PLANE_WAVE, EchoPattern, WavePacketSpec, background, damping,  # noqa: E402
                     fourier_series_polarization, plane_wave_polarization,
                     semiclassical_polarization, tof_pattern, tof_phase)
from .oracle import (BeamProfile, QuadratureGrid, Spinor, dispersion, entangled_state,  # noqa: E402
                     exit_wave_amplitude, fit_aperture, quantum_polarization_numeric,
                     scattering_amplitude, semiclassical_polarization_numeric, unentangled_control)
from .config import RunConfig, Sweep, load_config, parse_config  # noqa: E402
from .runner import PRESETS, RunResults, export_csv, load_preset, run  # noqa: E402
