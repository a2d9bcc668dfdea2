"""Run configuration: TOML grammar, defaults and validation.

Every table and key is optional; an empty file describes the 2 µm silicon
grating on the 2 MHz instrument with a plane-wave packet, the default
resolution parameters and the band-limited sweep.  See the README for the
full grammar.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigParseError, ValidationError
from .grating import SILICON_GRATING, GratingSpec, effective_grating
from .instrument import InstrumentConfig, ResolutionParams, spin_echo_constant
from .models import PLANE_WAVE, WavePacketSpec
from .oracle import BeamProfile, QuadratureGrid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CURVES = ("ideal_tof", "damped_semiclassical", "smeared", "background",
          "oracle_quantum", "oracle_semiclassical", "resolution_envelope")
ORACLE_CURVES = ("oracle_quantum", "oracle_semiclassical")

#: reconstructed arm length (m); puts the first-order peak of the 2 MHz setup inside the band
DEFAULT_ARM_LENGTH_M = 1.45
DEFAULT_RF_HZ = 2.0e6


@dataclass(frozen=True)
class Sweep:
    xi_min_nm: float = 1400.0
    xi_max_nm: float = 24600.0
    n_points: int = 9281

    def problems(self) -> list[str]:
        out = []
        if int(self.n_points) != self.n_points or self.n_points < 2:
            out.append(f"sweep: n_points must be an integer >= 2 (got {self.n_points})")
        if not 0 < self.xi_min_nm < self.xi_max_nm:
            out.append(f"sweep: need 0 < xi_min_nm < xi_max_nm (got {self.xi_min_nm}, {self.xi_max_nm})")
        return out

    def grid(self) -> np.ndarray:
        return np.linspace(self.xi_min_nm, self.xi_max_nm, int(self.n_points))


@dataclass(frozen=True)
class OracleSettings:
    """Spin echo lengths and grid for the (opt-in) oracle curves."""

    xi_nm: tuple[float, ...] = ()
    grid: QuadratureGrid = field(default_factory=QuadratureGrid)


@dataclass(frozen=True)
class RunConfig:
    grating: GratingSpec = SILICON_GRATING
    instrument: InstrumentConfig = field(
        default_factory=lambda: InstrumentConfig.from_geometry(DEFAULT_RF_HZ, DEFAULT_ARM_LENGTH_M))
    resolution: ResolutionParams = field(default_factory=ResolutionParams)
    packet: WavePacketSpec = field(default_factory=WavePacketSpec)
    beam: BeamProfile | None = None
    sweep: Sweep = field(default_factory=Sweep)
    tilt_rad: float | None = None
    outputs: tuple[str, ...] = ("ideal_tof", "background", "smeared")
    oracle: OracleSettings = field(default_factory=OracleSettings)
    provenance: str = ""
    name: str = "run"

    @property
    def effective_grating(self) -> GratingSpec:
        return self.grating if self.tilt_rad is None else effective_grating(self.grating, self.tilt_rad)


_PARSE_POS = re.compile(r"line (\d+), column (\d+)")

_SCHEMA = {
    "run": {"name", "outputs", "tilt_rad", "tilt_deg", "provenance"},
    "grating": {"a_nm", "b_nm", "period_nm", "channel_nm", "depth_nm", "sld_per_nm2", "n_periods"},
    "instrument": {"xi0_nm_per_nm2", "rf_frequency_hz", "arm_length_m", "field_angle_rad",
                   "lambda_band_nm", "tof_bin_nm"},
    "resolution": {"delta_theta_rad", "delta_J_nm", "delta_b_nm", "a_lambda_nm", "b_lambda"},
    "packet": {"delta_nm", "lambda_nm"},
    "beam": {"width_nm", "n_impact_samples"},
    "sweep": {"xi_min_nm", "xi_max_nm", "n_points"},
    "oracle": {"xi_nm", "samples_per_period", "n_sigma", "n_k", "tolerance"},
}


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse and validate TOML text; every problem is reported at once."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _PARSE_POS.search(str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigParseError(f"{source}: {exc}", line, col) from None
    return _build(doc)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_config(text, str(path))


def _number(tab, key, problems, where, default=None):
    v = tab.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}.{key}: expected a number (got {v!r})")
        return None
    return float(v)


def _build(doc: dict) -> RunConfig:
    problems: list[str] = []
    for name, tab in doc.items():
        if name not in _SCHEMA:
            problems.append(f"unknown table [{name}]")
            continue
        if not isinstance(tab, dict):
            problems.append(f"[{name}] must be a table")
            continue
        for key in sorted(set(tab) - _SCHEMA[name]):
            problems.append(f"{name}.{key}: unknown key")
    get = lambda name: doc.get(name) if isinstance(doc.get(name), dict) else {}  # noqa: E731

    grating = _grating(get("grating"), problems)
    instrument = _instrument(get("instrument"), problems)
    resolution = _collect(ResolutionParams, get("resolution"), "resolution", problems,
                          ResolutionParams())
    packet = _packet(get("packet"), problems)
    beam = _beam(get("beam"), problems)
    sweep = _sweep(get("sweep"), problems)
    oracle = _oracle(get("oracle"), problems)

    run = get("run")
    outputs = run.get("outputs", RunConfig.outputs)
    if not isinstance(outputs, (list, tuple)) or not all(isinstance(o, str) for o in outputs):
        problems.append("run.outputs: expected a list of curve names")
        outputs = ()
    for o in outputs:
        if o not in CURVES:
            problems.append(f"run.outputs: unknown curve {o!r} (choose from {', '.join(CURVES)})")
    tilt = _number(run, "tilt_rad", problems, "run")
    tilt_deg = _number(run, "tilt_deg", problems, "run")
    if tilt is not None and tilt_deg is not None:
        problems.append("run: give tilt_rad or tilt_deg, not both")
    elif tilt_deg is not None:
        tilt = math.radians(tilt_deg)
    if tilt is not None and not 0 < tilt <= math.pi / 2:
        problems.append(f"run.tilt_rad: must lie in (0, pi/2] (got {tilt})")
    if packet is not None and packet.is_plane_wave and any(o in ORACLE_CURVES for o in outputs):
        problems.append("packet.delta_nm: oracle curves need a finite packet width")
    if any(o in ORACLE_CURVES for o in outputs) and oracle is not None and not oracle.xi_nm:
        problems.append("oracle.xi_nm: oracle curves need at least one spin echo length")
    if sweep is not None and instrument is not None:
        lo, hi = instrument.xi_band_nm
        if sweep.xi_min_nm < lo * (1 - 1e-9) or sweep.xi_max_nm > hi * (1 + 1e-9):
            problems.append(f"sweep: [{sweep.xi_min_nm:g}, {sweep.xi_max_nm:g}] nm leaves the "
                            f"instrument band [{lo:.6g}, {hi:.6g}] nm")
    name = run.get("name", "run")
    provenance = run.get("provenance", "")
    for key, val in (("name", name), ("provenance", provenance)):
        if not isinstance(val, str):
            problems.append(f"run.{key}: expected a string")

    if problems:
        raise ValidationError(problems)
    return RunConfig(grating=grating, instrument=instrument, resolution=resolution, packet=packet,
                     beam=beam, sweep=sweep, tilt_rad=tilt, outputs=tuple(outputs),
                     oracle=oracle, provenance=provenance, name=name)


def _collect(cls, tab, where, problems, default):
    kw = {}
    for key in _SCHEMA[where]:
        if key in tab:
            v = _number(tab, key, problems, where)
            if v is not None:
                kw[key] = v
    if not kw:
        return default
    merged = {**vars(default), **kw}
    bad = cls.problems(_Shadow(merged))
    problems.extend(bad)
    return None if bad else cls(**merged)


class _Shadow:
    """Attribute view used to run ``problems()`` without raising in the constructor."""

    def __init__(self, values):
        self.__dict__.update(values)


def _grating(tab, problems):
    where = "grating"
    nums = {k: _number(tab, k, problems, where) for k in _SCHEMA[where] if k in tab}
    base = SILICON_GRATING
    if "a_nm" in nums or "b_nm" in nums:
        if "period_nm" in nums or "channel_nm" in nums:
            problems.append("grating: give either (a_nm, b_nm) or (period_nm, channel_nm)")
            return None
        a = nums.get("a_nm", base.a_nm)
        b = nums.get("b_nm", base.b_nm)
    else:
        p = nums.get("period_nm", base.period_nm)
        c = nums.get("channel_nm", base.channel_nm)
        if p is None or c is None:
            return None
        if not 0 <= c < p:
            problems.append(f"grating: need 0 <= channel_nm < period_nm (got {c}, {p}); "
                            "the wall must have nonzero width (b > a)")
            return None
        a = 0.5 * (p - c)
        b = a + c
    if a is None or b is None:
        return None
    n_periods = tab.get("n_periods", base.n_periods)
    values = dict(a_nm=a, b_nm=b, depth_nm=nums.get("depth_nm", base.depth_nm),
                  sld_per_nm2=nums.get("sld_per_nm2", base.sld_per_nm2), n_periods=n_periods)
    if None in values.values():
        return None
    bad = GratingSpec.problems(_Shadow(values))
    problems.extend(bad)
    return None if bad else GratingSpec(**values)


def _instrument(tab, problems):
    where = "instrument"
    nums = {k: _number(tab, k, problems, where) for k in
            ("xi0_nm_per_nm2", "rf_frequency_hz", "arm_length_m", "field_angle_rad", "tof_bin_nm")
            if k in tab}
    f = nums.get("rf_frequency_hz", DEFAULT_RF_HZ)
    theta = nums.get("field_angle_rad", math.pi / 4)
    arm = nums.get("arm_length_m")
    xi0 = nums.get("xi0_nm_per_nm2")
    if xi0 is None and "xi0_nm_per_nm2" not in tab:
        length = arm if arm is not None else DEFAULT_ARM_LENGTH_M
        if f and f > 0 and length > 0 and theta and 0 < theta < math.pi / 2:
            xi0 = spin_echo_constant(f, length, theta)
        else:
            problems.append("instrument: cannot derive xi0 (need rf_frequency_hz > 0, "
                            "arm_length_m > 0, 0 < field_angle_rad < pi/2) and none given")
            return None
    band = tab.get("lambda_band_nm", (0.3, 1.3))
    if (not isinstance(band, (list, tuple)) or len(band) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in band)):
        problems.append(f"instrument.lambda_band_nm: expected [min, max] (got {band!r})")
        return None
    values = dict(xi0_nm_per_nm2=xi0, rf_frequency_hz=f, arm_length_m=arm, field_angle_rad=theta,
                  lambda_band_nm=(float(band[0]), float(band[1])),
                  tof_bin_nm=nums.get("tof_bin_nm", 0.0025))
    if any(values[k] is None for k in ("xi0_nm_per_nm2", "rf_frequency_hz", "field_angle_rad",
                                       "tof_bin_nm")):
        return None
    bad = InstrumentConfig.problems(_Shadow(values))
    problems.extend(bad)
    return None if bad else InstrumentConfig(**values)


def _packet(tab, problems):
    delta = tab.get("delta_nm", "infinite")
    if isinstance(delta, str):
        if delta.lower() not in ("infinite", "inf", "plane_wave"):
            problems.append(f"packet.delta_nm: expected a number or \"infinite\" (got {delta!r})")
            return None
        delta = PLANE_WAVE
    else:
        delta = _number(tab, "delta_nm", problems, "packet")
    lam = _number(tab, "lambda_nm", problems, "packet", 0.5)
    if delta is None or lam is None:
        return None
    if not lam > 0:
        problems.append(f"packet.lambda_nm: must be > 0 (got {lam})")
        return None
    values = dict(delta_nm=delta, k0=(0.0, 0.0, 2 * math.pi / lam))
    bad = WavePacketSpec.problems(_Shadow(values))
    problems.extend(bad)
    return None if bad else WavePacketSpec(**values)


def _beam(tab, problems):
    if not tab:
        return None
    width = _number(tab, "width_nm", problems, "beam")
    n = tab.get("n_impact_samples", 16)
    if width is None:
        problems.append("beam.width_nm: required when [beam] is given")
        return None
    values = dict(width_nm=width, n_impact_samples=n)
    bad = BeamProfile.problems(_Shadow(values))
    problems.extend(bad)
    return None if bad else BeamProfile(**values)


def _sweep(tab, problems):
    d = Sweep()
    lo = _number(tab, "xi_min_nm", problems, "sweep", d.xi_min_nm)
    hi = _number(tab, "xi_max_nm", problems, "sweep", d.xi_max_nm)
    n = tab.get("n_points", d.n_points)
    if isinstance(n, bool) or not isinstance(n, int):
        problems.append(f"sweep.n_points: expected an integer (got {n!r})")
        return None
    if lo is None or hi is None:
        return None
    s = Sweep(lo, hi, n)
    bad = s.problems()
    problems.extend(bad)
    return None if bad else s


def _oracle(tab, problems):
    xi = tab.get("xi_nm", [])
    if not isinstance(xi, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                           for v in xi):
        problems.append("oracle.xi_nm: expected a list of numbers")
        return None
    if any(v <= 0 for v in xi) or any(b <= a for a, b in zip(xi, xi[1:])):
        problems.append("oracle.xi_nm: values must be positive and strictly increasing")
        return None
    d = QuadratureGrid()
    kw = {}
    for key in ("samples_per_period", "n_k"):
        if key in tab:
            v = tab[key]
            if isinstance(v, bool) or not isinstance(v, int):
                problems.append(f"oracle.{key}: expected an integer (got {v!r})")
                return None
            kw[key] = v
    for key in ("n_sigma", "tolerance"):
        v = _number(tab, key, problems, "oracle")
        if v is not None:
            kw[key] = v
    try:
        grid = QuadratureGrid(**{**vars(d), **kw})
    except ValueError as exc:
        problems.append(f"oracle: {exc}")
        return None
    return OracleSettings(tuple(float(v) for v in xi), grid)
