"""Preset lookup, curve orchestration and CSV export."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import ORACLE_CURVES, RunConfig, parse_config
from .errors import CurveError, ExportError, SesansError
from .instrument import (PeakEstimate, convolve_resolution, find_peaks, fit_background,
                         normalize_peaks)
from .models import EchoPattern, background, damping, tof_pattern, tof_phase
from .oracle import (BeamProfile, fit_aperture, quantum_polarization_numeric,
                     semiclassical_polarization_numeric)


PRESETS = ("fig2a_ideal", "fig2b_damped", "fig3a_2MHz", "fig3b_3MHz",
           "fig4_tilted_8deg", "fig4_tilted_5deg")
PEAK_CURVES = ("ideal_tof", "damped_semiclassical", "smeared")


def preset_text(preset_id: str) -> str:
    if preset_id not in PRESETS:
        raise KeyError(f"unknown preset {preset_id!r} (choose from {', '.join(PRESETS)})")
    return resources.files("sesans_grating").joinpath(f"presets/{preset_id}.toml").read_text("utf-8")


def load_preset(preset_id: str) -> RunConfig:
    return parse_config(preset_text(preset_id), f"preset {preset_id}")


@dataclass
class RunResults:
    config: RunConfig
    curves: dict[str, EchoPattern] = field(default_factory=dict)
    peaks: dict[str, list[PeakEstimate]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


class _Annotate:
    """Prefix any error raised inside the block with the curve being computed."""

    def __init__(self, curve):
        self.curve = curve

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            return False
        if isinstance(exc, SesansError):
            exc.args = (f"curve {self.curve}: {exc.args[0] if exc.args else ''}",) + exc.args[1:]
            exc.curve = self.curve
            return False
        if isinstance(exc, (ValueError, ArithmeticError)):
            err = CurveError(f"curve {self.curve}: {exc}")
            err.curve = self.curve
            raise err from exc
        return False


def _oracle_point(args):
    kind, packet, g, phi, xi, beam, grid = args
    fn = quantum_polarization_numeric if kind == "oracle_quantum" else semiclassical_polarization_numeric
    return fn(packet, g, phi, xi, beam, grid)


def oracle_curve(config: RunConfig, kind: str, grid_scale: float = 1.0, jobs: int = 1) -> EchoPattern:
    """Oracle polarization at ``config.oracle.xi_nm`` with the TOF phase of each point."""
    xi = np.asarray(config.oracle.xi_nm, dtype=float)
    if xi.size == 0:
        raise CurveError("no oracle spin echo lengths configured (oracle.xi_nm)")
    if config.packet.is_plane_wave:
        raise CurveError("oracle curves need a finite packet width (packet.delta_nm)")
    inst = config.instrument
    inst.check_band(xi)
    g = config.effective_grating
    grid = config.oracle.grid if grid_scale == 1 else config.oracle.grid.scaled(grid_scale)
    lam = inst.lambda_of_xi(xi)
    tasks = []
    for x, l in zip(xi, lam):
        beam = config.beam or BeamProfile.covering(config.packet, g, x)
        tasks.append((kind, config.packet, fit_aperture(g, config.packet, beam, x, grid),
                      float(tof_phase(g, l)), float(x), beam, grid))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_oracle_point, tasks))
    else:
        values = [_oracle_point(t) for t in tasks]
    return EchoPattern(xi, np.clip(values, -1.0, 1.0), lam, label=kind,
                       meta={"delta_nm": config.packet.delta_nm, "grid": grid})


def _resolution_envelope(smeared: EchoPattern, period: float) -> EchoPattern:
    """Resolution-limited peak height against ``xi``.

    The smeared pattern is de-trended with its fitted background, the peak
    heights are read off per order, and the envelope is their linear
    interpolation over the span of the detected peaks.
    """
    normalized = normalize_peaks(smeared, fit_background(smeared, period))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        peaks = find_peaks(normalized, period)
    if len(peaks) < 2:
        raise CurveError(f"resolution envelope needs at least two echo peaks, found {len(peaks)}")
    px = np.array([p.xi_peak_nm for p in peaks])
    ph = np.array([p.height for p in peaks])
    keep = (smeared.xi_nm >= px[0]) & (smeared.xi_nm <= px[-1])
    x = smeared.xi_nm[keep]
    lam = None if smeared.lambda_nm is None else smeared.lambda_nm[keep]
    return EchoPattern(x, np.interp(x, px, ph), lam, label="resolution_envelope")


def run(config: RunConfig, *, grid_scale: float = 1.0, jobs: int = 1,
        outputs: tuple[str, ...] | None = None) -> RunResults:
    """Compute the requested curves (``config.outputs`` unless ``outputs`` is given).

    Closed-form curves share the sweep grid.  ``smeared`` convolves the model
    curve (``damped_semiclassical``, which equals ``ideal_tof`` for a plane
    wave) with the resolution.  Errors name the curve that failed.
    """
    wanted = tuple(config.outputs if outputs is None else outputs)
    res = RunResults(config)
    g = config.effective_grating
    inst = config.instrument
    xi = config.sweep.grid()
    cache: dict[str, EchoPattern] = {}

    def ideal():
        if "ideal_tof" not in cache:
            with _Annotate("ideal_tof"):
                cache["ideal_tof"] = tof_pattern(g, inst, xi)
        return cache["ideal_tof"]

    def damped():
        if "damped_semiclassical" not in cache:
            base = ideal()
            cache["damped_semiclassical"] = base.with_values(
                base.polarization * damping(base.xi_nm, config.packet), label="damped_semiclassical")
        return cache["damped_semiclassical"]

    def smeared():
        if "smeared" not in cache:
            with _Annotate("smeared"):
                cache["smeared"] = _relabel(convolve_resolution(damped(), inst, config.resolution),
                                            "smeared")
        return cache["smeared"]

    for name in wanted:
        with _Annotate(name):
            if name == "ideal_tof":
                curve = ideal()
            elif name == "damped_semiclassical":
                curve = damped()
            elif name == "smeared":
                curve = smeared()
            elif name == "background":
                inst.check_band(xi)
                curve = EchoPattern(xi, background(g, inst, xi), inst.lambda_of_xi(xi), label="background")
            elif name == "resolution_envelope":
                curve = _resolution_envelope(smeared(), g.period_nm)
            elif name in ORACLE_CURVES:
                curve = oracle_curve(config, name, grid_scale, jobs)
            else:
                raise CurveError(f"unknown curve {name!r}")
            res.curves[name] = curve
            if name in PEAK_CURVES and xi[-1] - xi[0] >= g.period_nm:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    res.peaks[name] = find_peaks(curve, g.period_nm)
                res.notes.extend(f"{name}: {w.message}" for w in caught)
    return res


def _relabel(pattern: EchoPattern, label: str) -> EchoPattern:
    pattern.label = label
    return pattern


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.12g}"


def _header(results: RunResults, what: str) -> list[str]:
    cfg = results.config
    lines = [f"# sesans_grating {__version__}", f"# run: {cfg.name}", f"# curve: {what}"]
    if cfg.provenance:
        lines.append(f"# provenance: {cfg.provenance}")
    g = cfg.effective_grating
    lines.append(f"# grating: a_nm={g.a_nm:.12g} b_nm={g.b_nm:.12g} depth_nm={g.depth_nm:.12g} "
                 f"sld_per_nm2={g.sld_per_nm2:.12g}"
                 + ("" if cfg.tilt_rad is None else f" tilt_rad={cfg.tilt_rad:.12g}"))
    lines.append(f"# instrument: xi0_nm_per_nm2={cfg.instrument.xi0_nm_per_nm2:.12g} "
                 f"rf_frequency_hz={cfg.instrument.rf_frequency_hz:.12g}")
    return lines


def export_csv(results: RunResults, out_dir) -> list[Path]:
    """Write one CSV per curve and per peak table into ``out_dir``.

    Curves: ``xi_nm,lambda_nm,polarization``; peak tables
    (``<curve>_peaks.csv``): ``order,xi_peak_nm,height,width_nm``.  Values
    use 12 significant digits, so identical results give identical files.
    Nothing is written when there is nothing to export.
    """
    curves = {k: v for k, v in results.curves.items() if len(v)}
    if not curves:
        raise ExportError("nothing to export: the run produced no curve samples")
    out = Path(out_dir)
    docs: dict[str, str] = {}
    for name, pat in curves.items():
        lam = pat.lambda_nm if pat.lambda_nm is not None else results.config.instrument.lambda_of_xi(pat.xi_nm)
        rows = _header(results, name) + ["xi_nm,lambda_nm,polarization"]
        rows += [f"{_fmt(x)},{_fmt(l)},{_fmt(p)}"
                 for x, l, p in zip(pat.xi_nm.tolist(), np.asarray(lam).tolist(), pat.polarization.tolist())]
        docs[f"{name}.csv"] = "\n".join(rows) + "\n"
    for name, peaks in results.peaks.items():
        rows = _header(results, f"{name} peaks") + ["order,xi_peak_nm,height,width_nm"]
        rows += [f"{p.order},{_fmt(p.xi_peak_nm)},{_fmt(p.height)},{_fmt(p.width_nm)}" for p in peaks]
        docs[f"{name}_peaks.csv"] = "\n".join(rows) + "\n"
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for fname, text in docs.items():
            path = out / fname
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(path)
    except OSError as exc:
        raise ExportError(f"cannot write to {out}: {exc.strerror or exc}") from None
    return written
