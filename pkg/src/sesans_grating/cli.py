"""Command line interface.

``sesans-grating simulate CONFIG``   closed-form (and any requested oracle) curves
``sesans-grating reproduce PRESET``  the same for a built-in preset
``sesans-grating oracle CONFIG``     both oracle curves at ``oracle.xi_nm``
``sesans-grating report``            single-path vs two-path discrimination number

``--out DIR`` exports CSV files.  Failures print one JSON object on stderr
(``{"error": category, "message": ...}``) and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .config import load_config
from .errors import SesansError
from .models import WavePacketSpec, damping
from .runner import PRESETS, export_csv, load_preset, run

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sesans-grating", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--out", metavar="DIR", help="write CSV files into DIR")
        p.add_argument("--grid-scale", type=float, default=1.0,
                       help="multiply oracle grid densities (convergence studies)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for oracle points")

    p = sub.add_parser("simulate", help="run a TOML configuration")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("reproduce", help="run a built-in preset")
    p.add_argument("preset", choices=PRESETS)
    common(p)
    p = sub.add_parser("oracle", help="wave-packet oracle curves for a configuration")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("report", help="print the residual single-path damping for a coherence width")
    p.add_argument("--fwhm-um", type=float, default=150.0, help="packet FWHM in micrometres")
    p.add_argument("--xi-um", type=float, default=25.0, help="spin echo length in micrometres")
    return ap


def _summary(results) -> None:
    for name, curve in results.curves.items():
        print(f"{name}: {len(curve)} points, xi {curve.xi_nm[0]:.6g}..{curve.xi_nm[-1]:.6g} nm")
        for pk in results.peaks.get(name, []):
            print(f"  order {pk.order:2d}  xi {pk.xi_peak_nm:10.2f} nm  height {pk.height:.6f}"
                  f"  width {pk.width_nm:.2f} nm")
    for note in results.notes:
        print(f"note: {note}")


def report(fwhm_um: float, xi_um: float) -> dict:
    sigma_um = fwhm_um / FWHM_PER_SIGMA
    g = damping(xi_um * 1e3, WavePacketSpec(delta_nm=sigma_um * 1e3))
    return {"fwhm_um": fwhm_um, "sigma_um": sigma_um, "xi_um": xi_um,
            "single_path_damping": g, "two_path_damping": 1.0}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "report":
            r = report(args.fwhm_um, args.xi_um)
            print(f"coherence width FWHM {r['fwhm_um']:g} um -> sigma {r['sigma_um']:.4g} um")
            print(f"single-path damping at xi = {r['xi_um']:g} um: {r['single_path_damping']:.3f} "
                  f"({r['single_path_damping']:.6f})")
            print("two-path damping: 1 (independent of the coherence width)")
            return 0
        if args.verb == "reproduce":
            cfg = load_preset(args.preset)
            results = run(cfg, grid_scale=args.grid_scale, jobs=args.jobs)
        elif args.verb == "oracle":
            cfg = load_config(args.config)
            results = run(cfg, grid_scale=args.grid_scale, jobs=args.jobs,
                          outputs=("oracle_quantum", "oracle_semiclassical"))
        else:
            cfg = load_config(args.config)
            results = run(cfg, grid_scale=args.grid_scale, jobs=args.jobs)
        _summary(results)
        if args.out:
            for path in export_csv(results, args.out):
                print(f"wrote {path}")
        return 0
    except SesansError as exc:
        payload = {"error": exc.category, "message": str(exc)}
        for attr in ("line", "column", "problems", "interval", "coarse", "fine", "curve"):
            val = getattr(exc, attr, None)
            if val is not None:
                payload[attr] = val
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
