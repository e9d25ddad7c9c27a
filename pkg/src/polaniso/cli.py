"""Command-line entry point: ``polaniso <stage> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 input error, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from . import pipeline as pl
from .errors import ConfigError, PolanisoError

log = logging.getLogger("polaniso")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _formats(text: str) -> list[str]:
    out = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in out if x not in ("csv", "pgm", "raw")]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from csv, pgm, raw")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="input PSLC file, or a scene JSON for 'simulate'/'report'")
    p.add_argument("--config", help="JSON pipeline configuration; command-line flags take precedence")
    p.add_argument("--out", help="output / working directory")
    p.add_argument("--nsub", type=int, help="number of subapertures (default 3)")
    p.add_argument("--overlap", type=float, help="band overlap as a fraction of band width (default 0)")
    p.add_argument("--taper", choices=["rectangular", "raised-cosine"])
    p.add_argument("--rolloff", type=float, help="raised-cosine roll-off in [0, 1]")
    comp = p.add_mutually_exclusive_group()
    comp.add_argument("--compensate", action="store_const", const=True,
                      help="compensate the azimuth weighting (default: on for real data, off for simulated scenes)")
    comp.add_argument("--no-compensate", dest="compensate", action="store_const", const=False)
    p.add_argument("--boxcar", type=int, help="boxcar window size (odd, default 9)")
    p.add_argument("--slope", help="PSLP slope raster used for masking")
    p.add_argument("--slope-min", type=float)
    p.add_argument("--slope-max", type=float)
    p.add_argument("--loglambda-threshold", type=float)
    p.add_argument("--dmfp-thresholds", type=_floats, help="weak,moderate,strong (default 0.1,0.15,0.2)")
    p.add_argument("--no-gate", dest="stationarity_gate", action="store_const", const=False,
                   help="flag regardless of the stationarity test")
    p.add_argument("--helix", help="PMTR raster of helix power P_c to adjust")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", dest="formats", type=_formats, help="comma list of csv,pgm,raw")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polaniso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("simulate", "synthesise a scene JSON into scene.pslc plus a ground-truth sidecar"),
        ("sublook", "split the input SLC into azimuth sublooks"),
        ("metrics", "polarimetric metrics for the full image and every sublook"),
        ("stationarity", "Wishart ML-ratio map across sublooks"),
        ("flag", "grade anisotropy from sublook depolarisation spreads"),
        ("correct", "span-weighted volume correction report"),
        ("transect", "sample every metric raster along a transect"),
        ("scatter", "(span ratio, 1 - m_FP) pairs per pixel and sublook"),
        ("report", "run the whole chain into one output directory"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "transect":
            g = p.add_mutually_exclusive_group(required=True)
            g.add_argument("--segment", type=_floats, help="r0,c0,r1,c1")
            g.add_argument("--pixels", help="semicolon-separated r,c pairs")
            p.add_argument("--csv", help="output CSV path (default <out>/transect.csv)")
        if name == "scatter":
            p.add_argument("--csv", help="output CSV path (default <out>/scatter.csv)")
    return parser


_FIELDS = (
    "input", "out", "nsub", "overlap", "taper", "rolloff", "compensate", "boxcar", "slope",
    "slope_min", "slope_max", "loglambda_threshold", "dmfp_thresholds", "stationarity_gate",
    "helix", "seed", "formats",
)


def config_from_args(args) -> pl.PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _FIELDS}
    if args.config:
        return pl.PipelineConfig.from_json(args.config, overrides)
    return pl.PipelineConfig.from_dict({k: v for k, v in overrides.items() if v is not None}, "<flags>")


def _require(value, name):
    if not value:
        raise ConfigError(f"field '{name}': required for this command")
    return value


def _transect_path(args):
    if args.segment is not None:
        if len(args.segment) != 4:
            raise ConfigError("field 'segment': expected r0,c0,r1,c1")
        r0, c0, r1, c1 = (int(v) for v in args.segment)
        return [(r0, c0), (r1, c1)]
    pts = []
    for pair in args.pixels.split(";"):
        if pair.strip():
            r, c = pair.split(",")
            pts.append((int(r), int(c)))
    return pts


def run(args) -> dict:
    cfg = config_from_args(args)
    cmd = args.command
    if cmd == "report":
        return {"out": pl.run_pipeline(cfg)}
    out = _require(cfg.out if (args.out or args.config) else None, "out")
    if cmd == "simulate":
        return {"slc": pl.run_simulate(_require(cfg.input, "input"), out, cfg.seed)}
    if cmd == "sublook":
        stack = pl.run_sublook(_require(cfg.input, "input"), cfg, out)
        return {"n_sub": stack.n_sub, "energies": stack.energies().tolist()}
    if cmd == "metrics":
        return {"rasters": sorted(pl.run_metrics(out, cfg))}
    if cmd == "stationarity":
        stat = pl.run_stationarity(out, cfg)
        return {"fraction_stationary": float(stat.stationary.mean())}
    if cmd == "flag":
        flags = pl.run_flag(out, cfg)
        return {"fraction_flagged": float((flags.level > 0).mean())}
    if cmd == "correct":
        return pl.run_correct(out, cfg)
    if cmd == "transect":
        tr = pl.run_transect(out, _transect_path(args), args.csv)
        return {"pixels": len(tr)}
    if cmd == "scatter":
        return {"rows": pl.run_scatter(out, cfg, args.csv)}
    raise ConfigError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result = run(args)
    except (PolanisoError, OSError, ValueError, ArithmeticError) as exc:
        code = pl.exit_code_for(exc)
        msg = str(exc) if isinstance(exc, pl.PipelineError) else f"[{args.command}] {exc}"
        print(f"polaniso {args.command}: {msg}", file=sys.stderr)
        return code
    print(json.dumps(result, indent=2, sort_keys=True))
    return pl.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
