"""File-level batch pipeline: configuration, stage runners and the run manifest."""

from __future__ import annotations

import csv
import glob
import hashlib
import json
import os
import shutil
from dataclasses import asdict, dataclass, replace

import jsonschema
import numpy as np

from . import __version__
from . import metrics as pm
from .analysis import Analysis, analyse, extract_transect, scatter_rows
from .correction import CorrectionInput, correct
from .errors import (
    ConfigError,
    CorruptFileError,
    DegenerateSpectrumError,
    FormatError,
    NumericalError,
    PolanisoError,
    ValidationError,
)
from .export import (
    export_flags_pgm,
    export_log_lambda_pgm,
    export_metric,
    load_metric,
)
from .scene import SceneSpec, ground_truth, simulate
from .slc import RasterMask, SlcImage, boxcar_coherency, load_slc, load_slope, save_slc, slope_mask
from .stationarity import (
    FLAG_THRESHOLDS,
    LOG_LAMBDA_THRESHOLD,
    STATISTIC_FORM,
    StationarityResult,
    flag_anisotropy,
    ml_ratio,
)
from .sublook import MANIFEST_NAME, SublookConfig, SublookStack, extract_sublooks

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "input": {"type": "string"},
        "slope": {"type": ["string", "null"]},
        "helix": {"type": ["string", "null"]},
        "out": {"type": "string"},
        "nsub": {"type": "integer", "minimum": 2},
        "overlap": {"type": "number", "minimum": 0, "maximum": 0.9},
        "taper": {"enum": ["rectangular", "raised-cosine"]},
        "rolloff": {"type": "number", "minimum": 0, "maximum": 1},
        "compensate": {"type": ["boolean", "null"]},
        "boxcar": {"type": "integer", "minimum": 1},
        "slope_min": {"type": "number"},
        "slope_max": {"type": "number"},
        "loglambda_threshold": {"type": "number"},
        "dmfp_thresholds": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "stationarity_gate": {"type": "boolean"},
        "seed": {"type": ["integer", "null"], "minimum": 0},
        "formats": {"type": "array", "items": {"enum": ["csv", "pgm", "raw"]}},
    },
}


@dataclass
class PipelineConfig:
    input: str = ""
    out: str = "polaniso_out"
    slope: str | None = None
    helix: str | None = None
    nsub: int = 3
    overlap: float = 0.0
    taper: str = "rectangular"
    rolloff: float = 0.5
    compensate: bool | None = None  # None: off for simulated scenes, on otherwise
    boxcar: int = 9
    slope_min: float = -2.0
    slope_max: float = 2.0
    loglambda_threshold: float = LOG_LAMBDA_THRESHOLD
    dmfp_thresholds: tuple = FLAG_THRESHOLDS
    stationarity_gate: bool = True
    seed: int | None = None
    formats: tuple = ("raw", "pgm")

    def __post_init__(self):
        self.dmfp_thresholds = tuple(float(x) for x in self.dmfp_thresholds)
        self.formats = tuple(self.formats)
        try:
            self.sublook_config()
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        if self.boxcar < 1 or self.boxcar % 2 == 0:
            raise ConfigError(f"field 'boxcar': must be a positive odd integer, got {self.boxcar}")
        if self.slope_min > self.slope_max:
            raise ConfigError("fields 'slope_min'/'slope_max': empty interval")

    def sublook_config(self, slc: SlcImage | None = None) -> SublookConfig:
        comp = self.compensate
        if comp is None:
            comp = slc is not None and not slc.meta.extra.get("synthetic", False)
        return SublookConfig(self.nsub, self.overlap, self.taper, self.rolloff, bool(comp))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dmfp_thresholds"] = list(self.dmfp_thresholds)
        d["formats"] = list(self.formats)
        return d

    @classmethod
    def from_dict(cls, d: dict, source: str = "<config>") -> "PipelineConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{source}: field '{where}': {exc.message}") from None
        return cls(**d)

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: line 1: top level must be a JSON object")
        d.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(d, source=str(path))


class PipelineError(PolanisoError):
    """A stage failed; carries the stage name and the CLI exit code."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code_for(cause)
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PipelineError):
        return exc.exit_code
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NumericalError, DegenerateSpectrumError)):
        return EXIT_NUMERIC
    if isinstance(exc, (FormatError, CorruptFileError, ValidationError, OSError, ValueError)):
        return EXIT_INPUT
    return 1


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (PolanisoError, OSError, ValueError, ArithmeticError) as exc:
        raise PipelineError(name, exc) from exc


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# stages operating on an output directory


def run_simulate(scene_path, out_dir, seed: int | None = None) -> str:
    """Simulate a scene description into ``out_dir/scene.pslc`` plus a truth sidecar."""
    spec = SceneSpec.from_json(scene_path)
    if seed is not None:
        spec.rng_seed = int(seed)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "scene.pslc")
    save_slc(simulate(spec), path)
    _write_json(os.path.join(out_dir, "scene_truth.json"), ground_truth(spec))
    return path


def run_sublook(slc_path, cfg: PipelineConfig, out_dir) -> SublookStack:
    slc = load_slc(slc_path)
    stack = extract_sublooks(slc, cfg.sublook_config(slc))
    stack.source = os.path.abspath(slc_path)
    stack.save(os.path.join(out_dir, "sublooks"))
    return stack


def _load_stack(out_dir) -> SublookStack:
    path = os.path.join(out_dir, "sublooks", MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path} not found; run the 'sublook' stage first")
    return SublookStack.load(path)


def run_metrics(out_dir, cfg: PipelineConfig) -> dict:
    stack = _load_stack(out_dir)
    source = stack.source if os.path.isabs(stack.source) else os.path.join(out_dir, stack.source)
    full = boxcar_coherency(load_slc(source), cfg.boxcar)
    subs = [boxcar_coherency(im, cfg.boxcar) for im in stack.images]
    rasters = {
        "m_fp": pm.m_fp(full),
        "one_minus_m_fp": pm.one_minus_m_fp(full),
        "span": pm.span(full),
        "p_v": pm.p_v(full),
        "entropy": pm.entropy(full),
        "rvi": pm.rvi(full),
    }
    for i, f in enumerate(subs, start=1):
        r = pm.one_minus_m_fp(f, f"sublook:{i}")
        r.metric_id = f"one_minus_m_fp_sub{i}"
        rasters[r.metric_id] = r
    for r in pm.span_ratio(subs, full):
        rasters[r.metric_id] = r
    _export_rasters(rasters, out_dir, cfg.formats)
    return rasters


def run_stationarity(out_dir, cfg: PipelineConfig):
    stack = _load_stack(out_dir)
    subs = [boxcar_coherency(im, cfg.boxcar) for im in stack.images]
    stat = ml_ratio(subs, subs[0].n_samples, cfg.loglambda_threshold)
    _export_rasters({"log_lambda": stat.log_lambda}, out_dir, cfg.formats)
    return stat


def _metric_dir(out_dir) -> str:
    return os.path.join(out_dir, "metrics")


def _read(out_dir, name) -> pm.MetricRaster:
    path = os.path.join(_metric_dir(out_dir), name + ".pmtr")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path} not found; run the earlier stages with the 'raw' format")
    return load_metric(path)


def _sub_names(out_dir, prefix) -> list[str]:
    n = len(glob.glob(os.path.join(_metric_dir(out_dir), prefix + "*.pmtr")))
    return [f"{prefix}{i}" for i in range(1, n + 1)]


def run_flag(out_dir, cfg: PipelineConfig):
    depol = [_read(out_dir, n) for n in _sub_names(out_dir, "one_minus_m_fp_sub")]
    stat = StationarityResult(_read(out_dir, "log_lambda"), cfg.loglambda_threshold)
    flags = flag_anisotropy(depol, stat, cfg.dmfp_thresholds, cfg.stationarity_gate)
    raster = pm.MetricRaster(flags.level.astype(float), "flag", "sublooks", flags.n_invalid)
    _export_rasters({"flag": raster}, out_dir, tuple(f for f in cfg.formats if f != "pgm"))
    if "pgm" in cfg.formats:
        export_flags_pgm(flags, os.path.join(_metric_dir(out_dir), "flag.pgm"))
    return flags


def run_correct(out_dir, cfg: PipelineConfig, p_c=None) -> dict:
    depol = [_read(out_dir, n).values for n in _sub_names(out_dir, "one_minus_m_fp_sub")]
    ratios = [_read(out_dir, n).values for n in _sub_names(out_dir, "span_ratio_")]
    d_full = _read(out_dir, "one_minus_m_fp").values
    span = _read(out_dir, "span").values
    p_v = _read(out_dir, "p_v").values
    if p_c is None and cfg.helix:
        p_c = load_metric(cfg.helix).values
    out = correct(CorrectionInput(np.nan_to_num(np.stack(ratios)), np.stack(depol), span, p_v, p_c))
    mask = _slope_mask(cfg, d_full.shape)
    write_correction_csv(os.path.join(out_dir, "correction.csv"), d_full, depol, ratios, out, mask)
    summary = correction_summary(d_full, out, mask)
    _write_json(os.path.join(out_dir, "correction_summary.json"), summary)
    return summary


def _slope_mask(cfg: PipelineConfig, shape) -> RasterMask | None:
    if not cfg.slope:
        return None
    mask = slope_mask(load_slope(cfg.slope), cfg.slope_min, cfg.slope_max)
    mask.check_matches(shape)
    return mask


def correction_summary(d_full, out, mask: RasterMask | None = None) -> dict:
    valid = np.isfinite(d_full) & np.isfinite(out.depol)
    if mask is not None:
        valid &= mask.mask
    n = int(valid.sum())
    lower = int(np.count_nonzero((out.depol < d_full) & valid))
    return {
        "n_pixels": n,
        "n_corrected_lower": lower,
        "fraction_corrected_lower": lower / n if n else None,
        "mean_delta_p_v": float(np.mean(out.delta_p_v[valid])) if n else None,
        "fraction_weight_sum_deviation": float(np.count_nonzero(out.weight_deviation & valid) / n) if n else None,
        "n_degenerate": int(out.n_degenerate),
        "slope_mask": mask.note if mask is not None else None,
    }


def write_correction_csv(path, d_full, depol, ratios, out, mask=None) -> None:
    n_sub = len(depol)
    sel = np.ones(d_full.shape, bool) if mask is None else mask.mask
    rr, cc = np.nonzero(sel)
    header = (
        ["row", "col", "d_full"]
        + [f"d_{i}" for i in range(1, n_sub + 1)]
        + [f"w_{i}" for i in range(1, n_sub + 1)]
        + ["d_corrected", "delta_p_v", "p_v_corrected", "p_c_corrected"]
    )
    cols = [d_full, *depol, *ratios, out.depol, out.delta_p_v, out.p_v]
    stacked = np.stack([c[rr, cc] for c in cols], axis=1)
    pc = out.p_c[rr, cc] if out.p_c is not None else None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, (r, c) in enumerate(zip(rr.tolist(), cc.tolist())):
            vals = [repr(float(v)) for v in stacked[k]]
            w.writerow([r, c, *vals, repr(float(pc[k])) if pc is not None else ""])


def run_transect(out_dir, path_spec, csv_path=None):
    names = sorted(os.path.basename(p)[:-5] for p in glob.glob(os.path.join(_metric_dir(out_dir), "*.pmtr")))
    if not names:
        raise FileNotFoundError(f"no metric rasters under {_metric_dir(out_dir)}")
    rasters = {n: _read(out_dir, n) for n in names}
    tr = extract_transect(rasters, path_spec)
    csv_path = csv_path or os.path.join(out_dir, "transect.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(tr.columns())
        for row in tr.rows():
            w.writerow([*row[:3], *(repr(v) for v in row[3:])])
    return tr


def run_scatter(out_dir, cfg: PipelineConfig, csv_path=None) -> int:
    depol = [_read(out_dir, n) for n in _sub_names(out_dir, "one_minus_m_fp_sub")]
    ratios = [_read(out_dir, n) for n in _sub_names(out_dir, "span_ratio_")]
    mask = _slope_mask(cfg, depol[0].shape)
    return write_scatter_csv(csv_path or os.path.join(out_dir, "scatter.csv"), depol, ratios, mask)


def write_scatter_csv(path, depol, ratios, mask=None) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "sublook", "span_ratio", "one_minus_m_fp"])
        for r, c, i, wi, di in scatter_rows(depol, ratios, mask):
            w.writerow([r, c, i, repr(wi), repr(di)])
            n += 1
    return n


def _export_rasters(rasters: dict, out_dir, formats) -> list[str]:
    mdir = _metric_dir(out_dir)
    os.makedirs(mdir, exist_ok=True)
    written = []
    for name, r in rasters.items():
        fmts = tuple(formats)
        if name == "log_lambda" and "pgm" in fmts:
            export_log_lambda_pgm(r.values, os.path.join(mdir, "log_lambda.pgm"))
            fmts = tuple(f for f in fmts if f != "pgm")
        written += export_metric(r, os.path.join(mdir, name), fmts)
    return written


# ---------------------------------------------------------------------------
# composite run


def _prepare_out(out: str) -> str:
    out = os.path.abspath(out)
    if os.path.exists(out) and not os.path.exists(os.path.join(out, "manifest.json")):
        if os.listdir(out):
            raise ConfigError(f"field 'out': {out} exists and is not a pipeline output directory")
    tmp = out + ".incomplete"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    return tmp


def run_pipeline(cfg: PipelineConfig) -> str:
    """Run every stage into ``cfg.out``; returns the output directory.

    Work happens in ``<out>.incomplete`` which is removed on failure and
    renamed into place on success, so a partial run never looks finished.
    """
    if not cfg.input:
        raise ConfigError("field 'input': no input given")
    tmp = _prepare_out(cfg.out)
    out = tmp[: -len(".incomplete")]
    try:
        slc_path = cfg.input
        truth = None
        if cfg.input.endswith(".json"):
            slc_path = _stage("simulate", run_simulate, cfg.input, tmp, cfg.seed)
            truth = os.path.join(tmp, "scene_truth.json")
        slc = _stage("load", load_slc, slc_path)
        slopes = _stage("load", load_slope, cfg.slope) if cfg.slope else None
        p_c = _stage("load", load_metric, cfg.helix).values if cfg.helix else None
        res: Analysis = _stage(
            "analyse",
            analyse,
            slc,
            cfg.sublook_config(slc),
            cfg.boxcar,
            cfg.loglambda_threshold,
            cfg.dmfp_thresholds,
            cfg.stationarity_gate,
            slopes,
            (cfg.slope_min, cfg.slope_max),
            p_c,
        )
        res.stack.source = os.path.abspath(slc_path) if truth is None else "scene.pslc"
        _stage("sublook", res.stack.save, os.path.join(tmp, "sublooks"))
        rasters = dict(res.rasters)
        flag_raster = rasters.pop("flag")
        written = _stage("export", _export_rasters, rasters, tmp, cfg.formats)
        written += _stage(
            "export", _export_rasters, {"flag": flag_raster}, tmp, tuple(f for f in cfg.formats if f != "pgm")
        )
        if "pgm" in cfg.formats:
            _stage("export", export_flags_pgm, res.flags, os.path.join(_metric_dir(tmp), "flag.pgm"))
        d_full = res.rasters["one_minus_m_fp"].values
        _stage(
            "correct",
            write_correction_csv,
            os.path.join(tmp, "correction.csv"),
            d_full,
            list(res.sub_depol()),
            list(res.span_ratios()),
            res.correction,
            res.mask,
        )
        summary = correction_summary(d_full, res.correction, res.mask)
        _write_json(os.path.join(tmp, "correction_summary.json"), summary)
        manifest = {
            "tool": "polaniso",
            "version": __version__,
            "config": cfg.to_dict(),
            "input_sha256": _sha256(slc_path),
            "ground_truth": "scene_truth.json" if truth else None,
            "sublook": res.stack.manifest() | {"weighting": "sublooks/sublooks.json"},
            "stationarity_statistic": STATISTIC_FORM,
            "n_samples": int(res.full.n_samples),
            "rvi_formula": pm.RVI_FORMULA,
            "degenerate_pixels": res.counters,
            "summary": res.summary(),
            "outputs": sorted(os.path.relpath(p, tmp) for p in written),
        }
        _write_json(os.path.join(tmp, "manifest.json"), manifest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if os.path.exists(out):
        shutil.rmtree(out)
    os.rename(tmp, out)
    return out


def with_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
