"""In-memory composition of the whole chain plus transect, scatter and quadrant tools."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import metrics as pm
from .correction import CorrectionInput, CorrectionOutput, correct
from .errors import ShapeError, ValidationError
from .slc import CoherencyField, RasterMask, SlcImage, SlopeRaster, boxcar_coherency, slope_mask
from .stationarity import (
    FLAG_THRESHOLDS,
    LOG_LAMBDA_THRESHOLD,
    AnisotropyFlags,
    StationarityResult,
    flag_anisotropy,
    ml_ratio,
)
from .sublook import SublookConfig, SublookStack, extract_sublooks
from .validation import check_odd_window, check_slc


@dataclass
class Analysis:
    stack: SublookStack
    full: CoherencyField
    subs: list
    rasters: dict
    stat: StationarityResult
    flags: AnisotropyFlags
    correction: CorrectionOutput
    mask: RasterMask | None = None
    counters: dict = field(default_factory=dict)

    @property
    def n_sub(self) -> int:
        return len(self.subs)

    def sub_depol(self) -> np.ndarray:
        return np.stack([self.rasters[f"one_minus_m_fp_sub{i}"].values for i in range(1, self.n_sub + 1)])

    def span_ratios(self) -> np.ndarray:
        return np.stack([self.rasters[f"span_ratio_{i}"].values for i in range(1, self.n_sub + 1)])

    def summary(self) -> dict:
        """Fractions over valid (and slope-masked, if any) pixels."""
        d_full = self.rasters["one_minus_m_fp"].values
        d_new = self.correction.depol
        valid = np.isfinite(d_full) & np.isfinite(d_new)
        if self.mask is not None:
            valid &= self.mask.mask
        n = int(valid.sum())

        def frac(a):
            return float(np.count_nonzero(a & valid) / n) if n else None

        lvl = self.flags.level
        return {
            "n_pixels": n,
            "fraction_corrected_lower": frac(d_new < d_full),
            "fraction_stationary": frac(self.stat.stationary),
            "fraction_flag_weak_or_stronger": frac(lvl >= 1),
            "fraction_flag_moderate_or_stronger": frac(lvl >= 2),
            "fraction_flag_strong": frac(lvl >= 3),
            "mean_span_ratios": [
                float(np.nanmean(np.where(valid, r, np.nan))) if n else None for r in self.span_ratios()
            ],
            "fraction_weight_sum_deviation": frac(self.correction.weight_deviation),
        }


def analyse(
    slc: SlcImage,
    sublook: SublookConfig | None = None,
    window: int = 9,
    threshold: float = LOG_LAMBDA_THRESHOLD,
    flag_thresholds=FLAG_THRESHOLDS,
    gate: bool = True,
    slopes: SlopeRaster | None = None,
    slope_range=(-2.0, 2.0),
    p_c: np.ndarray | None = None,
    weighting=None,
) -> Analysis:
    """Run sublooks, metrics, stationarity, flags and correction on one image."""
    window = check_odd_window(window)
    sublook = sublook or SublookConfig()
    stack = extract_sublooks(slc, sublook, weighting)
    full = boxcar_coherency(slc, window)
    subs = [boxcar_coherency(im, window) for im in stack.images]

    rasters = {
        "m_fp": pm.m_fp(full),
        "one_minus_m_fp": pm.one_minus_m_fp(full),
        "span": pm.span(full),
        "p_v": pm.p_v(full),
        "entropy": pm.entropy(full),
        "rvi": pm.rvi(full),
    }
    for i, f in enumerate(subs, start=1):
        src = f"sublook:{i}"
        r = pm.one_minus_m_fp(f, src)
        r.metric_id = f"one_minus_m_fp_sub{i}"
        rasters[r.metric_id] = r
        s = pm.span(f, src)
        s.metric_id = f"span_sub{i}"
        rasters[s.metric_id] = s
    for r in pm.span_ratio(subs, full):
        rasters[r.metric_id] = r

    stat = ml_ratio(subs, full.n_samples, threshold)
    rasters["log_lambda"] = stat.log_lambda
    depol = [rasters[f"one_minus_m_fp_sub{i}"] for i in range(1, len(subs) + 1)]
    flags = flag_anisotropy(depol, stat, flag_thresholds, gate)
    rasters["flag"] = pm.MetricRaster(flags.level.astype(float), "flag", "sublooks", flags.n_invalid)

    mask = None
    if slopes is not None:
        mask = slope_mask(slopes, *slope_range)
        mask.check_matches(slc.shape)
        rasters["slope"] = pm.MetricRaster(slopes.values, "slope", "input")
    if p_c is not None:
        p_c = np.asarray(p_c, dtype=float)
        if p_c.shape != slc.shape:
            raise ShapeError(f"helix power raster {p_c.shape} does not match image {slc.shape}")
        rasters["p_c"] = pm.MetricRaster(p_c, "p_c", "input")

    weights = np.stack([rasters[f"span_ratio_{i}"].values for i in range(1, len(subs) + 1)])
    corr = correct(
        CorrectionInput(
            weights=np.nan_to_num(weights, nan=0.0),
            depol=np.stack([d.values for d in depol]),
            span=rasters["span"].values,
            p_v=rasters["p_v"].values,
            p_c=p_c,
        )
    )
    rasters["one_minus_m_fp_corrected"] = pm.MetricRaster(corr.depol, "one_minus_m_fp_corrected", "correction", corr.n_degenerate)
    rasters["m_fp_corrected"] = pm.MetricRaster(corr.m_fp, "m_fp_corrected", "correction")
    rasters["p_v_corrected"] = pm.MetricRaster(corr.p_v, "p_v_corrected", "correction")
    rasters["delta_p_v"] = pm.MetricRaster(corr.delta_p_v, "delta_p_v", "correction")
    if corr.p_c is not None:
        rasters["p_c_corrected"] = pm.MetricRaster(corr.p_c, "p_c_corrected", "correction")

    counters = {name: int(r.n_degenerate) for name, r in rasters.items() if r.n_degenerate}
    return Analysis(stack, full, subs, rasters, stat, flags, corr, mask, counters)


class VolumeCorrector(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`analyse`; ``transform`` returns the corrected ``1 - m_FP``."""

    def __init__(self, n_sub=3, overlap=0.0, taper="rectangular", compensate=False, window=9,
                 threshold=LOG_LAMBDA_THRESHOLD, flag_thresholds=FLAG_THRESHOLDS, gate=True):
        self.n_sub = n_sub
        self.overlap = overlap
        self.taper = taper
        self.compensate = compensate
        self.window = window
        self.threshold = threshold
        self.flag_thresholds = flag_thresholds
        self.gate = gate

    def fit(self, X, y=None):
        check_odd_window(self.window)
        self.config_ = SublookConfig(self.n_sub, self.overlap, self.taper, compensate_weighting=bool(self.compensate))
        return self

    def analyse(self, X) -> Analysis:
        check_is_fitted(self, "config_")
        self.analysis_ = analyse(
            check_slc(X), self.config_, self.window, self.threshold, self.flag_thresholds, self.gate
        )
        return self.analysis_

    def transform(self, X) -> np.ndarray:
        return self.analyse(X).correction.depol


# ---------------------------------------------------------------------------
# transects, scatter tables, quadrant grouping


@dataclass
class Transect:
    pixels: np.ndarray  # (n, 2) of (row, col)
    table: dict  # column name -> 1-D array of length n

    def __len__(self) -> int:
        return len(self.pixels)

    def columns(self) -> list[str]:
        return ["index", "row", "col", *self.table.keys()]

    def rows(self):
        for i, (r, c) in enumerate(self.pixels.tolist()):
            yield [i, r, c, *(float(v[i]) for v in self.table.values())]


def bresenham(r0: int, c0: int, r1: int, c1: int) -> np.ndarray:
    """Integer pixel path from (r0, c0) to (r1, c1), both ends included."""
    pts = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        pts.append((r, c))
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
    return np.array(pts, dtype=np.int64)


def extract_transect(rasters: dict, path) -> Transect:
    """Sample every raster along a segment ``((r0, c0), (r1, c1))`` or a pixel list."""
    if not rasters:
        raise ValidationError("no rasters to sample")
    arrays = {k: np.asarray(getattr(v, "values", v), dtype=float) for k, v in rasters.items()}
    shape = next(iter(arrays.values())).shape
    for k, a in arrays.items():
        if a.shape != shape:
            raise ShapeError(f"raster {k!r} has shape {a.shape}, expected {shape}")
    pts = np.asarray(path, dtype=np.int64)
    if pts.shape == (2, 2):
        pts = bresenham(*pts[0], *pts[1])
    elif pts.ndim == 1 and pts.shape == (2,):
        pts = pts[None]
    elif pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("path must be a segment ((r0, c0), (r1, c1)) or a list of (row, col)")
    if pts.size and (pts.min() < 0 or np.any(pts[:, 0] >= shape[0]) or np.any(pts[:, 1] >= shape[1])):
        raise ValueError(f"transect leaves the {shape} raster")
    table = {k: a[pts[:, 0], pts[:, 1]] for k, a in arrays.items()}
    return Transect(pts, table)


def scatter_rows(depol, ratios, mask=None):
    """(row, col, sublook, w_i, d_i) tuples for every selected pixel and sublook."""
    d = np.stack([np.asarray(getattr(x, "values", x), dtype=float) for x in depol])
    w = np.stack([np.asarray(getattr(x, "values", x), dtype=float) for x in ratios])
    if d.shape != w.shape:
        raise ShapeError(f"depolarisation {d.shape} and span ratios {w.shape} differ")
    sel = np.ones(d.shape[1:], bool) if mask is None else np.asarray(getattr(mask, "mask", mask), bool)
    if sel.shape != d.shape[1:]:
        raise ShapeError(f"mask {sel.shape} does not match rasters {d.shape[1:]}")
    rr, cc = np.nonzero(sel)
    for r, c in zip(rr.tolist(), cc.tolist()):
        for i in range(d.shape[0]):
            yield r, c, i + 1, float(w[i, r, c]), float(d[i, r, c])


def _look_field(look, window: int) -> CoherencyField:
    if isinstance(look, CoherencyField):
        return look
    return boxcar_coherency(check_slc(look), window)


def quadrant_group(looks, group: int | None, n_groups: int = 4, window: int = 1) -> CoherencyField:
    """Average coherency over one contiguous group of azimuth looks (``None`` = all)."""
    n = len(looks)
    if n == 0 or n % n_groups:
        raise ValueError(f"{n} looks cannot be split into {n_groups} equal groups")
    if group is None:
        chosen = looks
    else:
        if not 1 <= group <= n_groups:
            raise ValueError(f"group must be in 1..{n_groups}, got {group}")
        size = n // n_groups
        chosen = looks[(group - 1) * size : group * size]
    fields = [_look_field(lk, window) for lk in chosen]
    t = np.mean(np.stack([f.t for f in fields]), axis=0)
    n_samples = sum(f.n_samples for f in fields)
    return CoherencyField(t, window=fields[0].window, n_samples=n_samples)


def quadrant_span_ratios(looks, n_groups: int = 4, window: int = 1) -> list[np.ndarray]:
    """Share of the total power held by each group; ideally ``1 / n_groups`` each."""
    groups = [quadrant_group(looks, g, n_groups, window) for g in range(1, n_groups + 1)]
    spans = [pm.span(g).values for g in groups]
    total = np.sum(spans, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return [np.where(total > 0, s / np.where(total > 0, total, 1.0), np.nan) for s in spans]
