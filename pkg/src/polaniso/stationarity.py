"""Wishart likelihood-ratio stationarity test across sublooks and anisotropy flags.

The statistic is the standard complex-Wishart equality-of-covariances ratio

    Lambda = ( prod_i det(T_i) / det(mean_i T_i) ** n_sub ) ** N

reported as ``log10(Lambda)``. It is 1 when every sublook shares the same
coherency and strictly below 1 otherwise (concavity of log det).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ShapeError, ValidationError
from .metrics import MetricRaster, mfp_values
from .slc import CoherencyField, RasterMask, boxcar_coherency
from .sublook import SublookConfig, extract_sublooks
from .validation import check_odd_window, check_slc

LOG_LAMBDA_THRESHOLD = -1.0
FLAG_THRESHOLDS = (0.1, 0.15, 0.2)
FLAG_LEVELS = ("none", "weak", "moderate", "strong")
# Pooled determinant at or below this is treated as singular.
DET_FLOOR = 1e-300
STATISTIC_FORM = "log10[(prod_i det T_i / det(mean T)^n_sub)^N]"


@dataclass
class StationarityResult:
    log_lambda: MetricRaster
    threshold: float = LOG_LAMBDA_THRESHOLD
    n_samples: int = 81

    @property
    def stationary(self) -> np.ndarray:
        """True where the pixel passes the isotropy test (strict ``>``)."""
        return self.log_lambda.values > self.threshold


@dataclass
class AnisotropyFlags:
    level: np.ndarray
    spread: np.ndarray
    thresholds: tuple = FLAG_THRESHOLDS
    gated: bool = True
    n_invalid: int = 0
    legend: dict = field(default_factory=lambda: dict(enumerate(FLAG_LEVELS)))

    def at_least(self, name: str) -> np.ndarray:
        return self.level >= FLAG_LEVELS.index(name)


def _stack(sub_fields) -> np.ndarray:
    mats = [f.t if isinstance(f, CoherencyField) else np.asarray(f, dtype=np.complex128) for f in sub_fields]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise ShapeError(f"sublook coherency fields differ in shape: {sorted(shapes)}")
    return np.stack(mats)


def ml_ratio(sub_fields, n_samples: int | None = None, threshold: float = LOG_LAMBDA_THRESHOLD) -> StationarityResult:
    """log10 of the Wishart ratio for every pixel.

    ``n_samples`` defaults to the fields' own ``n_samples``. Pixels whose pooled
    matrix is singular are NaN and counted; a singular individual sublook gives
    ``-inf`` (maximally non-stationary).
    """
    if len(sub_fields) < 2:
        raise ValidationError("need at least two sublook fields")
    if n_samples is None:
        n_samples = getattr(sub_fields[0], "n_samples", None)
        if n_samples is None:
            raise ValidationError("n_samples must be given for raw matrices")
    if n_samples < 9:
        raise ValidationError(f"n_samples must be >= 9, got {n_samples}")
    t = _stack(sub_fields)
    n_sub = t.shape[0]
    mean = t.mean(axis=0)
    sign_bar, logdet_bar = np.linalg.slogdet(mean)
    sign_i, logdet_i = np.linalg.slogdet(t)
    singular_bar = (sign_bar.real <= 0) | (logdet_bar <= np.log(DET_FLOOR))
    singular_i = np.any(sign_i.real <= 0, axis=0)
    with np.errstate(invalid="ignore"):
        ln_lambda = n_samples * (np.where(sign_i.real > 0, logdet_i, 0.0).sum(axis=0) - n_sub * logdet_bar)
    log10 = ln_lambda / np.log(10.0)
    log10 = np.where(singular_i, -np.inf, log10)
    log10 = np.where(singular_bar, np.nan, log10)
    raster = MetricRaster(
        log10,
        "log_lambda",
        "sublooks",
        int(np.count_nonzero(singular_bar)),
        meta={"n_samples": int(n_samples), "n_sub": int(n_sub), "form": STATISTIC_FORM},
    )
    return StationarityResult(raster, threshold, int(n_samples))


def classify(result: StationarityResult, threshold: float | None = None) -> RasterMask:
    """Stationary (isotropic) where ``log10 Lambda > threshold``."""
    thr = result.threshold if threshold is None else threshold
    with np.errstate(invalid="ignore"):
        mask = result.log_lambda.values > thr
    return RasterMask(mask, note=f"stationary: log10 Lambda > {thr:g}")


def depolarisation_spread(sub_depol) -> tuple[np.ndarray, np.ndarray]:
    """Largest pairwise difference of per-sublook ``1 - m_FP``; second item flags NaN."""
    d = np.stack([np.asarray(getattr(x, "values", x), dtype=float) for x in sub_depol])
    bad = np.any(~np.isfinite(d), axis=0)
    spread = np.where(bad, np.nan, np.nanmax(d, axis=0) - np.nanmin(d, axis=0)) if d.size else d
    return spread, bad


def flag_anisotropy(
    sub_depol,
    stat: StationarityResult | None = None,
    thresholds=FLAG_THRESHOLDS,
    gate: bool = True,
) -> AnisotropyFlags:
    """Grade pixels by how much their sublook depolarisation factors disagree.

    With ``gate`` on, only pixels the ML ratio calls stationary can be flagged:
    the interesting case is a pixel that passes the isotropy test yet shows
    different depolarisation across the aperture.
    """
    thresholds = tuple(sorted(float(x) for x in thresholds))
    if len(thresholds) != 3:
        raise ValidationError("expected three thresholds (weak, moderate, strong)")
    with np.errstate(invalid="ignore"):
        spread, bad = depolarisation_spread(sub_depol)
        level = np.zeros(spread.shape, dtype=np.uint8)
        for lvl, thr in enumerate(thresholds, start=1):
            level[np.nan_to_num(spread, nan=-1.0) > thr] = lvl
    if gate:
        if stat is None:
            raise ValidationError("stationarity gate requested without a stationarity result")
        if stat.log_lambda.shape != spread.shape:
            raise ShapeError("stationarity raster does not match depolarisation rasters")
        level[~stat.stationary] = 0
    level[bad] = 0
    return AnisotropyFlags(level, spread, thresholds, gate, int(np.count_nonzero(bad)))


class AnisotropyDetector(ClassifierMixin, BaseEstimator):
    """Sublook split, boxcar coherency, ML ratio and flags in one estimator.

    ``predict`` returns per-pixel flag levels (0 none .. 3 strong);
    ``decision_function`` returns ``log10 Lambda``.
    """

    def __init__(
        self,
        n_sub=3,
        overlap=0.0,
        taper="rectangular",
        compensate=False,
        window=9,
        threshold=LOG_LAMBDA_THRESHOLD,
        flag_thresholds=FLAG_THRESHOLDS,
        gate=True,
    ):
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
        self.classes_ = np.arange(len(FLAG_LEVELS))
        return self

    def _fields(self, X):
        check_is_fitted(self, "config_")
        stack = extract_sublooks(check_slc(X), self.config_)
        return [boxcar_coherency(im, self.window) for im in stack.images]

    def decision_function(self, X) -> np.ndarray:
        return ml_ratio(self._fields(X), threshold=self.threshold).log_lambda.values

    def predict(self, X) -> np.ndarray:
        fields = self._fields(X)
        stat = ml_ratio(fields, threshold=self.threshold)
        depol = [1.0 - mfp_values(f.t)[0] for f in fields]
        return flag_anisotropy(depol, stat, self.flag_thresholds, self.gate).level
