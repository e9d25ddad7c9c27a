"""Per-pixel polarimetric scalars computed from coherency fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError
from .linalg import herm_det, herm_eigvalsh, herm_trace
from .slc import CoherencyField

RADICAND_TOL = 1e-12
EIG_TOL = 1e-10

# Recorded in metadata so alternative RVI definitions can be compared later.
RVI_FORMULA = "8*s_hv/(s_hh+s_vv+2*s_hv)"

_RANGES = {
    "m_fp": (0.0, 1.0),
    "one_minus_m_fp": (0.0, 1.0),
    "entropy": (0.0, 1.0),
    "span": (0.0, np.inf),
    "p_v": (0.0, np.inf),
    "rvi": (0.0, np.inf),
    "span_ratio": (0.0, np.inf),
}


@dataclass
class MetricRaster:
    """A named scalar field plus the number of pixels that came out degenerate."""

    values: np.ndarray
    metric_id: str
    source: str = "full"
    n_degenerate: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def check_range(self) -> None:
        base = self.metric_id.split(":")[0]
        if base.startswith("span_ratio"):
            base = "span_ratio"
        if base not in _RANGES:
            return
        lo, hi = _RANGES[base]
        v = self.values[np.isfinite(self.values)]
        if v.size and (v.min() < lo or v.max() > hi):
            raise NumericalError(f"{self.metric_id} outside [{lo}, {hi}]")

    def to_meta(self) -> dict:
        d = dict(self.meta)
        d.update(metric_id=self.metric_id, source=self.source, n_degenerate=int(self.n_degenerate))
        return d


def _matrices(field_or_t) -> np.ndarray:
    if isinstance(field_or_t, CoherencyField):
        return field_or_t.t
    t = np.asarray(field_or_t, dtype=np.complex128)
    if t.shape[-2:] != (3, 3):
        raise ShapeError(f"expected (..., 3, 3) matrices, got {t.shape}")
    return t


def mfp_values(t: np.ndarray) -> tuple[np.ndarray, int]:
    """m_FP for an array of matrices; returns (values, degenerate count)."""
    tr = herm_trace(t)
    det = herm_det(t)
    good = tr > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        rad = 1.0 - 27.0 * det / np.where(good, tr, 1.0) ** 3
    rad = np.where((rad < 0) & (rad >= -RADICAND_TOL), 0.0, rad)
    rad = np.where((rad > 1) & (rad <= 1 + RADICAND_TOL), 1.0, rad)
    ok = good & (rad >= 0) & (rad <= 1)
    out = np.where(ok, np.sqrt(np.where(ok, rad, 0.0)), np.nan)
    return out, int(np.count_nonzero(~ok))


def m_fp(field: CoherencyField, source: str | None = None) -> MetricRaster:
    """3-D Barakat degree of polarisation, ``sqrt(1 - 27 det(T) / tr(T)^3)``.

    Zero-power pixels yield NaN and are counted in ``n_degenerate``.
    """
    values, bad = mfp_values(_matrices(field))
    return MetricRaster(values, "m_fp", source or "full", bad)


def one_minus_m_fp(field: CoherencyField, source: str | None = None) -> MetricRaster:
    m = m_fp(field, source)
    return MetricRaster(1.0 - m.values, "one_minus_m_fp", m.source, m.n_degenerate)


def span(field: CoherencyField, source: str | None = None) -> MetricRaster:
    return MetricRaster(herm_trace(_matrices(field)), "span", source or "full")


def p_v(field: CoherencyField, source: str | None = None) -> MetricRaster:
    """Volume power ``(1 - m_FP) * Span``."""
    t = _matrices(field)
    m, bad = mfp_values(t)
    return MetricRaster((1.0 - m) * herm_trace(t), "p_v", source or "full", bad)


def entropy(field: CoherencyField, source: str | None = None) -> MetricRaster:
    t = _matrices(field)
    tr = herm_trace(t)
    lam = herm_eigvalsh(t)
    if np.any(lam[..., 0] < -EIG_TOL * np.abs(tr)):
        raise NumericalError("coherency matrix has a negative eigenvalue beyond tolerance")
    lam = np.clip(lam, 0.0, None)
    good = tr > 0
    p = lam / np.where(good, tr, 1.0)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p) / np.log(3.0), 0.0)
    h = np.clip(terms.sum(axis=-1), 0.0, 1.0)
    h = np.where(good, h, np.nan)
    return MetricRaster(h, "entropy", source or "full", int(np.count_nonzero(~good)))


def lexicographic_powers(t: np.ndarray):
    """Backscatter powers (s_hh, s_hv, s_vv) recovered from Pauli-basis T."""
    t11, t22, t33 = t[..., 0, 0].real, t[..., 1, 1].real, t[..., 2, 2].real
    re12 = t[..., 0, 1].real
    s_hh = 0.5 * (t11 + t22 + 2.0 * re12)
    s_vv = 0.5 * (t11 + t22 - 2.0 * re12)
    s_hv = 0.5 * t33
    return s_hh, s_hv, s_vv


def rvi(field: CoherencyField, source: str | None = None) -> MetricRaster:
    s_hh, s_hv, s_vv = lexicographic_powers(_matrices(field))
    den = s_hh + s_vv + 2.0 * s_hv
    good = den > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(good, 8.0 * s_hv / np.where(good, den, 1.0), np.nan)
    return MetricRaster(
        values, "rvi", source or "full", int(np.count_nonzero(~good)),
        meta={"formula": RVI_FORMULA},
    )


def span_ratio(sub_fields, full_field: CoherencyField) -> list[MetricRaster]:
    """``Span_i / Span`` for every sublook field against the full-resolution field."""
    full = herm_trace(_matrices(full_field))
    good = full > 0
    out = []
    for i, sub in enumerate(sub_fields, start=1):
        ti = _matrices(sub)
        if ti.shape != _matrices(full_field).shape:
            raise ShapeError(f"sublook {i} shape {ti.shape[:-2]} != full {full.shape}")
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(good, herm_trace(ti) / np.where(good, full, 1.0), np.nan)
        out.append(
            MetricRaster(r, f"span_ratio_{i}", f"sublook:{i}", int(np.count_nonzero(~good)))
        )
    return out
