"""Span-weighted recombination of sublook depolarisation and the helix adjustment.

All functions broadcast: scalars, per-pixel rasters and transects all work.
Sublook quantities are stacked along axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

WEIGHT_SUM_TOL = 0.05


@dataclass
class CorrectionInput:
    weights: np.ndarray  # Span_i / Span, shape (n_sub, ...)
    depol: np.ndarray  # 1 - m_FP of each sublook, shape (n_sub, ...)
    span: np.ndarray
    p_v: np.ndarray
    p_c: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.depol = np.asarray(self.depol, dtype=float)
        self.span = np.asarray(self.span, dtype=float)
        self.p_v = np.asarray(self.p_v, dtype=float)
        if self.p_c is not None:
            self.p_c = np.asarray(self.p_c, dtype=float)
        if self.weights.shape != self.depol.shape:
            raise ValidationError(f"weights {self.weights.shape} and depolarisation {self.depol.shape} differ")
        if np.any(self.weights < 0):
            raise ValidationError("span ratios must be non-negative")


@dataclass
class CorrectionOutput:
    depol: np.ndarray
    m_fp: np.ndarray
    p_v: np.ndarray
    delta_p_v: np.ndarray
    p_c: np.ndarray | None
    weight_sum: np.ndarray
    weight_deviation: np.ndarray  # True where |sum w_i - 1| > WEIGHT_SUM_TOL
    n_degenerate: int = 0


def corrected_depolarisation(weights, depol) -> tuple[np.ndarray, np.ndarray, int]:
    """``sum_i w_i d_i``; weights are used as measured, never renormalised.

    Returns (corrected depolarisation, weight sum, degenerate count). Pixels
    whose weights are all zero are NaN.
    """
    w = np.asarray(weights, dtype=float)
    d = np.asarray(depol, dtype=float)
    wsum = w.sum(axis=0)
    dead = ~(np.any(w > 0, axis=0))
    out = np.where(dead, np.nan, (w * d).sum(axis=0))
    return out, wsum, int(np.count_nonzero(dead))


def corrected_volume(span, p_v, depol_corrected):
    """(P_v', Delta P_v, m_FP') for the corrected depolarisation factor."""
    span = np.asarray(span, dtype=float)
    d = np.asarray(depol_corrected, dtype=float)
    ok = span > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        pv_new = np.where(ok, d * span, np.nan)
        delta = pv_new - np.asarray(p_v, dtype=float)
        m_new = np.where(ok, (span - pv_new) / np.where(ok, span, 1.0), np.nan)
    return pv_new, delta, m_new


def adjust_helix(p_c, delta_p_v, span, p_v):
    """Helix power after the volume change: ``P_c (1 - dP_v / (Span - P_v))``.

    Undefined (NaN) for fully unpolarised pixels where ``Span == P_v``.
    """
    p_c = np.asarray(p_c, dtype=float)
    denom = np.asarray(span, dtype=float) - np.asarray(p_v, dtype=float)
    ok = denom > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ok, p_c * (1.0 - np.asarray(delta_p_v, dtype=float) / np.where(ok, denom, 1.0)), np.nan)


def correct(inp: CorrectionInput) -> CorrectionOutput:
    d_new, wsum, dead = corrected_depolarisation(inp.weights, inp.depol)
    pv_new, delta, m_new = corrected_volume(inp.span, inp.p_v, d_new)
    pc_new = None if inp.p_c is None else adjust_helix(inp.p_c, delta, inp.span, inp.p_v)
    with np.errstate(invalid="ignore"):
        deviation = np.abs(wsum - 1.0) > WEIGHT_SUM_TOL
    bad = dead + int(np.count_nonzero(~(np.asarray(inp.span) > 0) & ~np.isnan(d_new)))
    return CorrectionOutput(d_new, m_new, pv_new, delta, pc_new, wsum, deviation, bad)
