"""Raster exports: CSV triples, 8-bit PGM with sidecar scaling, PMTR float planes."""

from __future__ import annotations

import csv
import json

import numpy as np

from .metrics import MetricRaster
from .slc import load_metric_plane, save_metric_plane
from .stationarity import FLAG_LEVELS, AnisotropyFlags

FORMATS = ("csv", "pgm", "raw")

# Grey levels for the log10 Lambda banding: stationary, transition, anisotropic.
BAND_BLACK, BAND_GREY, BAND_WHITE = 0, 128, 255


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    img = np.asarray(image)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii"))
        fh.write(img.astype(np.uint8).tobytes())


def read_pgm(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    data = np.frombuffer(raw, dtype=np.uint8, offset=pos + 1, count=rows * cols)
    return data.reshape(rows, cols), maxval


def scale_to_bytes(values: np.ndarray):
    """Affine map of finite values onto 0..255; returns (bytes, vmin, vmax)."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if not finite.any():
        return np.zeros(v.shape, np.uint8), None, None
    vmin, vmax = float(v[finite].min()), float(v[finite].max())
    scale = 255.0 / (vmax - vmin) if vmax > vmin else 0.0
    out = np.where(finite, np.rint((np.where(finite, v, vmin) - vmin) * scale), 0)
    return out.astype(np.uint8), vmin, vmax


def write_metric_csv(path, values: np.ndarray, mask: np.ndarray | None = None) -> None:
    v = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        rows, cols = np.nonzero(np.ones(v.shape, bool) if mask is None else mask)
        for r, c in zip(rows.tolist(), cols.tolist()):
            w.writerow([r, c, repr(float(v[r, c]))])


def export_metric(raster: MetricRaster, base: str, formats=("raw",)) -> list[str]:
    """Write ``raster`` as ``base.{csv,pgm,pmtr}``; returns the written paths."""
    written = []
    for fmt in formats:
        if fmt == "csv":
            write_metric_csv(base + ".csv", raster.values)
            written.append(base + ".csv")
        elif fmt == "pgm":
            img, vmin, vmax = scale_to_bytes(raster.values)
            write_pgm(base + ".pgm", img)
            side = raster.to_meta()
            side.update(min=vmin, max=vmax, mapping="byte = round((value - min) * 255 / (max - min)); NaN -> 0")
            with open(base + ".pgm.json", "w") as fh:
                json.dump(side, fh, indent=2, sort_keys=True)
            written += [base + ".pgm", base + ".pgm.json"]
        elif fmt == "raw":
            save_metric_plane(raster.values, base + ".pmtr", raster.to_meta())
            written.append(base + ".pmtr")
        else:
            raise ValueError(f"unknown export format {fmt!r}; choose from {FORMATS}")
    return written


def load_metric(path) -> MetricRaster:
    values, meta = load_metric_plane(path)
    return MetricRaster(
        values, meta.get("metric_id", ""), meta.get("source", ""), int(meta.get("n_degenerate", 0)), meta
    )


def log_lambda_bands(values: np.ndarray) -> np.ndarray:
    """Black above -1 (stationary), grey on (-2, -1], white from -2 down. NaN is white."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, BAND_WHITE, dtype=np.uint8)
    with np.errstate(invalid="ignore"):
        out[(v > -2.0) & (v <= -1.0)] = BAND_GREY
        out[v > -1.0] = BAND_BLACK
    return out


def export_log_lambda_pgm(values: np.ndarray, path: str) -> None:
    write_pgm(path, log_lambda_bands(values))
    with open(path + ".json", "w") as fh:
        json.dump(
            {
                "bands": {
                    str(BAND_BLACK): "log10 Lambda > -1 (stationary)",
                    str(BAND_GREY): "-2 < log10 Lambda <= -1",
                    str(BAND_WHITE): "log10 Lambda <= -2 or undefined",
                }
            },
            fh,
            indent=2,
        )


def export_flags_pgm(flags: AnisotropyFlags, path: str) -> None:
    """Two-bit palette: PGM maxval 3, one grey level per flag level."""
    write_pgm(path, flags.level, maxval=3)
    with open(path + ".json", "w") as fh:
        json.dump(
            {
                "legend": {str(i): name for i, name in enumerate(FLAG_LEVELS)},
                "thresholds": list(flags.thresholds),
                "stationarity_gate": bool(flags.gated),
                "n_invalid": int(flags.n_invalid),
            },
            fh,
            indent=2,
        )
