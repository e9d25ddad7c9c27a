"""SLC data model, PSLC container I/O, Pauli vectors and boxcar coherency."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import CorruptFileError, FormatError, ShapeError, ValidationError

SQRT2 = np.sqrt(2.0)

_HEADER = struct.Struct("<4sHIIH")
_LEN = struct.Struct("<I")
_VERSION = 1
# Anything larger than this is treated as a corrupt header rather than a request
# to allocate terabytes.
_MAX_SAMPLES = 1 << 34

_META_KEYS = ("wavelength_m", "velocity_mps", "az_spacing_m", "prf_hz", "label")


@dataclass(frozen=True)
class AcqMeta:
    """Acquisition metadata carried alongside every SLC."""

    wavelength: float = 0.6897
    velocity: float = 100.0
    azimuth_spacing: float = 1.0
    prf: float = 100.0
    label: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("wavelength", "velocity", "azimuth_spacing", "prf"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")

    def to_dict(self) -> dict[str, Any]:
        d = dict(self.extra)
        d.update(
            wavelength_m=float(self.wavelength),
            velocity_mps=float(self.velocity),
            az_spacing_m=float(self.azimuth_spacing),
            prf_hz=float(self.prf),
            label=str(self.label),
        )
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AcqMeta":
        missing = [k for k in _META_KEYS if k not in d]
        if missing:
            raise ValidationError(f"metadata is missing keys: {missing}")
        extra = {k: v for k, v in d.items() if k not in _META_KEYS}
        return cls(
            wavelength=float(d["wavelength_m"]),
            velocity=float(d["velocity_mps"]),
            azimuth_spacing=float(d["az_spacing_m"]),
            prf=float(d["prf_hz"]),
            label=str(d["label"]),
            extra=extra,
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SlcImage:
    """Three-channel (HH, HV, VV) single-look complex image.

    ``data`` has shape ``(3, rows, cols)``; axis 1 is azimuth.
    """

    data: np.ndarray
    meta: AcqMeta = field(default_factory=AcqMeta)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128)
        if data.ndim != 3 or data.shape[0] != 3:
            raise ValidationError(f"expected (3, rows, cols) channel planes, got {data.shape}")
        if data.shape[1] < 2 or data.shape[2] < 1:
            raise ValidationError(f"need rows >= 2 and cols >= 1, got {data.shape[1:]}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("SLC contains non-finite samples")
        object.__setattr__(self, "data", _readonly(data))

    @classmethod
    def from_channels(cls, hh, hv, vv, meta: AcqMeta | None = None) -> "SlcImage":
        return cls(np.stack([hh, hv, vv]), meta or AcqMeta())

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def hh(self) -> np.ndarray:
        return self.data[0]

    @property
    def hv(self) -> np.ndarray:
        return self.data[1]

    @property
    def vv(self) -> np.ndarray:
        return self.data[2]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))


@dataclass(frozen=True)
class SlopeRaster:
    """Signed terrain slope per pixel, in degrees."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ValidationError(f"slope raster must be 2-D and non-empty, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("slope raster contains non-finite values")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class RasterMask:
    mask: np.ndarray
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mask", _readonly(np.array(self.mask, dtype=bool)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def check_matches(self, shape) -> None:
        if tuple(shape) != self.shape:
            raise ShapeError(f"mask {self.shape} does not match raster {tuple(shape)}")


@dataclass(frozen=True)
class CoherencyField:
    """Per-pixel 3x3 Hermitian coherency matrices, shape ``(rows, cols, 3, 3)``.

    ``n_samples`` is the number of looks averaged at interior pixels; ``counts``
    holds the actual (clipped) count for every pixel.
    """

    t: np.ndarray
    window: int = 1
    n_samples: int = 1
    counts: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.complex128)
        if t.ndim != 4 or t.shape[2:] != (3, 3):
            raise ValidationError(f"coherency must have shape (rows, cols, 3, 3), got {t.shape}")
        object.__setattr__(self, "t", _readonly(t))
        if self.counts is None:
            object.__setattr__(
                self, "counts", _readonly(np.full(t.shape[:2], self.n_samples, dtype=np.int64))
            )

    @classmethod
    def from_matrices(cls, t, n_samples: int = 1) -> "CoherencyField":
        """Wrap explicit matrices; a single 3x3 becomes a 1x1 field."""
        t = np.asarray(t, dtype=np.complex128)
        if t.shape == (3, 3):
            t = t[None, None]
        elif t.ndim == 3:
            t = t[None]
        return cls(t, window=1, n_samples=n_samples)

    @property
    def shape(self) -> tuple[int, int]:
        return self.t.shape[:2]

    def trace(self) -> np.ndarray:
        return np.trace(self.t, axis1=-2, axis2=-1).real

    def scaled(self, c: float) -> "CoherencyField":
        return CoherencyField(self.t * c, self.window, self.n_samples, self.counts)

    def validate(self, rtol: float = 1e-10) -> None:
        """Raise if any matrix is not Hermitian PSD within ``rtol * tr(T)``."""
        tr = self.trace()
        herm = np.max(np.abs(self.t - np.conj(np.swapaxes(self.t, -1, -2))), axis=(-2, -1))
        if np.any(herm > rtol * np.maximum(tr, 0) + 1e-300):
            raise ValidationError("coherency matrices are not Hermitian")
        lam_min = np.linalg.eigvalsh(self.t)[..., 0]
        if np.any(lam_min < -rtol * tr):
            raise ValidationError("coherency matrices are not positive semi-definite")


# ---------------------------------------------------------------------------
# container I/O


def _write_container(path, magic: bytes, meta: dict, planes: np.ndarray) -> None:
    nchan, rows, cols = planes.shape[0], planes.shape[1], planes.shape[2]
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, _VERSION, rows, cols, nchan))
        fh.write(_LEN.pack(len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(planes).tobytes())


def _read_container(path, magic: bytes, dtype, nchan_expected: int | None):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size + _LEN.size:
        raise FormatError(f"{path}: file too short for a header")
    got_magic, version, rows, cols, nchan = _HEADER.unpack_from(raw, 0)
    if got_magic != magic:
        raise FormatError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if nchan_expected is not None and nchan != nchan_expected:
        raise CorruptFileError(f"{path}: expected {nchan_expected} channels, header says {nchan}")
    if rows == 0 or cols == 0 or nchan == 0:
        raise CorruptFileError(f"{path}: degenerate dimensions {rows}x{cols}x{nchan}")
    if rows * cols * nchan > _MAX_SAMPLES:
        raise CorruptFileError(f"{path}: dimensions {rows}x{cols}x{nchan} overflow")
    (blob_len,) = _LEN.unpack_from(raw, _HEADER.size)
    offset = _HEADER.size + _LEN.size
    if offset + blob_len > len(raw):
        raise CorruptFileError(f"{path}: metadata blob truncated")
    try:
        meta = json.loads(raw[offset : offset + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"{path}: metadata is not valid JSON ({exc})") from exc
    offset += blob_len
    dt = np.dtype(dtype)
    expected = rows * cols * nchan * dt.itemsize
    if len(raw) - offset != expected:
        raise CorruptFileError(
            f"{path}: payload is {len(raw) - offset} bytes, header implies {expected}"
        )
    planes = np.frombuffer(raw, dtype=dt, offset=offset).reshape(nchan, rows, cols)
    return meta, planes


def save_slc(slc: SlcImage, path) -> None:
    _write_container(path, b"PSLC", slc.meta.to_dict(), slc.data.astype("<c8"))


def load_slc(path) -> SlcImage:
    meta, planes = _read_container(path, b"PSLC", "<c8", 3)
    if not np.all(np.isfinite(planes)):
        raise ValidationError(f"{path}: payload contains NaN or Inf samples")
    return SlcImage(planes.astype(np.complex128), AcqMeta.from_dict(meta))


def save_slope(slopes: SlopeRaster, path, meta: dict | None = None) -> None:
    _write_container(path, b"PSLP", meta or {}, slopes.values.astype("<f4")[None])


def load_slope(path) -> SlopeRaster:
    _, planes = _read_container(path, b"PSLP", "<f4", 1)
    return SlopeRaster(planes[0].astype(np.float64))


def save_metric_plane(values: np.ndarray, path, meta: dict) -> None:
    """Write a float32 ``PMTR`` raster (same header layout as PSLC, one plane)."""
    _write_container(path, b"PMTR", meta, np.asarray(values, dtype="<f4")[None])


def load_metric_plane(path) -> tuple[np.ndarray, dict]:
    meta, planes = _read_container(path, b"PMTR", "<f4", 1)
    return planes[0].astype(np.float64), meta


# ---------------------------------------------------------------------------
# Pauli vectors and coherency


def pauli_stack(slc: SlcImage) -> np.ndarray:
    """Pauli scattering vectors for every pixel, shape ``(3, rows, cols)``."""
    hh, hv, vv = slc.data
    return np.stack([(hh + vv) / SQRT2, (hh - vv) / SQRT2, SQRT2 * hv])


def pauli_vector(slc: SlcImage, row: int, col: int) -> np.ndarray:
    if not (0 <= row < slc.rows and 0 <= col < slc.cols):
        raise IndexError(f"pixel ({row}, {col}) outside {slc.shape}")
    hh, hv, vv = slc.data[:, row, col]
    return np.array([(hh + vv) / SQRT2, (hh - vv) / SQRT2, SQRT2 * hv])


def lexicographic_from_pauli(k: np.ndarray) -> np.ndarray:
    """Inverse of the Pauli basis change: returns stacked (HH, HV, VV)."""
    k = np.asarray(k)
    return np.stack([(k[0] + k[1]) / SQRT2, k[2] / SQRT2, (k[0] - k[1]) / SQRT2])


def _clipped_counts(n: int, half: int) -> np.ndarray:
    idx = np.arange(n)
    return np.minimum(idx + half, n - 1) - np.maximum(idx - half, 0) + 1


def boxcar_coherency(slc: SlcImage, window: int = 9) -> CoherencyField:
    """Boxcar estimate of T with border windows clipped to the image."""
    if int(window) != window or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")
    window = int(window)
    if window % 2 == 0:
        raise ValueError(f"window must be odd, got {window}")
    if window > min(slc.shape):
        raise ValueError(f"window {window} exceeds image dimensions {slc.shape}")
    k = pauli_stack(slc)
    rows, cols = slc.shape
    half = window // 2
    counts = np.outer(_clipped_counts(rows, half), _clipped_counts(cols, half))
    # uniform_filter returns sum / window**2 with zero padding.
    rescale = window * window / counts

    def box(a: np.ndarray) -> np.ndarray:
        if window == 1:
            return a
        return uniform_filter(a, size=window, mode="constant", cval=0.0) * rescale

    t = np.empty((rows, cols, 3, 3), dtype=np.complex128)
    for i in range(3):
        t[..., i, i] = box((k[i].real ** 2 + k[i].imag ** 2))
        for j in range(i + 1, 3):
            p = k[i] * np.conj(k[j])
            t[..., i, j] = box(p.real) + 1j * box(p.imag)
            t[..., j, i] = np.conj(t[..., i, j])
    return CoherencyField(t, window=window, n_samples=window * window, counts=_readonly(counts))


def slope_mask(slopes: SlopeRaster, lo: float = -2.0, hi: float = 2.0) -> RasterMask:
    if lo > hi:
        raise ValueError(f"empty slope interval [{lo}, {hi}]")
    v = slopes.values
    return RasterMask((v >= lo) & (v <= hi), note=f"slope within [{lo:g}, {hi:g}] deg")

