"""Azimuth subaperture (sublook) decomposition of SLC images.

Spectra use the orthonormal DFT along azimuth (axis 1 of the channel stack),
so energy is preserved exactly and band-disjoint sublooks partition it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateSpectrumError, ValidationError
from .scene import normalized_frequencies
from .slc import SlcImage, load_slc, save_slc
from .validation import check_slc

TAPERS = ("rectangular", "raised-cosine")
WEIGHT_FLOOR = 1e-3
MANIFEST_NAME = "sublooks.json"

_CHANNELS = {"hh": 0, "hv": 1, "vv": 2}


def doppler_frequency(velocity: float, wavelength: float, look_angle: float) -> float:
    """Doppler frequency (Hz) seen at azimuth look angle ``look_angle`` (rad)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * velocity / wavelength * np.sin(look_angle)


def azimuth_interval(wavelength: float, az_resolution: float) -> float:
    """Azimuth observation interval (rad) needed for resolution ``az_resolution``."""
    if az_resolution <= 0:
        raise ValueError("azimuth resolution must be positive")
    return wavelength / (2.0 * az_resolution)


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float
    taper: str = "rectangular"
    rolloff: float = 0.0

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def response(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.taper == "rectangular" or self.rolloff == 0:
            return ((f >= self.lo) & (f < self.hi)).astype(float)
        half = 0.5 * self.width
        u = np.abs(f - self.center)
        flat = (1.0 - self.rolloff) * half
        edge = (1.0 + self.rolloff) * half
        g = 0.5 * (1.0 + np.cos(np.pi * (u - flat) / (self.rolloff * self.width)))
        return np.where(u <= flat, 1.0, np.where(u <= edge, g, 0.0))

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "width": self.width,
            "lo": self.lo,
            "hi": self.hi,
            "taper": self.taper,
            "rolloff": self.rolloff,
        }


@dataclass
class SublookConfig:
    n_sub: int = 3
    overlap: float = 0.0
    taper: str = "rectangular"
    rolloff: float = 0.5
    compensate_weighting: bool = False

    def __post_init__(self):
        if int(self.n_sub) != self.n_sub or self.n_sub < 2:
            raise ValidationError(f"n_sub must be an integer >= 2, got {self.n_sub!r}")
        if not 0.0 <= self.overlap <= 0.9:
            raise ValidationError(f"overlap fraction must lie in [0, 0.9], got {self.overlap}")
        if self.taper not in TAPERS:
            raise ValidationError(f"taper must be one of {TAPERS}, got {self.taper!r}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValidationError(f"roll-off must lie in [0, 1], got {self.rolloff}")
        self.n_sub = int(self.n_sub)

    def bands(self) -> list[Band]:
        """Bands tiling [-0.5, 0.5) in order of increasing centre frequency."""
        n, o = self.n_sub, self.overlap
        width = 1.0 / (n - (n - 1) * o)
        step = width * (1.0 - o)
        lows = [-0.5 + i * step for i in range(n)]
        if o == 0:
            # Adjacent bands share the same float edge so every bin lands in one band.
            highs = lows[1:] + [0.5]
        else:
            highs = [lo + width for lo in lows[:-1]] + [0.5]
        rolloff = self.rolloff if self.taper == "raised-cosine" else 0.0
        return [Band(lo, hi, self.taper, rolloff) for lo, hi in zip(lows, highs)]

    def to_dict(self) -> dict:
        return {
            "n_sub": self.n_sub,
            "overlap": self.overlap,
            "taper": self.taper,
            "rolloff": self.rolloff,
            "compensate_weighting": self.compensate_weighting,
        }


def azimuth_spectrum(slc: SlcImage, channel="hh") -> np.ndarray:
    """Unitary azimuth DFT of one channel, shape ``(rows, cols)``."""
    idx = _CHANNELS[channel] if isinstance(channel, str) else int(channel)
    return np.fft.fft(slc.data[idx], axis=0, norm="ortho")


def estimate_weighting(slc: SlcImage) -> np.ndarray:
    """Average azimuth magnitude spectrum, smoothed and normalised to unit mean."""
    if slc.cols < 16:
        raise ValueError(f"need at least 16 range columns to estimate a weighting, got {slc.cols}")
    mag = np.abs(np.fft.fft(slc.data, axis=1, norm="ortho")).mean(axis=(0, 2))
    length = max(3, slc.rows // 64)
    smooth = uniform_filter1d(mag, size=length, mode="wrap")
    mean = smooth.mean()
    if not mean > 0:
        raise DegenerateSpectrumError("image has no azimuth spectral energy")
    return smooth / mean


def _split(data: np.ndarray, bands, weighting) -> list[np.ndarray]:
    rows = data.shape[1]
    spec = np.fft.fft(data, axis=1, norm="ortho")
    if weighting is not None:
        w = np.asarray(weighting, dtype=float)
        if w.shape != (rows,):
            raise ValidationError(f"weighting has length {w.shape}, image has {rows} rows")
        spec = spec / np.maximum(w, WEIGHT_FLOOR * w.max())[None, :, None]
    f = normalized_frequencies(rows)
    return [
        np.fft.ifft(spec * band.response(f)[None, :, None], axis=1, norm="ortho") for band in bands
    ]


@dataclass
class SublookStack:
    images: list
    bands: list
    weighting: np.ndarray
    config: SublookConfig = field(default_factory=SublookConfig)
    source: str = ""

    def __post_init__(self):
        shapes = {im.shape for im in self.images}
        if len(shapes) != 1:
            raise ValidationError(f"sublook images differ in shape: {shapes}")
        order = np.argsort([b.center for b in self.bands], kind="stable")
        self.images = [self.images[i] for i in order]
        self.bands = [self.bands[i] for i in order]

    @property
    def n_sub(self) -> int:
        return len(self.images)

    @property
    def shape(self):
        return self.images[0].shape

    def energies(self) -> np.ndarray:
        return np.array([im.energy() for im in self.images])

    def manifest(self) -> dict:
        return {
            "n_sub": self.n_sub,
            "config": self.config.to_dict(),
            "bands": [b.to_dict() for b in self.bands],
            "compensate_weighting": self.config.compensate_weighting,
            "weighting": np.asarray(self.weighting, dtype=float).tolist(),
            "files": [f"sublook_{i}.pslc" for i in range(1, self.n_sub + 1)],
            "source": self.source,
        }

    def save(self, directory) -> str:
        os.makedirs(directory, exist_ok=True)
        man = self.manifest()
        for name, im in zip(man["files"], self.images):
            save_slc(im, os.path.join(directory, name))
        path = os.path.join(directory, MANIFEST_NAME)
        with open(path, "w") as fh:
            json.dump(man, fh, indent=2, sort_keys=True)
        return path

    @classmethod
    def load(cls, path) -> "SublookStack":
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        with open(path) as fh:
            man = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        images = [load_slc(os.path.join(base, name)) for name in man["files"]]
        bands = [Band(b["lo"], b["hi"], b["taper"], b["rolloff"]) for b in man["bands"]]
        cfg = SublookConfig(**man["config"])
        return cls(images, bands, np.asarray(man["weighting"], dtype=float), cfg, man.get("source", ""))


def extract_sublooks(slc: SlcImage, cfg: SublookConfig | None = None, weighting=None) -> SublookStack:
    """Split ``slc`` into ``cfg.n_sub`` reduced-bandwidth images.

    With compensation on, the weighting is estimated from ``slc`` unless a
    precomputed profile is passed (e.g. one fitted on a reference image).
    """
    cfg = cfg or SublookConfig()
    if slc.rows < 4 * cfg.n_sub:
        raise ValueError(f"{slc.rows} azimuth rows is too few for {cfg.n_sub} sublooks")
    if cfg.compensate_weighting and weighting is None:
        weighting = estimate_weighting(slc)
    bands = cfg.bands()
    parts = _split(slc.data, bands, weighting if cfg.compensate_weighting else None)
    images = [SlcImage(p, slc.meta) for p in parts]
    w = np.ones(slc.rows) if weighting is None or not cfg.compensate_weighting else np.asarray(weighting)
    return SublookStack(images, bands, w, cfg, source=slc.meta.label)


class SublookDecomposer(TransformerMixin, BaseEstimator):
    """Estimator front-end for :func:`extract_sublooks`.

    ``fit`` freezes the weighting profile (when compensating) so that
    ``transform`` is linear in its input.
    """

    def __init__(self, n_sub=3, overlap=0.0, taper="rectangular", rolloff=0.5, compensate=False):
        self.n_sub = n_sub
        self.overlap = overlap
        self.taper = taper
        self.rolloff = rolloff
        self.compensate = compensate

    def _config(self) -> SublookConfig:
        return SublookConfig(self.n_sub, self.overlap, self.taper, self.rolloff, bool(self.compensate))

    def fit(self, X, y=None):
        slc = check_slc(X)
        self.config_ = self._config()
        self.bands_ = self.config_.bands()
        self.n_rows_ = slc.rows
        self.weighting_ = estimate_weighting(slc) if self.compensate else np.ones(slc.rows)
        return self

    def transform(self, X) -> SublookStack:
        check_is_fitted(self, "weighting_")
        slc = check_slc(X)
        if slc.rows != self.n_rows_:
            raise ValidationError(f"fitted on {self.n_rows_} rows, got {slc.rows}")
        return extract_sublooks(slc, self.config_, self.weighting_)
