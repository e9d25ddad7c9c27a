"""Synthetic polarimetric SLC scenes with known ground truth.

Every region is a full-azimuth column strip of circular complex Gaussian
speckle whose azimuth spectrum is confined to a set of normalised Doppler
intervals. Confining the spectrum is how anisotropy is emulated: power that
only exists in part of the Doppler band is only seen by part of the aperture.

Regions belong to a ``layer``. Strips within a layer must be disjoint and
layer 0 must cover every column; higher layers are added on top, which is how
several mechanisms (or thermal noise) are mixed inside one strip.

Random streams: numpy ``PCG64`` seeded per column by
``SeedSequence([rng_seed, layer, region_index, column])``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError, ValidationError
from .slc import AcqMeta, SlcImage, lexicographic_from_pauli

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence([rng_seed, layer, region_index, column])"
DOPPLER_SUPPORT_LABEL = "band-limited Doppler support (emulated azimuthal anisotropy)"


def normalized_frequencies(n: int) -> np.ndarray:
    """Normalised Doppler frequency of each unshifted FFT bin, in [-0.5, 0.5)."""
    b = np.arange(n)
    return b / n - (b >= n / 2)


def support_mask(n: int, intervals) -> np.ndarray:
    f = normalized_frequencies(n)
    mask = np.zeros(n, dtype=bool)
    for lo, hi in intervals:
        mask |= (f >= lo) & (f < hi)
    return mask


def _check_sigma(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.complex128)
    if s.shape != (3, 3):
        raise ValidationError(f"sigma must be 3x3, got {s.shape}")
    tr = np.trace(s).real
    if not np.all(np.isfinite(s)):
        raise ValidationError("sigma has non-finite entries")
    if np.max(np.abs(s - s.conj().T)) > 1e-10 * max(tr, 1e-300):
        raise ValidationError("sigma is not Hermitian")
    if np.linalg.eigvalsh(s)[0] < -1e-12 * max(tr, 0.0):
        raise ValidationError("sigma is not positive semi-definite")
    return s


@dataclass
class RegionSpec:
    col_start: int
    col_end: int
    sigma: np.ndarray = field(default_factory=lambda: np.eye(3))
    doppler_support: list = field(default_factory=lambda: [(-0.5, 0.5)])
    layer: int = 0

    def __post_init__(self):
        self.sigma = _check_sigma(self.sigma)
        ivs = sorted((float(lo), float(hi)) for lo, hi in self.doppler_support)
        if not ivs:
            raise ValidationError("doppler_support is empty")
        for lo, hi in ivs:
            if not (-0.5 <= lo < hi <= 0.5):
                raise ValidationError(f"support interval [{lo}, {hi}) outside [-0.5, 0.5)")
        for (_, h0), (l1, _) in zip(ivs, ivs[1:]):
            if l1 < h0:
                raise ValidationError("doppler_support intervals overlap")
        self.doppler_support = ivs
        if self.col_end <= self.col_start or self.col_start < 0:
            raise ValidationError(f"bad column strip [{self.col_start}, {self.col_end})")

    def to_dict(self) -> dict:
        s = self.sigma
        return {
            "col_start": int(self.col_start),
            "col_end": int(self.col_end),
            "sigma_re": s.real.tolist(),
            "sigma_im": s.imag.tolist(),
            "doppler_support": [list(iv) for iv in self.doppler_support],
            "layer": int(self.layer),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        sigma = np.asarray(d.get("sigma_re", d.get("sigma", np.eye(3))), dtype=float)
        if "sigma_im" in d:
            sigma = sigma + 1j * np.asarray(d["sigma_im"], dtype=float)
        return cls(
            col_start=int(d["col_start"]),
            col_end=int(d["col_end"]),
            sigma=sigma,
            doppler_support=[tuple(iv) for iv in d.get("doppler_support", [(-0.5, 0.5)])],
            layer=int(d.get("layer", 0)),
        )


@dataclass
class SceneSpec:
    rows: int
    cols: int
    regions: list = field(default_factory=list)
    point_targets: list = field(default_factory=list)
    rng_seed: int = 0
    meta: AcqMeta = field(default_factory=AcqMeta)

    def validate(self) -> None:
        if self.rows < 2 or self.cols < 1:
            raise ValidationError(f"scene must be at least 2x1, got {self.rows}x{self.cols}")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be unsigned")
        layers: dict[int, list] = {}
        for r in self.regions:
            if r.col_end > self.cols:
                raise ValidationError(f"region [{r.col_start}, {r.col_end}) exceeds {self.cols} cols")
            layers.setdefault(r.layer, []).append(r)
        for layer, regs in layers.items():
            regs = sorted(regs, key=lambda r: r.col_start)
            for a, b in zip(regs, regs[1:]):
                if b.col_start < a.col_end:
                    raise ValidationError(f"overlapping strips in layer {layer}")
            if layer == 0:
                covered = sum(r.col_end - r.col_start for r in regs)
                if covered != self.cols:
                    raise ValidationError("layer-0 regions must cover every column")
        if layers and 0 not in layers:
            raise ValidationError("overlay layers need a layer-0 base covering every column")
        for pt in self.point_targets:
            row, col = int(pt[0]), int(pt[1])
            if not (0 <= row < self.rows and 0 <= col < self.cols):
                raise ValidationError(f"point target ({row}, {col}) outside scene")

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "rng_seed": int(self.rng_seed),
            "meta": self.meta.to_dict(),
            "regions": [r.to_dict() for r in self.regions],
            "point_targets": [
                {
                    "row": int(p[0]),
                    "col": int(p[1]),
                    "amp_re": np.real(p[2]).tolist(),
                    "amp_im": np.imag(p[2]).tolist(),
                }
                for p in self.point_targets
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        try:
            spec = cls(
                rows=int(d["rows"]),
                cols=int(d["cols"]),
                regions=[RegionSpec.from_dict(r) for r in d.get("regions", [])],
                point_targets=[
                    (
                        int(p["row"]),
                        int(p["col"]),
                        np.asarray(p["amp_re"], float) + 1j * np.asarray(p.get("amp_im", [0, 0, 0]), float),
                    )
                    for p in d.get("point_targets", [])
                ],
                rng_seed=int(d.get("rng_seed", 0)),
                meta=AcqMeta.from_dict(d["meta"]) if "meta" in d else AcqMeta(),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scene description: {exc!r}") from exc
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path) -> "SceneSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _factor(sigma: np.ndarray) -> np.ndarray:
    """Matrix L with L L^H = sigma, tolerant of rank deficiency."""
    lam, vec = np.linalg.eigh(sigma)
    tr = np.trace(sigma).real
    if lam[0] < -1e-12 * tr:
        raise ValidationError("sigma is not positive semi-definite")
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def analytic_mfp(sigma) -> float:
    """Exact degree of polarisation of a coherency matrix (ground-truth oracle)."""
    s = np.asarray(sigma, dtype=np.complex128)
    tr = float(np.trace(s).real)
    if not tr > 0:
        raise NumericalError(f"trace must be positive, got {tr}")
    det = float(np.linalg.det(s).real)
    rad = 1.0 - 27.0 * det / tr ** 3
    if -1e-12 <= rad < 0:
        rad = 0.0
    elif 1 < rad <= 1 + 1e-12:
        rad = 1.0
    if not 0.0 <= rad <= 1.0:
        raise NumericalError(f"radicand {rad} outside [0, 1]; sigma is not PSD")
    return float(np.sqrt(rad))


def _column_stream(seed: int, layer: int, region: int, col: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, layer, region, col])))


def simulate_pauli(spec: SceneSpec) -> np.ndarray:
    """Pauli-basis scene, shape ``(3, rows, cols)``."""
    spec.validate()
    rows, cols = spec.rows, spec.cols
    k = np.zeros((3, rows, cols), dtype=np.complex128)
    for idx, region in enumerate(spec.regions):
        factor = _factor(region.sigma)
        keep = support_mask(rows, region.doppler_support)
        measure = keep.sum() / rows
        if measure == 0:
            raise ValidationError(f"region {idx} support contains no frequency bins at {rows} rows")
        gain = 1.0 / np.sqrt(measure)
        width = region.col_end - region.col_start
        z = np.empty((rows, 3, width), dtype=np.complex128)
        for j in range(width):
            g = _column_stream(spec.rng_seed, region.layer, idx, region.col_start + j)
            z[:, :, j] = (g.standard_normal((rows, 3)) + 1j * g.standard_normal((rows, 3))) / np.sqrt(2.0)
        strip = np.einsum("ab,rbc->arc", factor, z)
        if not keep.all():
            spec_f = np.fft.fft(strip, axis=1, norm="ortho")
            spec_f[:, ~keep, :] = 0.0
            strip = np.fft.ifft(spec_f * gain, axis=1, norm="ortho")
        k[:, :, region.col_start : region.col_end] += strip
    for row, col, amp in spec.point_targets:
        k[:, int(row), int(col)] += np.asarray(amp, dtype=np.complex128)
    return k


def simulate(spec: SceneSpec) -> SlcImage:
    """Lexicographic SLC; its metadata carries ``synthetic: true``."""
    meta = replace(spec.meta, extra={**spec.meta.extra, "synthetic": True})
    return SlcImage(lexicographic_from_pauli(simulate_pauli(spec)), meta)


def ground_truth(spec: SceneSpec) -> dict:
    """Sidecar content: per-region sigma, analytic m_FP and Doppler support."""
    regions = []
    for idx, r in enumerate(spec.regions):
        d = r.to_dict()
        d["index"] = idx
        d["analytic_mfp"] = analytic_mfp(r.sigma) if np.trace(r.sigma).real > 0 else None
        d["support_measure"] = float(support_mask(spec.rows, r.doppler_support).mean())
        regions.append(d)
    return {
        "rows": spec.rows,
        "cols": spec.cols,
        "rng_seed": int(spec.rng_seed),
        "rng_algorithm": RNG_ALGORITHM,
        "anisotropy_model": DOPPLER_SUPPORT_LABEL,
        "regions": regions,
        "point_targets": spec.to_dict()["point_targets"],
    }
