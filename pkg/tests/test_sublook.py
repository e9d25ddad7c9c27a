import numpy as np
import pytest

from polaniso.errors import DegenerateSpectrumError, ValidationError
from polaniso.scene import RegionSpec, SceneSpec, simulate, support_mask
from polaniso.slc import SlcImage
from polaniso.sublook import (
    SublookConfig,
    SublookDecomposer,
    SublookStack,
    azimuth_interval,
    azimuth_spectrum,
    doppler_frequency,
    estimate_weighting,
    extract_sublooks,
)

from conftest import BAND2, BAND3, white_slc

# Independent high-precision evaluations (mpmath, 30 digits).
FD_100_06897_01 = 28.949809089989315
DPHI_06897_15 = 0.2299
DPHI_02309_125 = 0.009236


def test_doppler_frequency():
    assert doppler_frequency(100, 0.6897, 0.0) == 0.0
    assert doppler_frequency(100, 0.6897, 0.1) == pytest.approx(FD_100_06897_01, rel=1e-14)
    # the commonly quoted 28.953 Hz agrees only to rounding
    assert doppler_frequency(100, 0.6897, 0.1) == pytest.approx(28.953, abs=5e-3)
    assert doppler_frequency(100, 0.6897, -0.1) == -doppler_frequency(100, 0.6897, 0.1)
    with pytest.raises(ValueError):
        doppler_frequency(100, 0.0, 0.1)


def test_azimuth_interval():
    assert azimuth_interval(0.6897, 1.5) == pytest.approx(DPHI_06897_15, rel=1e-12)
    assert azimuth_interval(0.2309, 12.5) == pytest.approx(DPHI_02309_125, rel=1e-12)
    assert azimuth_interval(0.2309, 25.0) == pytest.approx(azimuth_interval(0.2309, 12.5) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        azimuth_interval(0.2, 0.0)


def test_point_target_spectrum_is_flat():
    data = np.zeros((3, 64, 4), complex)
    data[0, 10, 1] = 1.0
    mag = np.abs(azimuth_spectrum(SlcImage(data))[:, 1])
    np.testing.assert_allclose(mag, mag[0], rtol=1e-9)


def test_spectrum_parseval():
    slc = white_slc(128, 3, seed=1)
    s = azimuth_spectrum(slc, "hv")
    assert np.sum(np.abs(s) ** 2) == pytest.approx(np.sum(np.abs(slc.hv) ** 2), rel=1e-9)


def test_band_limited_scene_has_no_energy_outside_support():
    slc = simulate(SceneSpec(90, 6, [RegionSpec(0, 6, np.eye(3), BAND3)], rng_seed=2))
    mag = np.abs(azimuth_spectrum(slc, 0))
    outside = ~support_mask(90, BAND3)
    assert mag[outside].max() < 1e-12 * mag.max()


def test_weighting_of_white_speckle_is_flat():
    w = estimate_weighting(white_slc(256, 512, seed=3))
    assert np.all(np.abs(w - 1.0) < 0.1)


def test_weighting_recovers_imposed_envelope():
    rows = 256
    f = np.fft.fftfreq(rows)
    env = 0.5 * (1 + np.cos(np.pi * f / 0.5 * 0.8)) + 0.2  # raised-cosine-like, never zero
    slc = white_slc(rows, 512, seed=4)
    spec = np.fft.fft(slc.data, axis=1, norm="ortho") * env[None, :, None]
    w = estimate_weighting(SlcImage(np.fft.ifft(spec, axis=1, norm="ortho")))
    target = env / env.mean()
    assert np.sqrt(np.mean((w - target) ** 2)) < 0.1


def test_weighting_errors():
    with pytest.raises(DegenerateSpectrumError):
        estimate_weighting(SlcImage(np.zeros((3, 32, 16))))
    with pytest.raises(ValueError):
        estimate_weighting(white_slc(32, 8))


def test_bands_tile_the_spectrum():
    for n in (2, 3, 4, 7):
        bands = SublookConfig(n).bands()
        assert bands[0].lo == -0.5 and bands[-1].hi == 0.5
        for a, b in zip(bands, bands[1:]):
            assert a.hi == b.lo
        f = np.linspace(-0.5, 0.5, 1001, endpoint=False)
        np.testing.assert_array_equal(sum(b.response(f) for b in bands), 1.0)


def test_overlapping_bands():
    bands = SublookConfig(3, overlap=0.5).bands()
    widths = [b.width for b in bands]
    np.testing.assert_allclose(widths, 0.5)
    assert bands[1].center == pytest.approx(0.0)


def test_raised_cosine_response():
    band = SublookConfig(3, taper="raised-cosine", rolloff=0.5).bands()[1]
    assert band.response(np.array([0.0]))[0] == 1.0
    r = band.response(np.linspace(-0.5, 0.5, 201))
    assert r.min() >= 0 and r.max() <= 1


@pytest.mark.parametrize("kwargs", [dict(n_sub=1), dict(overlap=0.95), dict(taper="hann"), dict(rolloff=1.5)])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        SublookConfig(**kwargs)


def test_white_speckle_thirds():
    e = extract_sublooks(white_slc(256, 64, seed=5)).energies()
    np.testing.assert_allclose(e / e.sum(), 1 / 3, atol=0.02)


def test_band2_region_lands_in_sublook2():
    slc = simulate(SceneSpec(300, 40, [RegionSpec(0, 40, np.eye(3), BAND2)], rng_seed=3))
    e = extract_sublooks(slc).energies()
    assert e[1] / e.sum() >= 0.99


def test_point_target_split_by_bandwidth():
    rows = 96
    data = np.zeros((3, rows, 4), complex)
    data[:, 40, 2] = [1.0, 0.5j, -1.0]
    stack = extract_sublooks(SlcImage(data))
    frac = stack.energies() / np.sum(np.abs(data) ** 2)
    np.testing.assert_allclose(frac, [b.width for b in stack.bands], atol=1e-6)


def test_parseval_partition_and_reconstruction():
    slc = white_slc(200, 30, seed=6)
    stack = extract_sublooks(slc, SublookConfig(4))
    assert stack.energies().sum() == pytest.approx(slc.energy(), rel=1e-9)
    np.testing.assert_allclose(sum(im.data for im in stack.images), slc.data, atol=1e-12)


def test_too_few_rows():
    with pytest.raises(ValueError):
        extract_sublooks(white_slc(11, 4), SublookConfig(3))


def test_compensation_flattens_imposed_weighting():
    rows = 256
    f = np.fft.fftfreq(rows)
    env = 1.0 + 0.8 * np.cos(np.pi * f)
    slc = white_slc(rows, 256, seed=7)
    spec = np.fft.fft(slc.data, axis=1, norm="ortho") * env[None, :, None]
    weighted = SlcImage(np.fft.ifft(spec, axis=1, norm="ortho"))
    raw = extract_sublooks(weighted).energies()
    comp = extract_sublooks(weighted, SublookConfig(compensate_weighting=True)).energies()
    assert np.ptp(comp / comp.sum()) < 0.5 * np.ptp(raw / raw.sum())


def test_stack_save_load(tmp_path):
    stack = extract_sublooks(white_slc(48, 8, seed=8))
    stack.save(tmp_path / "subs")
    back = SublookStack.load(tmp_path / "subs")
    assert back.n_sub == 3
    for a, b in zip(stack.images, back.images):
        np.testing.assert_allclose(a.data, b.data, rtol=1e-6, atol=1e-6)
    assert [b.to_dict() for b in back.bands] == [b.to_dict() for b in stack.bands]


def test_decomposer_matches_function():
    slc = white_slc(64, 16, seed=9)
    dec = SublookDecomposer(n_sub=3).fit(slc)
    stack = dec.transform(slc)
    ref = extract_sublooks(slc)
    for a, b in zip(stack.images, ref.images):
        np.testing.assert_array_equal(a.data, b.data)
    with pytest.raises(ValidationError):
        dec.transform(white_slc(32, 16))
