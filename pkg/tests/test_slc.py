import struct

import numpy as np
import pytest

from polaniso.errors import CorruptFileError, FormatError, ShapeError, ValidationError
from polaniso.slc import (
    AcqMeta,
    CoherencyField,
    SlcImage,
    SlopeRaster,
    boxcar_coherency,
    load_slc,
    load_slope,
    pauli_stack,
    pauli_vector,
    save_slc,
    save_slope,
    slope_mask,
)

from conftest import white_slc


def _write_header(path, rows, cols, payload=b"", magic=b"PSLC", version=1, nchan=3):
    blob = b'{"az_spacing_m":1.0,"label":"x","prf_hz":100.0,"velocity_mps":100.0,"wavelength_m":0.5}'
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHIIH", magic, version, rows, cols, nchan))
        fh.write(struct.pack("<I", len(blob)) + blob + payload)


def test_load_all_zero_file(tmp_path):
    path = tmp_path / "zero.pslc"
    _write_header(path, 4, 4, bytes(4 * 4 * 3 * 8))
    slc = load_slc(path)
    assert slc.data.shape == (3, 4, 4)
    assert slc.data.size == 48
    assert np.all(slc.data == 0)
    assert slc.meta.wavelength == 0.5


def test_round_trip_is_byte_exact(tmp_path):
    slc = white_slc(16, 8, meta=AcqMeta(0.2309, 7000.0, 3.2, 2000.0, "alos", extra={"note": "kept"}))
    a, b = tmp_path / "a.pslc", tmp_path / "b.pslc"
    save_slc(slc, a)
    save_slc(load_slc(a), b)
    assert a.read_bytes() == b.read_bytes()
    assert load_slc(b).meta.extra == {"note": "kept"}


def test_zero_rows_is_corrupt(tmp_path):
    path = tmp_path / "bad.pslc"
    _write_header(path, 0, 4)
    with pytest.raises(CorruptFileError):
        load_slc(path)


@pytest.mark.parametrize(
    "kwargs, exc",
    [
        (dict(magic=b"XSLC"), FormatError),
        (dict(version=2), FormatError),
        (dict(rows=1 << 31, cols=1 << 20), CorruptFileError),
    ],
)
def test_header_errors(tmp_path, kwargs, exc):
    path = tmp_path / "bad.pslc"
    args = dict(rows=4, cols=4, payload=bytes(4 * 4 * 3 * 8))
    args.update(kwargs)
    _write_header(path, **args)
    with pytest.raises(exc):
        load_slc(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "short.pslc"
    _write_header(path, 4, 4, bytes(4 * 4 * 3 * 8 - 1))
    with pytest.raises(CorruptFileError):
        load_slc(path)


def test_nan_payload_is_validation_error(tmp_path):
    payload = np.zeros((3, 4, 4), "<c8")
    payload[1, 2, 3] = np.nan
    path = tmp_path / "nan.pslc"
    _write_header(path, 4, 4, payload.tobytes())
    with pytest.raises(ValidationError):
        load_slc(path)


def test_slope_round_trip(tmp_path):
    s = SlopeRaster(np.array([[-2.75, 1.83], [0.0, 14.0]]))
    save_slope(s, tmp_path / "s.pslp")
    back = load_slope(tmp_path / "s.pslp")
    np.testing.assert_allclose(back.values, s.values, rtol=1e-7)


def test_image_invariants():
    with pytest.raises(ValidationError):
        SlcImage(np.zeros((3, 1, 4)))
    with pytest.raises(ValidationError):
        SlcImage(np.zeros((2, 4, 4)))
    bad = np.zeros((3, 4, 4), complex)
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValidationError):
        SlcImage(bad)


def _single(hh, hv, vv):
    return SlcImage.from_channels(np.full((2, 1), hh), np.full((2, 1), hv), np.full((2, 1), vv))


@pytest.mark.parametrize(
    "hh, hv, vv, expected",
    [
        (1, 0, 1, (np.sqrt(2), 0, 0)),
        (1, 0, -1, (0, np.sqrt(2), 0)),
        (0, 1, 0, (0, 0, np.sqrt(2))),
    ],
)
def test_pauli_unit_cases(hh, hv, vv, expected):
    k = pauli_vector(_single(hh, hv, vv), 0, 0)
    np.testing.assert_allclose(k, expected, atol=1e-15)


def test_pauli_power_and_bounds():
    slc = white_slc(8, 5, seed=3)
    k = pauli_stack(slc)
    power = np.sum(np.abs(k) ** 2, axis=0)
    expected = np.abs(slc.hh) ** 2 + np.abs(slc.vv) ** 2 + 2 * np.abs(slc.hv) ** 2
    np.testing.assert_allclose(power, expected, rtol=1e-14)
    with pytest.raises(IndexError):
        pauli_vector(slc, 8, 0)


def test_window_one_is_rank_one_outer_product():
    slc = white_slc(6, 5, seed=4)
    field = boxcar_coherency(slc, 1)
    k = pauli_vector(slc, 2, 3)
    np.testing.assert_allclose(field.t[2, 3], np.outer(k, k.conj()), rtol=1e-13, atol=1e-15)
    assert np.linalg.matrix_rank(field.t[2, 3], tol=1e-10) == 1
    power = np.abs(slc.hh) ** 2 + np.abs(slc.vv) ** 2 + 2 * np.abs(slc.hv) ** 2
    np.testing.assert_allclose(field.trace(), power, rtol=1e-12)


def test_constant_image_gives_constant_interior():
    slc = SlcImage.from_channels(np.full((20, 20), 1 + 2j), np.full((20, 20), 0.5j), np.full((20, 20), -1.0))
    t = boxcar_coherency(slc, 9).t
    interior = t[4:-4, 4:-4]
    np.testing.assert_allclose(interior, np.broadcast_to(interior[0, 0], interior.shape), rtol=1e-13, atol=1e-15)
    # clipped borders average the same constant, so they match too
    np.testing.assert_allclose(t[0, 0], interior[0, 0], rtol=1e-13)


def test_boxcar_matches_brute_force_with_clipping():
    slc = white_slc(11, 9, seed=5)
    field = boxcar_coherency(slc, 5)
    k = pauli_stack(slc)
    for r, c in [(0, 0), (1, 8), (5, 4), (10, 2)]:
        rs, cs = slice(max(r - 2, 0), r + 3), slice(max(c - 2, 0), c + 3)
        kk = k[:, rs, cs].reshape(3, -1)
        brute = kk @ kk.conj().T / kk.shape[1]
        np.testing.assert_allclose(field.t[r, c], brute, rtol=1e-12, atol=1e-14)
        assert field.counts[r, c] == kk.shape[1]
    assert field.n_samples == 25


def test_boxcar_hermitian_psd(rng):
    slc = white_slc(40, 30, seed=6)
    for w in (1, 3, 9):
        f = boxcar_coherency(slc, w)
        tr = f.trace()
        herm = np.max(np.abs(f.t - np.conj(np.swapaxes(f.t, -1, -2))), axis=(-2, -1))
        assert np.all(herm <= 1e-10 * tr)
        assert np.all(np.linalg.eigvalsh(f.t)[..., 0] >= -1e-10 * tr)
        assert np.all(tr >= 0)
        f.validate()


@pytest.mark.parametrize("window", [2, 0, 41])
def test_boxcar_rejects_bad_windows(window):
    with pytest.raises(ValueError):
        boxcar_coherency(white_slc(40, 30), window)


def test_validate_rejects_non_psd():
    with pytest.raises(ValidationError):
        CoherencyField.from_matrices(np.diag([1.0, 1.0, -0.5])).validate()


def test_slope_mask_cases():
    assert slope_mask(SlopeRaster(np.zeros((3, 3))), -2, 2).mask.all()
    m = slope_mask(SlopeRaster(np.array([[0.0, 2.5]])), -2, 2).mask
    assert m.tolist() == [[True, False]]
    # field transect slopes: -2.75 deg excluded, 1.83 deg kept
    m = slope_mask(SlopeRaster(np.array([[-2.75, 1.83]])), -2, 2).mask
    assert m.tolist() == [[False, True]]
    assert slope_mask(SlopeRaster(np.array([[2.0, -2.0]])), -2, 2).mask.all()
    with pytest.raises(ValueError):
        slope_mask(SlopeRaster(np.zeros((1, 1))), 1, -1)


def test_mask_shape_check():
    m = slope_mask(SlopeRaster(np.zeros((3, 3))))
    m.check_matches((3, 3))
    with pytest.raises(ShapeError):
        m.check_matches((3, 4))
