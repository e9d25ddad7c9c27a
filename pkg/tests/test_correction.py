import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polaniso.correction import (
    CorrectionInput,
    adjust_helix,
    correct,
    corrected_depolarisation,
    corrected_volume,
)
from polaniso.errors import ValidationError

W = (0.2, 0.15, 0.65)
D = (0.16, 0.5, 0.01)
# hand arithmetic, evaluated with exact fractions
D_NEW = 0.1135
DELTA_PV = -0.1515
M_NEW = 0.8865
PC_NEW = 0.054396122448979592  # 0.0451 * (1 + 0.1515 / 0.735)


def test_worked_chain():
    d, wsum, dead = corrected_depolarisation(W, D)
    assert d == pytest.approx(D_NEW, abs=1e-12)
    assert wsum == pytest.approx(1.0) and dead == 0
    pv, delta, m = corrected_volume(1.0, 0.265, d)
    assert pv == pytest.approx(0.1135, abs=1e-12)
    assert delta == pytest.approx(DELTA_PV, abs=1e-12)
    assert m == pytest.approx(M_NEW, abs=1e-12)
    assert adjust_helix(0.0451, delta, 1.0, 0.265) == pytest.approx(PC_NEW, abs=1e-12)
    assert PC_NEW == pytest.approx(0.05440, abs=5e-6)


def test_identities():
    d, _, _ = corrected_depolarisation([0.5, 0.25, 0.25], [0.3, 0.3, 0.3])
    assert d == pytest.approx(0.3, abs=1e-15)
    d, _, _ = corrected_depolarisation([1.0, 0.0, 0.0], [0.4, 0.9, 0.1])
    assert d == 0.4
    pv, delta, m = corrected_volume(2.0, 0.6, 0.3)
    assert delta == pytest.approx(0.0, abs=1e-15) and m == pytest.approx(0.7)
    pv, _, m = corrected_volume(2.0, 0.6, 1.0)
    assert pv == 2.0 and m == 0.0
    assert adjust_helix(0.3, 0.0, 1.0, 0.4) == 0.3
    assert adjust_helix(0.3, 0.6, 1.0, 0.4) == pytest.approx(0.0, abs=1e-15)


def test_weights_are_not_renormalised():
    d, wsum, _ = corrected_depolarisation([0.5, 0.5, 0.5], [0.2, 0.2, 0.2])
    assert d == pytest.approx(0.3) and wsum == pytest.approx(1.5)
    out = correct(CorrectionInput([[0.5], [0.5], [0.5]], [[0.2], [0.2], [0.2]], [1.0], [0.2]))
    assert out.weight_deviation.tolist() == [True]


def test_degenerate_pixels():
    d, _, dead = corrected_depolarisation(np.zeros((3, 2)), np.ones((3, 2)))
    assert np.isnan(d).all() and dead == 2
    pv, _, m = corrected_volume(0.0, 0.0, 0.5)
    assert np.isnan(pv) and np.isnan(m)
    assert np.isnan(adjust_helix(0.1, 0.0, 1.0, 1.0))


def test_input_validation():
    with pytest.raises(ValidationError):
        CorrectionInput([0.5, 0.5], [0.1, 0.2, 0.3], 1.0, 0.5)
    with pytest.raises(ValidationError):
        CorrectionInput([-0.1, 1.1], [0.1, 0.2], 1.0, 0.5)


weights = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(lambda w: sum(w) > 1e-3)


@settings(max_examples=300, deadline=None)
@given(weights, st.data())
def test_convex_bounds(w, data):
    w = np.array(w) / np.sum(w)
    d = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(w), max_size=len(w))))
    out, wsum, _ = corrected_depolarisation(w, d)
    assert d.min() - 1e-12 <= out <= d.max() + 1e-12
    assert wsum == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.0, 0.99), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_helix_follows_volume(span, depol, d_new, pc_frac):
    p_v = depol * span
    p_c = pc_frac * (span - p_v)
    _, delta, m = corrected_volume(span, p_v, d_new)
    pc_new = adjust_helix(p_c, delta, span, p_v)
    # helix power stays proportional to the polarised power
    assert pc_new == pytest.approx(p_c * m * span / (span - p_v), rel=1e-9, abs=1e-12)


def test_correct_broadcasts_rasters():
    w = np.broadcast_to(np.array(W)[:, None, None], (3, 4, 5))
    d = np.broadcast_to(np.array(D)[:, None, None], (3, 4, 5))
    out = correct(CorrectionInput(w, d, np.ones((4, 5)), np.full((4, 5), 0.265), np.full((4, 5), 0.0451)))
    np.testing.assert_allclose(out.depol, D_NEW, atol=1e-12)
    np.testing.assert_allclose(out.p_c, PC_NEW, atol=1e-12)
    assert not out.weight_deviation.any() and out.n_degenerate == 0
