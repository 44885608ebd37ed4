import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from usconf.compounding import fuse
from usconf.grid import GridError

unit = arrays(np.float64, (5, 6), elements=st.floats(0, 1))


def test_equal_confidence_is_average():
    a, b = np.full((2, 2), 0.2), np.full((2, 2), 0.8)
    c = np.full((2, 2), 0.4)
    assert np.allclose(fuse(a, c, b, c).data, 0.5)


def test_zero_confidence_defers_to_other_view():
    a, b = np.full((2, 2), 0.2), np.full((2, 2), 0.8)
    assert np.allclose(fuse(a, np.full((2, 2), 0.3), b, np.zeros((2, 2))).data, 0.2)


def test_hand_example():
    out = fuse(np.full((2, 2), 0.2), np.full((2, 2), 0.9),
               np.full((2, 2), 0.8), np.full((2, 2), 0.1)).data
    assert out == pytest.approx(np.full((2, 2), 0.26))


def test_both_confidences_zero_falls_back_to_average():
    z = np.zeros((2, 2))
    assert np.allclose(fuse(np.full((2, 2), 0.1), z, np.full((2, 2), 0.5), z).data, 0.3)


def test_shape_mismatch():
    with pytest.raises(GridError):
        fuse(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 3)))


@settings(max_examples=60, deadline=None)
@given(unit, unit, unit, unit)
def test_fusion_invariants(a, ca, b, cb):
    out = fuse(a, ca, b, cb).data
    assert np.all(out >= np.minimum(a, b)) and np.all(out <= np.maximum(a, b))
    assert np.allclose(out, fuse(b, cb, a, ca).data, atol=1e-15)
    assert np.allclose(fuse(a, ca, a, cb).data, a, atol=0)
