from fractions import Fraction

import numpy as np
import pytest

from src.dynamics.state import HALF, Layout, SchemeState
from src.utils.error_utils import InvalidStateError


def _staggered():
    return SchemeState(Layout.STAGGERED, 4, 0.1,
                       {"q": np.zeros(3), "v": np.ones(3), "v_prev": 2.0 * np.ones(3)},
                       {"v": HALF, "v_prev": -HALF})


def test_levels_and_times():
    state = _staggered()
    assert state.staggered
    assert state.level("v") == Fraction(9, 2)
    assert state.time("v_prev") == pytest.approx(0.35)
    assert state.stamp("q") == "n=4"
    assert state.offsets["q"] == 0


def test_collocated_layout_rejects_offsets():
    with pytest.raises(InvalidStateError):
        SchemeState(Layout.COLLOCATED, 0, 0.1, {"v": np.zeros(2)}, {"v": HALF})


def test_missing_field():
    state = _staggered()
    assert "sigma" not in state
    with pytest.raises(InvalidStateError):
        state["sigma"]


def test_advance_replaces_fields_and_counts():
    state = _staggered()
    nxt = state.advance(q=np.ones(3))
    assert nxt.step == 5
    assert np.array_equal(nxt["q"], np.ones(3))
    assert nxt["v"] is state["v"]
    back = state.advance(-1)
    assert back.step == 3
    with pytest.raises(InvalidStateError):
        state.advance(w=np.ones(3))


def test_reversed_swaps_rate_levels():
    state = _staggered().reversed((("v", "v_prev"),))
    assert np.array_equal(state["v"], 2.0 * np.ones(3))
    assert state.offsets["v"] == -HALF
    assert state.offsets["v_prev"] == HALF


def test_require_checks_offset():
    state = _staggered()
    state.require("v", HALF)
    with pytest.raises(InvalidStateError):
        state.require("v", Fraction(0))
    with pytest.raises(InvalidStateError):
        state.require("E", Fraction(0))


def test_max_difference_and_scaling():
    state = _staggered()
    assert state.max_difference(state.scaled(2.0)) == pytest.approx(2.0)
    other = SchemeState(Layout.COLLOCATED, 0, 0.1, {"q": np.zeros(3)})
    with pytest.raises(InvalidStateError):
        state.max_difference(other)
