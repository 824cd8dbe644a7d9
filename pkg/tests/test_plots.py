import numpy as np
import pytest

from symgait.gait import named_gait
from symgait.plots import FootfallDiagram, coefficient_curves_svg


def test_trot_bars():
    d = FootfallDiagram.from_spec(named_gait("trot"), 0.56, strides=1)
    lh, lf, rf, rh = d.intervals
    assert lh == rf and lf == rh
    # touchdowns of the two diagonal pairs are half a stride apart
    touchdown = lambda legs: [a for a, _ in legs if a > 0][0]  # noqa: E731
    assert np.isclose(abs(touchdown(lh) - touchdown(lf)), 0.5)
    assert np.allclose(d.stance_fractions(), 0.56)


def test_pronk_identical():
    d = FootfallDiagram.from_spec(named_gait("pronk"), 0.4, strides=3)
    assert len(set(d.intervals)) == 1
    assert np.allclose(d.stance_fractions(), 0.4)


@pytest.mark.parametrize("gait", ["trot", "bound", "halfbound", "gallop"])
@pytest.mark.parametrize("forward", [True, False])
def test_fraction_equals_duty(gait, forward):
    d = FootfallDiagram.from_spec(named_gait(gait), 0.45, strides=2, forward=forward)
    assert np.allclose(d.stance_fractions(), 0.45, atol=1e-12)
    assert "<svg" in d.to_svg("x")


def test_from_contacts():
    cycles = np.arange(1, 11) / 10.0
    contact = np.zeros((10, 4), dtype=bool)
    contact[4:9, 0] = True
    contact[:, 1] = True
    d = FootfallDiagram.from_contacts(cycles, contact)
    assert d.intervals[0] == ((0.4, 0.9),)
    assert d.intervals[1] == ((0.0, 1.0),)
    assert np.allclose(d.stance_fractions(), [0.5, 1.0, 0.0, 0.0])


def test_validation():
    with pytest.raises(ValueError):
        FootfallDiagram((((0.5, 0.2),), (), (), ()), 1.0)
    with pytest.raises(ValueError):
        FootfallDiagram(((), ()), 1.0)


def test_coefficient_svg():
    assert coefficient_curves_svg(0.56, 32.0).count("<polyline") == 2
