import numpy as np
import pytest

from fdsecrecy.inputs import EtInputDistribution


def test_binary():
    d = EtInputDistribution.binary([1.0, 2.0, 0.0], 3)
    assert d.is_binary()
    np.testing.assert_array_equal(d.binary_amplitudes(), [1.0, 2.0, 0.0])
    assert d.power(np.full(3, 1 / 3)) == pytest.approx(5 / 3)


def test_symmetric_pairs_layout():
    d = EtInputDistribution.symmetric_pairs([1.0, 3.0], [0.5, 0.25], 2)
    assert d.points.shape == (2, 5)
    assert d.probs[0, -1] == pytest.approx(0.25)
    assert not d.is_binary()
    with pytest.raises(ValueError):
        d.binary_amplitudes()
    assert d.power([0.5, 0.5]) == pytest.approx(0.5 + 9 * 0.25)


def test_validation():
    with pytest.raises(ValueError):
        EtInputDistribution([[1.0, -1.0]], [[0.7, 0.4]])
    with pytest.raises(ValueError):
        EtInputDistribution([[1.0, -1.0]], [[0.7, 0.3]], symmetric=True)
    EtInputDistribution([[1.0, -1.0]], [[0.7, 0.3]], symmetric=False)
    with pytest.raises(ValueError):
        EtInputDistribution.symmetric_pairs([1.0], [1.2], 1)


def test_budget_check_relative():
    d = EtInputDistribution.binary(1.0, 1)
    assert d.check_power_budget([1.0], 1.0) == pytest.approx(1.0)
    d.check_power_budget([1.0], 1.0 / (1 + 5e-10))
    with pytest.raises(ValueError):
        d.check_power_budget([1.0], 0.99)


def test_negated_and_readonly():
    d = EtInputDistribution.symmetric_pairs([1.0], [0.5], 1)
    n = d.negated()
    np.testing.assert_array_equal(n.points, -d.points)
    with pytest.raises(ValueError):
        d.points[0, 0] = 5.0
