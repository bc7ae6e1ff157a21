import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vibdiag import enn
from vibdiag.errors import InvalidLearningRate, MissingClass
from vibdiag.signal_io import FaultClass

N, I, O, B = FaultClass


def four_boxes(seed):
    rng = np.random.default_rng(seed)
    boxes = [((0, 0.2), (0, 10)), ((1, 6), (-5, 15)), ((7, 7.3), (2, 8)), ((8, 12), (-10, 20))]
    X = np.vstack([np.c_[rng.uniform(*bx, 40), rng.uniform(*by, 40)] for bx, by in boxes])
    y = np.repeat(np.arange(4), 40)
    p = rng.permutation(len(y))
    return X[p], y[p]


def ed_oracle(lo, hi, x):
    total = 0.0
    for l, u, v in zip(lo, hi, x):
        z, h = (l + u) / 2, (u - l) / 2
        total += (abs(v - z) - h) / (abs(h) + 1e-12) + 1
    return total


def test_distance_examples():
    m = enn.EnnModel.from_bounds([[0, 0]] * 4, [[2, 4]] * 4)
    assert enn.extension_distance(m, 0, [1, 2]) == pytest.approx(0.0, abs=1e-9)
    assert enn.extension_distance(m, 0, [2, 0]) == pytest.approx(2.0)
    assert enn.extension_distance(m, 0, [4, 2]) == pytest.approx(2.0 + 1.0)


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(0.01, 20), st.floats(-100, 100)), min_size=1, max_size=6))
def test_distance_matches_formula(rows):
    lo = np.array([r[0] for r in rows])
    hi = lo + np.array([r[1] for r in rows])
    x = np.array([r[2] for r in rows])
    m = enn.EnnModel.from_bounds(np.tile(lo, (4, 1)), np.tile(hi, (4, 1)))
    assert enn.extension_distance(m, FaultClass.BALL, x) == pytest.approx(ed_oracle(lo, hi, x), rel=1e-9, abs=1e-9)


def test_distance_grows_with_offset():
    m = enn.EnnModel.from_bounds([[0.0]] * 4, [[2.0]] * 4)
    d = [enn.extension_distance(m, 0, [1 + s]) for s in np.linspace(0, 10, 21)]
    assert np.all(np.diff(d) > 0)
    assert enn.extension_distance(m, 0, [1 - 3]) == pytest.approx(enn.extension_distance(m, 0, [1 + 3]))


def test_tie_goes_to_lowest_ordinal():
    m = enn.EnnModel.from_bounds([[0.0]] * 4, [[1.0]] * 4)
    assert enn.classify(m, [0.5])[0] is N
    m2 = enn.EnnModel.from_bounds([[5.0], [0.0], [0.0], [9.0]], [[6.0], [1.0], [1.0], [10.0]])
    assert enn.classify(m2, [0.5])[0] is I


def test_disjoint_boxes_need_no_updates():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(10 * c, 10 * c + 1, (20, 3)) for c in range(4)])
    y = np.repeat(np.arange(4), 20)
    m0 = enn.initialize(X, y)
    m1, curve = enn.train(m0, X, y)
    assert curve == [0.0]
    np.testing.assert_array_equal(m1.w_lower, m0.w_lower)
    np.testing.assert_array_equal(m1.w_upper, m0.w_upper)


def test_single_pattern_per_class_is_nearest_pattern():
    rng = np.random.default_rng(1)
    protos = rng.standard_normal((4, 3)) * 5
    m, _ = enn.fit(protos, range(4))
    for c, p in enumerate(protos):
        assert enn.classify(m, p)[0] == FaultClass(c)


def test_update_moves_intervals_by_center_offset():
    m = enn.EnnModel.from_bounds([[0.0], [0.5], [10.0], [20.0]], [[4.0], [1.5], [11.0], [21.0]])
    x = np.array([1.0])
    assert enn.classify(m, x)[0] is I
    m2, wrong = enn.update(m, x, N)
    assert wrong
    eta = m.eta
    np.testing.assert_allclose(m2.w_lower[0], 0.0 + eta * (1 - 2), atol=1e-15)
    np.testing.assert_allclose(m2.w_upper[0], 4.0 + eta * (1 - 2), atol=1e-15)
    np.testing.assert_allclose(m2.w_lower[1], 0.5 - eta * (1 - 1), atol=1e-15)
    np.testing.assert_array_equal(m2.w_lower[2:], m.w_lower[2:])


def test_learning_rate_controls_epochs():
    X, y = four_boxes(0)
    m0 = enn.initialize(X, y)
    slow = enn.train(m0, X, y, epochs=500, eta=0.01)[1]
    fast = enn.train(m0, X, y, epochs=500, eta=0.219)[1]
    assert fast[-1] == 0.0 and slow[-1] == 0.0
    assert len(slow) > len(fast)


def test_fixed_point_after_clean_epoch():
    X, y = four_boxes(3)
    m, curve = enn.fit(X, y, epochs=500)
    assert curve[-1] == 0.0
    m2, curve2 = enn.train(m, X, y, epochs=5)
    assert curve2 == [0.0]
    np.testing.assert_array_equal(m2.w_lower, m.w_lower)


def test_invariants_survive_many_updates():
    rng = np.random.default_rng(2)
    m = enn.EnnModel.from_bounds(rng.uniform(-1, 0, (4, 3)), rng.uniform(0, 1, (4, 3)))
    for _ in range(10_000):
        m, _ = enn.update(m, rng.standard_normal(3) * 3, FaultClass(int(rng.integers(4))))
    assert np.all(m.w_lower <= m.centers) and np.all(m.centers <= m.w_upper)
    np.testing.assert_array_equal(m.centers, (m.w_upper + m.w_lower) / 2)
    assert np.all(np.isfinite(m.w_lower)) and np.all(np.isfinite(m.w_upper))


def test_deterministic():
    X, y = four_boxes(4)
    a, ca = enn.fit(X, y)
    b, cb = enn.fit(X, y)
    assert ca == cb
    np.testing.assert_array_equal(a.w_lower, b.w_lower)


def test_errors():
    X, y = four_boxes(5)
    with pytest.raises(MissingClass):
        enn.fit(X[y != 2], y[y != 2])
    for eta in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidLearningRate):
            enn.fit(X, y, eta=eta)
    with pytest.raises(InvalidLearningRate):
        enn.train(enn.initialize(X, y), X, y, eta=1.5)
