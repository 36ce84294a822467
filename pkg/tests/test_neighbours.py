import numpy as np
import pytest

from knn_bandits.neighbours import History, naive_stats, order_neighbours, prefix_stats


def test_order_line_example():
    o = order_neighbours(0.4, [0.9, 0.2, 0.5])
    assert o.order.tolist() == [2, 1, 0]
    np.testing.assert_allclose(o.dist, [0.1, 0.2, 0.5])


def test_ties_keep_history_order():
    o = order_neighbours(0.5, [0.75, 0.375, 0.25, 0.625])
    assert o.order.tolist() == [1, 3, 0, 2]


def test_single_entry():
    assert order_neighbours([0.1, 0.2], [[0.3, 0.3]]).order.tolist() == [0]


def test_empty_history():
    with pytest.raises(ValueError, match="no history"):
        order_neighbours(0.4, [])


def test_dist_nondecreasing_and_bijective():
    rng = np.random.default_rng(5)
    X = rng.random((300, 3))
    o = order_neighbours(rng.random(3), X)
    assert np.all(np.diff(o.dist) >= 0)
    assert sorted(o.order.tolist()) == list(range(300))


def test_prefix_stats_hand_trace():
    X = [0.9, 0.2, 0.5]
    arms = [0, 1, 0]
    rewards = [1.0, 0.0, 0.5]
    o = order_neighbours(0.4, X)
    s = prefix_stats(o, arms, rewards, 0)
    assert s.N.tolist() == [1, 1, 2]
    assert s.S.tolist() == [0.5, 0.5, 1.5]
    assert s.fhat.tolist() == [0.5, 0.5, 0.75]
    np.testing.assert_allclose(s.r, [0.1, 0.2, 0.5])


def test_absent_arm_is_zero():
    o = order_neighbours(0.4, [0.9, 0.2, 0.5])
    s = prefix_stats(o, [0, 0, 0], [1.0, 0.0, 0.5], 1, n_arms=2)
    assert not s.N.any() and not s.S.any() and not s.fhat.any()


def test_whole_prefix_equals_global_count():
    rng = np.random.default_rng(1)
    arms = rng.integers(0, 3, 50)
    o = order_neighbours(0.3, rng.random(50))
    for a in range(3):
        assert prefix_stats(o, arms, rng.random(50), a).N[-1] == np.sum(arms == a)


def test_arm_out_of_range():
    o = order_neighbours(0.4, [0.9])
    with pytest.raises(ValueError):
        prefix_stats(o, [0], [1.0], 2, n_arms=2)
    with pytest.raises(ValueError):
        prefix_stats(o, [0], [1.0], -1)


def test_increments_and_bounds():
    rng = np.random.default_rng(2)
    arms = rng.integers(0, 2, 200)
    rewards = (rng.random(200) < 0.4).astype(float)
    s = prefix_stats(order_neighbours(0.5, rng.random(200)), arms, rewards, 1)
    assert set(np.diff(s.N).tolist()) <= {0, 1}
    assert np.all(s.S <= s.N)
    assert np.all((s.fhat >= 0) & (s.fhat <= 1))
    assert np.all(np.diff(s.r) >= 0)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_naive_agrees_bit_exact(dim):
    rng = np.random.default_rng(dim)
    for _ in range(30):
        n = int(rng.integers(1, 80))
        X = rng.random((n, dim))
        arms = rng.integers(0, 3, n)
        rewards = rng.normal(0.5, 1.0, n)
        x = rng.random(dim)
        o = order_neighbours(x, X)
        for a in range(3):
            s = prefix_stats(o, arms, rewards, a)
            for k in (1, n // 2 + 1, n):
                N, S, r, f = naive_stats(x, X, arms, rewards, a, k)
                assert (N, S, r, f) == (s.N[k - 1], s.S[k - 1], s.r[k - 1], s.fhat[k - 1])


def test_naive_k_range():
    with pytest.raises(ValueError):
        naive_stats(0.1, [0.2], [0], [1.0], 0, 2)


class TestHistory:
    def test_append_and_views(self):
        h = History(2, capacity=1)
        for s in range(5):
            h.append([s, -s], s % 2, float(s))
        assert len(h) == 5
        assert h.arms.tolist() == [0, 1, 0, 1, 0]
        assert h[3].reward == 3.0 and h[3].x.tolist() == [3, -3]
        with pytest.raises(ValueError):
            h.rewards[0] = 9.0

    def test_entries_immutable_after_growth(self):
        h = History(1, capacity=2)
        h.append([0.5], 0, 1.0)
        first = h[0]
        for s in range(20):
            h.append([s], 1, 0.0)
        assert h[0].x.tolist() == first.x.tolist() and h[0][1:] == first[1:]

    def test_iteration(self):
        h = History(1)
        h.append([0.1], 1, 0.5)
        assert [(e.arm, e.reward) for e in h] == [(1, 0.5)]
