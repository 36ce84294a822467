import math

import numpy as np
import pytest
from sklearn.base import clone

from knn_bandits.environments import FlipLine
from knn_bandits.indices import Phi, index_klucb, select_k, uncertainty
from knn_bandits.neighbours import order_neighbours, prefix_stats
from knn_bandits.policies import (
    INDEX,
    INIT,
    ContextFreeIndexPolicy,
    FixedArmPolicy,
    KNNIndexPolicy,
    OraclePolicy,
    UniformRandomPolicy,
)


def random_history(rng, n, n_arms=2, dim=1):
    X = rng.random((n, dim))
    # first n_arms rounds pull each arm once, as the policy would
    arms = np.concatenate([np.arange(n_arms), rng.integers(0, n_arms, max(n - n_arms, 0))])[:n]
    rewards = (rng.random(n) < 0.5).astype(float)
    return X, arms, rewards


class TestInitPhase:
    def test_first_rounds_play_each_arm(self):
        p = KNNIndexPolicy(3)
        for t in range(1, 4):
            tr = p.decide([0.2])
            assert tr.phase == INIT and tr.chosen_arm == t - 1 and tr.k_chosen == 0
            p.update([0.2], tr.chosen_arm, 1.0)
        assert p.decide([0.2]).phase == INDEX

    def test_a2_t1(self):
        assert KNNIndexPolicy(2).decide([0.9]).chosen_arm == 0


class TestKNNDecide:
    def test_hand_trace(self):
        p = KNNIndexPolicy(2, index="ucb", theta=4.5, phi=Phi.const())
        p.fit([[0.1], [0.9]], [0, 1], [1.0, 0.0])
        tr = p.decide([0.1])
        a0, a1 = tr.arms
        bonus = math.sqrt(4.5 * math.log(3))
        assert (a0.k, a0.n, a0.fhat, a0.r) == (1, 1, 1.0, 0.0)
        assert (a1.k, a1.n, a1.fhat) == (2, 1, 0.0)
        assert a1.r == pytest.approx(0.8)
        assert a0.index == pytest.approx(1 + bonus) and a0.index == pytest.approx(3.22346, abs=1e-5)
        assert a1.index == pytest.approx(bonus + 0.8)
        assert tr.chosen_arm == 0 and tr.k_chosen == 1

    def test_ties_go_to_lowest_arm(self):
        p = KNNIndexPolicy(2, index="ucb")
        p.fit([[0.25], [0.75]], [0, 1], [0.5, 0.5])
        tr = p.decide([0.5])
        assert tr.arms[0].index == tr.arms[1].index
        assert tr.chosen_arm == 0

    @pytest.mark.parametrize("index", ["ucb", "klucb"])
    def test_trace_matches_building_blocks(self, index):
        rng = np.random.default_rng(4)
        X, arms, rewards = random_history(rng, 120, n_arms=3, dim=2)
        phi = Phi.log(0.7)
        p = KNNIndexPolicy(3, index=index, theta=3.0, phi=phi).fit(X, arms, rewards)
        x = rng.random(2)
        tr = p.decide(x)
        t = 121
        order = order_neighbours(x, X)
        for a, at in enumerate(tr.arms):
            s = prefix_stats(order, arms, rewards, a)
            k, u = select_k(3.0, phi, t, s)
            assert (at.k, at.uncertainty) == (k, u)
            assert at.n == s.N[k - 1] and at.fhat == s.fhat[k - 1] and at.r == s.r[k - 1]
            assert u == uncertainty(3.0, phi, t, at.n, at.r)
            if index == "ucb":
                assert at.index == s.fhat[k - 1] + u
            else:
                assert at.index == index_klucb(at.fhat, at.n, 3.0, phi, t, at.r)
        assert tr.chosen_arm == int(np.argmax([a.index for a in tr.arms]))

    def test_decide_is_pure(self):
        rng = np.random.default_rng(2)
        p = KNNIndexPolicy(2, index="klucb").fit(*random_history(rng, 60))
        assert p.decide([0.3]) == p.decide([0.3])
        assert len(p.history_) == 60

    def test_theta_monotone_ucb_index(self):
        rng = np.random.default_rng(3)
        data = random_history(rng, 80)
        queries = rng.random(20)
        prev = None
        for theta in (0.5, 1.0, 2.0, 4.5, 9.0):
            p = KNNIndexPolicy(2, index="ucb", theta=theta).fit(*data)
            vals = np.array([[a.index for a in p.decide([q]).arms] for q in queries])
            if prev is not None:
                assert np.all(vals >= prev)
            prev = vals

    def test_finite_uncertainty_after_init(self):
        rng = np.random.default_rng(8)
        p = KNNIndexPolicy(3).fit(*random_history(rng, 10, n_arms=3))
        assert all(math.isfinite(a.uncertainty) for a in p.decide([0.4]).arms)

    def test_klucb_rejects_unbounded_rewards(self):
        p = KNNIndexPolicy(2, index="klucb").fit([[0.1], [0.2]], [0, 1], [3.0, 0.0])
        with pytest.raises(ValueError, match="bounded rewards"):
            p.decide([0.1])


class TestUpdate:
    def test_length_and_append_only(self):
        p = KNNIndexPolicy(2)
        p.update([0.1], 0, 1.0)
        first = p.history_[0]
        for s in range(9):
            p.update([s / 10], s % 2, 0.0)
        assert len(p.history_) == 10 and p.t == 11
        assert p.history_[0].x.tolist() == first.x.tolist() and p.history_[0].reward == 1.0

    def test_replay_is_identical(self):
        rng = np.random.default_rng(0)
        data = random_history(rng, 40)
        p1 = KNNIndexPolicy(2).partial_fit(*data)
        p2 = KNNIndexPolicy(2)
        for x, a, y in zip(*data):
            p2.update(x, int(a), float(y))
        assert np.array_equal(p1.history_.X, p2.history_.X)
        assert p1.decide([0.5]) == p2.decide([0.5])

    def test_invalid_arm(self):
        with pytest.raises(ValueError):
            KNNIndexPolicy(2).update([0.1], 2, 1.0)
        with pytest.raises(ValueError):
            KNNIndexPolicy(2).fit([[0.1]], [5], [1.0])

    def test_fit_resets(self):
        p = KNNIndexPolicy(2).fit([[0.1], [0.2], [0.3]], [0, 1, 0], [1, 0, 1])
        p.fit([[0.5]], [1], [0.0])
        assert len(p.history_) == 1


class TestEstimatorAPI:
    def test_get_params_and_clone(self):
        p = KNNIndexPolicy(3, index="klucb", theta=2.2, phi=Phi.log())
        params = p.get_params()
        assert params["theta"] == 2.2 and params["phi"] == Phi.log() and params["n_arms"] == 3
        q = clone(p.fit([[0.1]], [0], [1.0]))
        assert not hasattr(q, "history_") and q.get_params() == params

    def test_set_params(self):
        p = KNNIndexPolicy().set_params(theta=7.0, index="klucb")
        assert p.theta == 7.0 and p.index == "klucb"

    def test_predict_rows(self):
        p = KNNIndexPolicy(2, index="ucb", phi=Phi.const())
        p.fit([[0.1], [0.9], [0.1], [0.9]], [0, 1, 0, 1], [1.0, 0.0, 1.0, 0.0])
        assert p.predict([[0.05], [0.1]]).tolist() == [0, 0]
        assert len(p.history_) == 4

    def test_invalid_index(self):
        p = KNNIndexPolicy(2, index="thompson").fit([[0.1], [0.2]], [0, 1], [1.0, 0.0])
        with pytest.raises(ValueError):
            p.decide([0.1])

    def test_default_theta(self):
        assert KNNIndexPolicy(index="ucb")._params()[0] == 4.5
        assert KNNIndexPolicy(index="klucb")._params()[0] == 2.5


class TestBaselines:
    def test_oracle(self):
        assert OraclePolicy(FlipLine()).decide([0.9]).chosen_arm == 0
        assert OraclePolicy(FlipLine()).decide([0.1]).chosen_arm == 1

    def test_oracle_needs_mean_field(self):
        with pytest.raises(ValueError):
            OraclePolicy().decide([0.5])

    def test_context_free_ucb(self):
        p = ContextFreeIndexPolicy(2, index="ucb", theta=4.5).fit([[0.2], [0.7]], [0, 1], [1.0, 0.0])
        tr = p.decide([0.9])
        assert tr.chosen_arm == 0
        assert tr.arms[0].index == pytest.approx(1 + math.sqrt(4.5 * math.log(3)))

    def test_context_free_ignores_covariates(self):
        p = ContextFreeIndexPolicy(2, index="klucb").fit(
            [[0.1], [0.9], [0.5]], [0, 1, 1], [1.0, 1.0, 0.0])
        assert p.decide([0.0]) == p.decide([1.0])

    def test_uniform_frequency(self):
        p = UniformRandomPolicy(2, random_state=0)
        n = 100_000
        freq = np.mean([p.decide().chosen_arm == 0 for _ in range(n)])
        assert abs(freq - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_fixed(self):
        assert FixedArmPolicy(3, arm=2).decide().chosen_arm == 2
