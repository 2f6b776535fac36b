"""Tests for the agents module."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentiment_ensemble.agents import (
    AgentHyperparameters,
    Algorithm,
    Rollout,
    a2c_advantage,
    a2c_objective,
    a2c_policy_gradient,
    a2c_update,
    act,
    ddpg_critic_loss,
    ddpg_target,
    ddpg_update,
    default_hyperparameters,
    gae_advantages,
    gaussian_log_prob,
    init_learner,
    init_policy,
    ppo_surrogate,
    ppo_update,
    probability_ratio,
    state_features,
    td3_target,
    td3_update,
)
from sentiment_ensemble.errors import DimensionMismatch, EmptyBatch
from sentiment_ensemble.market_env import EnvConfig, PortfolioState
from sentiment_ensemble.replay import TransitionBatch
from sentiment_ensemble.seeding import make_rng

CONFIG = EnvConfig(initial_balance=1000.0, h_max=10)
BASE_PRICES = np.array([10.0, 20.0])


def _batch(size: int = 8, seed: int = 0) -> TransitionBatch:
    rng = make_rng(seed)
    return TransitionBatch(
        states=rng.normal(size=(size, 5)),
        actions=rng.uniform(-1, 1, size=(size, 2)),
        rewards=rng.normal(size=size),
        next_states=rng.normal(size=(size, 5)),
        dones=np.zeros(size),
    )


def _empty_batch() -> TransitionBatch:
    return TransitionBatch(
        np.zeros((0, 5)), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 5)), np.zeros(0)
    )


def _policy(algorithm, **overrides):
    hp = AgentHyperparameters(hidden_sizes=(8,), **overrides)
    return init_policy(algorithm, CONFIG, BASE_PRICES, hp, seed=3)


class TestAlgorithm:
    """Tests for the Algorithm enum."""

    def test_parse_case_insensitive(self):
        """Test that names parse regardless of case."""
        assert Algorithm.parse("td3") is Algorithm.TD3
        assert Algorithm.parse(Algorithm.PPO) is Algorithm.PPO

    def test_parse_unknown(self):
        """Test that unknown names list the choices."""
        with pytest.raises(ValueError, match="DDPG, PPO, A2C, TD3"):
            Algorithm.parse("SAC")

    def test_off_policy(self):
        """Test that only DDPG and TD3 are off-policy."""
        assert [a for a in Algorithm if a.off_policy] == [Algorithm.DDPG, Algorithm.TD3]


class TestHyperparameters:
    """Tests for AgentHyperparameters and default_hyperparameters."""

    def test_invalid_gamma(self):
        """Test that gamma above 1 is rejected."""
        with pytest.raises(ValueError, match="gamma"):
            AgentHyperparameters(gamma=1.5)

    def test_hidden_sizes_become_tuple(self):
        """Test that list hidden sizes are stored as a tuple."""
        assert AgentHyperparameters(hidden_sizes=[4, 4]).hidden_sizes == (4, 4)

    def test_a2c_defaults(self):
        """Test that A2C defaults to short rollouts."""
        assert default_hyperparameters(Algorithm.A2C).n_steps == 5


class TestScalarRules:
    """Tests for the scalar backup and surrogate rules."""

    def test_ddpg_target(self):
        """Test the Bellman backup with and without termination."""
        assert ddpg_target(1.0, 0.99, False, 2.0) == pytest.approx(2.98)
        assert ddpg_target(1.0, 0.99, True, 1e9) == 1.0

    def test_td3_target_uses_smaller_critic(self):
        """Test that the backup uses the minimum of the twin targets."""
        assert td3_target(0.5, 0.5, False, 4.0, 2.0) == pytest.approx(1.5)

    def test_ddpg_target_vectorized(self):
        """Test that arrays are backed up elementwise."""
        result = ddpg_target(np.array([1.0, 1.0]), 0.5, np.array([0.0, 1.0]), np.array([2.0, 2.0]))
        np.testing.assert_allclose(result, [2.0, 1.0])

    def test_done_flags_of_any_dtype(self):
        """Test that bool, int and stored float done flags select the same terminals."""
        r = np.array([1.0, 1.0, 1.0])
        q_next = np.array([2.0, 2.0, 2.0])
        expected = [2.0, 1.0, 1.0]

        for done in ([False, True, True], [0, 1, 1], np.array([0.0, 1.0, 1.0])):
            np.testing.assert_allclose(ddpg_target(r, 0.5, done, q_next), expected)
            np.testing.assert_allclose(td3_target(r, 0.5, done, q_next, q_next), expected)
        assert a2c_advantage(1.0, 0.5, 2.0, 1.0, 1.0) == pytest.approx(0.0)

    def test_a2c_advantage(self):
        """Test the one-step advantage."""
        assert a2c_advantage(1.0, 0.5, 2.0, 1.0, False) == pytest.approx(1.0)
        assert a2c_advantage(1.0, 0.5, 2.0, 1.0, True) == pytest.approx(0.0)

    def test_probability_ratio(self):
        """Test that equal log-probabilities give ratio 1."""
        assert probability_ratio(-1.2, -1.2) == 1.0

    def test_ppo_surrogate_clips(self):
        """Test that the surrogate is pessimistic on both sides."""
        assert ppo_surrogate(1.5, 1.0, 0.2) == pytest.approx(1.2)
        assert ppo_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)
        assert ppo_surrogate(1.1, 1.0, 0.2) == pytest.approx(1.1)

    @given(
        st.lists(
            st.tuples(st.floats(0.01, 5.0), st.floats(-10.0, 10.0)), min_size=1, max_size=50
        ),
        st.floats(0.01, 0.5),
    )
    @settings(max_examples=300, deadline=None)
    def test_ppo_surrogate_matches_scalar_rule(self, pairs, epsilon):
        """Test the vectorized surrogate against the scalar min of clipped and unclipped."""
        ratios = np.array([ratio for ratio, _ in pairs])
        advantages = np.array([advantage for _, advantage in pairs])

        result = np.atleast_1d(ppo_surrogate(ratios, advantages, epsilon))

        for value, (ratio, advantage) in zip(result, pairs):
            clipped = max(min(ratio, 1.0 + epsilon), 1.0 - epsilon)
            assert value == pytest.approx(min(ratio * advantage, clipped * advantage))
            assert value <= ratio * advantage + 1e-12
            bound = (1.0 + epsilon if advantage >= 0 else 1.0 - epsilon) * advantage
            assert value <= bound + 1e-12

    def test_gaussian_log_prob_at_mean(self):
        """Test the log-density of a standard normal at its mean."""
        assert gaussian_log_prob(np.zeros(1), np.zeros(1), np.zeros(1)) == pytest.approx(
            -0.5 * math.log(2 * math.pi)
        )

    def test_gae_reduces_to_returns(self):
        """Test that gamma 1 and lambda 1 with zero values give reward-to-go."""
        advantages = gae_advantages(
            np.array([1.0, 2.0, 3.0]), np.zeros(3), np.zeros(3), np.zeros(3), 1.0, 1.0
        )
        np.testing.assert_allclose(advantages, [6.0, 5.0, 3.0])

    def test_gae_lambda_zero_is_one_step(self):
        """Test that lambda 0 gives one-step advantages."""
        advantages = gae_advantages(
            np.array([1.0, 1.0]), np.array([0.5, 0.5]), np.array([1.0, 1.0]),
            np.array([0.0, 1.0]), 0.9, 0.0,
        )
        np.testing.assert_allclose(advantages, [1.4, 0.5])


class TestInitPolicy:
    """Tests for init_policy function."""

    def test_td3_has_twin_critics(self):
        """Test that TD3 carries two critics and matching targets."""
        policy = _policy(Algorithm.TD3)

        assert len(policy.critics) == 2
        assert len(policy.target_critics) == 2
        assert policy.target_actor.equals(policy.actor)
        assert policy.log_std is None

    def test_gaussian_policy_has_log_std(self):
        """Test that PPO carries a state-value critic and a log standard deviation."""
        policy = _policy(Algorithm.PPO)

        assert policy.critics[0].layer_sizes == (5, 8, 1)
        np.testing.assert_allclose(policy.log_std, [math.log(0.5)] * 2)
        assert policy.name == "PPO"

    def test_seeded(self):
        """Test that equal seeds build equal networks."""
        assert _policy(Algorithm.DDPG).actor.equals(_policy(Algorithm.DDPG).actor)


class TestAct:
    """Tests for act function and state features."""

    def test_features(self):
        """Test that features are normalized balance, prices and holdings."""
        state = PortfolioState(prices=[20.0, 20.0], holdings=[5, 0], balance=500.0, day_index=0)
        features = state_features(state, 1000.0, BASE_PRICES, 10)
        np.testing.assert_allclose(features, [0.5, 2.0, 1.0, 0.5, 0.0])

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_actions_in_range(self, algorithm):
        """Test that exploratory actions are clamped to [-1, 1]."""
        policy = _policy(algorithm, exploration_noise=5.0, log_std_init=2.0)
        rng = make_rng(0)
        for _ in range(20):
            action = act(policy, rng.normal(size=5), True, rng)
            assert action.shape == (2,)
            assert np.all(np.abs(action) <= 1.0)

    def test_deterministic_without_exploration(self):
        """Test that acting without exploration ignores the generator."""
        policy = _policy(Algorithm.PPO)
        features = np.full(5, 0.3)
        np.testing.assert_array_equal(
            act(policy, features, False, make_rng(0)), act(policy, features, False, make_rng(9))
        )

    def test_feature_length_mismatch(self):
        """Test that a wrong feature length raises DimensionMismatch."""
        with pytest.raises(DimensionMismatch):
            act(_policy(Algorithm.DDPG), np.zeros(3), False, make_rng(0))


class TestUpdates:
    """Tests for the update rules."""

    def test_ddpg_reduces_critic_loss(self):
        """Test that repeated DDPG steps fit the critic to immediate rewards."""
        batch = _batch()
        state = init_learner(_policy(Algorithm.DDPG, gamma=0.0, critic_lr=0.01))
        before = ddpg_critic_loss(batch, state.policy)

        for _ in range(50):
            state = ddpg_update(batch, state)

        assert state.updates == 50
        assert ddpg_critic_loss(batch, state.policy) < before
        assert state.policy.is_finite()

    def test_ddpg_soft_targets(self):
        """Test that targets move only a fraction tau toward the online networks."""
        state = init_learner(_policy(Algorithm.DDPG, tau=0.5))
        original = state.policy.actor

        updated = ddpg_update(_batch(), state).policy

        assert not updated.actor.equals(original)
        for target, old, new in zip(
            updated.target_actor.arrays(), original.arrays(), updated.actor.arrays()
        ):
            np.testing.assert_allclose(target, 0.5 * old + 0.5 * new)

    def test_update_leaves_input_state(self):
        """Test that updates do not mutate the state they receive."""
        state = init_learner(_policy(Algorithm.DDPG))
        actor = state.policy.actor
        ddpg_update(_batch(), state)
        assert state.policy.actor is actor
        assert state.updates == 0

    def test_td3_delays_actor(self):
        """Test that TD3 updates the actor only every policy_delay steps."""
        state = init_learner(_policy(Algorithm.TD3, policy_delay=2))
        rng = make_rng(1)

        skipped = td3_update(_batch(), state, 1, rng)
        assert skipped.policy.actor.equals(state.policy.actor)
        assert not skipped.policy.critics[0].equals(state.policy.critics[0])

        applied = td3_update(_batch(), state, 2, rng)
        assert not applied.policy.actor.equals(state.policy.actor)

    def test_empty_batch(self):
        """Test that updates reject empty batches."""
        with pytest.raises(EmptyBatch):
            ddpg_update(_empty_batch(), init_learner(_policy(Algorithm.DDPG)))
        with pytest.raises(EmptyBatch):
            a2c_update(_empty_batch(), init_learner(_policy(Algorithm.A2C)))

    def test_a2c_log_std_gradient(self):
        """Test the A2C log-std gradient against central differences."""
        batch = _batch(seed=4)
        policy = _policy(Algorithm.A2C)
        gradient = a2c_policy_gradient(batch, policy)
        eps = 1e-6
        for i in range(2):
            bump = np.zeros(2)
            bump[i] = eps
            plus = a2c_objective(batch, replace(policy, log_std=policy.log_std + bump))
            minus = a2c_objective(batch, replace(policy, log_std=policy.log_std - bump))
            assert gradient.log_std[i] == pytest.approx((plus - minus) / (2 * eps), abs=1e-5)

    def test_a2c_update_runs(self):
        """Test that an A2C step changes the actor and log std."""
        state = init_learner(_policy(Algorithm.A2C))
        updated = a2c_update(_batch(), state)

        assert updated.updates == 1
        assert not np.array_equal(updated.policy.log_std, state.policy.log_std)
        assert updated.policy.is_finite()

    def test_ppo_update_counts_minibatches(self):
        """Test that PPO performs epochs times minibatches updates."""
        policy = _policy(Algorithm.PPO, ppo_epochs=3, minibatch_size=4)
        batch = _batch(size=8)
        rollout = Rollout(batch, np.full(8, -1.0))

        updated = ppo_update(rollout, init_learner(policy), make_rng(0))

        assert updated.updates == 6
        assert updated.policy.is_finite()
