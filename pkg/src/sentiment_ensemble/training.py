"""Training loops for the four agents.

Episodes are repeated full passes over the training frames; training stops
after ``total_timesteps`` environment steps. Off-policy agents (DDPG, TD3)
learn from a replay buffer after every step once ``learning_starts`` steps are
collected; on-policy agents (PPO, A2C) learn from rollouts of ``n_steps``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from sentiment_ensemble.agents import (
    AgentHyperparameters,
    AgentPolicy,
    Algorithm,
    LearnerState,
    Rollout,
    a2c_update,
    ddpg_update,
    default_hyperparameters,
    gaussian_log_prob,
    init_learner,
    init_policy,
    ppo_update,
    sample_action,
    td3_update,
)
from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.errors import InsufficientData
from sentiment_ensemble.market_env import (
    EnvConfig,
    MarketFrame,
    check_frames,
    execute_step,
    reset,
)
from sentiment_ensemble.nn import forward
from sentiment_ensemble.replay import ReplayBuffer, TransitionBatch
from sentiment_ensemble.seeding import make_rng, spawn_seeds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentSpec:
    """What to train: a named algorithm with its hyperparameters and seed."""

    algorithm: Algorithm
    hyperparameters: AgentHyperparameters | None = None
    seed: int = 0
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or Algorithm.parse(self.algorithm).value


class _Episodes:
    """Walks repeated passes over the frames, resetting at the last frame."""

    def __init__(self, config: EnvConfig, frames: Sequence[MarketFrame]):
        self.config = config
        self.frames = frames
        self.returns: list[float] = []
        self.state = reset(config, frames)
        self._running = 0.0

    def step(self, action: np.ndarray):
        outcome = execute_step(self.state, action, self.frames, self.config)
        done = outcome.state.day_index == len(self.frames) - 1
        self._running += outcome.reward
        previous, self.state = self.state, outcome.state
        if done:
            self.returns.append(self._running)
            logger.debug("Episode %d return %.2f", len(self.returns), self._running)
            self._running = 0.0
            self.state = reset(self.config, self.frames)
        return previous, outcome.state, outcome.reward, done


def _train_off_policy(
    learner: LearnerState, episodes: _Episodes, rng: np.random.Generator
) -> LearnerState:
    policy = learner.policy
    hp = policy.hyperparameters
    buffer = ReplayBuffer(hp.buffer_capacity, policy.feature_size, policy.n_tickers)
    step_counter = 0
    for t in range(hp.total_timesteps):
        features = learner.policy.features(episodes.state)
        if t < hp.learning_starts:
            action = rng.uniform(-1.0, 1.0, policy.n_tickers)
        else:
            action = np.clip(sample_action(learner.policy, features, rng), -1.0, 1.0)
        _, next_state, reward, done = episodes.step(action)
        buffer.add(
            features,
            action,
            reward * hp.reward_scale,
            learner.policy.features(next_state),
            done,
        )
        if t + 1 >= hp.learning_starts and len(buffer) >= hp.batch_size:
            batch = buffer.sample(hp.batch_size, rng)
            step_counter += 1
            if policy.algorithm is Algorithm.TD3:
                learner = td3_update(batch, learner, step_counter, rng)
            else:
                learner = ddpg_update(batch, learner)
    return learner


def _collect_rollout(
    learner: LearnerState,
    episodes: _Episodes,
    n_steps: int,
    rng: np.random.Generator,
) -> Rollout:
    policy = learner.policy
    hp = policy.hyperparameters
    states, actions, rewards, next_states, dones, log_probs = [], [], [], [], [], []
    for _ in range(n_steps):
        features = policy.features(episodes.state)
        action = sample_action(policy, features, rng)
        mean = forward(policy.actor, features)
        log_probs.append(gaussian_log_prob(action, mean, policy.log_std))
        _, next_state, reward, done = episodes.step(action)
        states.append(features)
        actions.append(action)
        rewards.append(reward * hp.reward_scale)
        next_states.append(policy.features(next_state))
        dones.append(float(done))
    batch = TransitionBatch(
        np.array(states),
        np.array(actions),
        np.array(rewards),
        np.array(next_states),
        np.array(dones),
    )
    return Rollout(batch, np.array(log_probs))


def _train_on_policy(
    learner: LearnerState, episodes: _Episodes, rng: np.random.Generator
) -> LearnerState:
    hp = learner.policy.hyperparameters
    collected = 0
    while collected < hp.total_timesteps:
        n_steps = min(hp.n_steps, hp.total_timesteps - collected)
        rollout = _collect_rollout(learner, episodes, n_steps, rng)
        collected += n_steps
        if learner.policy.algorithm is Algorithm.PPO:
            learner = ppo_update(rollout, learner, rng)
        else:
            learner = a2c_update(rollout.batch, learner)
    return learner


def train_agent(
    algorithm: Algorithm | str,
    config: EnvConfig,
    frames: Sequence[MarketFrame],
    hyperparameters: AgentHyperparameters | None = None,
    seed: int = 0,
    *,
    name: str = "",
    initial_policy: AgentPolicy | None = None,
) -> AgentPolicy:
    """Train one agent on a window of market frames.

    Parameters
    ----------
    algorithm : Algorithm or str
        DDPG, PPO, A2C or TD3.
    config : EnvConfig
        Trading constraints of the training environment.
    frames : Sequence[MarketFrame]
        Training window; needs at least two frames.
    hyperparameters : AgentHyperparameters or None, optional
        Defaults to :func:`default_hyperparameters` of the algorithm.
    seed : int, optional
        Seed of network initialization and of every random draw in training.
    name : str, optional
        Label of the trained policy. Defaults to the algorithm name.
    initial_policy : AgentPolicy or None, optional
        Continue training this policy instead of a fresh one (its feature
        scaling is kept).

    Returns
    -------
    AgentPolicy
        The trained policy, with the training window and episode returns.

    Raises
    ------
    InsufficientData
        If ``frames`` holds fewer than two frames.
    """
    if len(frames) < 2:
        raise InsufficientData(
            f"Training needs at least 2 frames, got {len(frames)}",
            frames=len(frames),
        )
    check_frames(frames, config)
    algorithm = Algorithm.parse(algorithm)
    init_seed, run_seed = spawn_seeds(seed, 2)

    if initial_policy is None:
        hp = hyperparameters or default_hyperparameters(algorithm)
        policy = init_policy(
            algorithm, config, frames[0].close_prices, hp, seed=init_seed, name=name
        )
    else:
        policy = initial_policy
        if hyperparameters is not None:
            policy = replace(policy, hyperparameters=hyperparameters)

    window = DateWindow(frames[0].date, frames[-1].date)
    logger.info(
        "Training %s on %s for %d steps",
        policy.name,
        window,
        policy.hyperparameters.total_timesteps,
    )
    rng = make_rng(run_seed)
    episodes = _Episodes(config, frames)
    learner = init_learner(policy)
    if algorithm.off_policy:
        learner = _train_off_policy(learner, episodes, rng)
    else:
        learner = _train_on_policy(learner, episodes, rng)

    trained = replace(
        learner.policy,
        seed=seed,
        training_window=window,
        episode_returns=tuple(episodes.returns),
    )
    if not trained.is_finite():
        logger.warning("Training of %s produced non-finite parameters", trained.name)
    logger.info(
        "Finished training %s after %d updates (%d episodes)",
        trained.name,
        learner.updates,
        len(episodes.returns),
    )
    return trained


def train_agents(
    specs: Sequence[AgentSpec],
    config: EnvConfig,
    frames: Sequence[MarketFrame],
    workers: int = 1,
) -> list[AgentPolicy]:
    """Train several agents, concurrently when ``workers > 1``.

    Results come back in the order of ``specs`` whatever the scheduling.
    """

    def _train(spec: AgentSpec) -> AgentPolicy:
        return train_agent(
            spec.algorithm,
            config,
            frames,
            spec.hyperparameters,
            spec.seed,
            name=spec.label,
        )

    if workers <= 1 or len(specs) <= 1:
        return [_train(spec) for spec in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train, specs))
