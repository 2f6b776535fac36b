"""Actor-critic trading agents: DDPG, PPO, A2C and TD3.

All four share one policy record (:class:`AgentPolicy`) and one action
interface (:func:`act`). Update rules are pure functions from a
:class:`LearnerState` and a batch to a new :class:`LearnerState`.

DDPG and TD3 use a deterministic tanh actor with Gaussian exploration noise
and Q critics over ``[state, action]``. PPO and A2C use a diagonal Gaussian
policy whose mean is the tanh actor output and whose log standard deviation is
a learned, state-independent vector; their critic is a state-value network.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from sentiment_ensemble.dates import DateWindow
from sentiment_ensemble.errors import DimensionMismatch
from sentiment_ensemble.market_env import EnvConfig, PortfolioState
from sentiment_ensemble.nn import (
    AdamState,
    GradientTape,
    MlpParams,
    adam_update,
    backward,
    forward,
    init_mlp,
    optimizer_step,
    polyak_update,
)
from sentiment_ensemble.replay import TransitionBatch, require_nonempty
from sentiment_ensemble.seeding import make_rng

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


class Algorithm(str, Enum):
    """Supported learning algorithms."""

    DDPG = "DDPG"
    PPO = "PPO"
    A2C = "A2C"
    TD3 = "TD3"

    @property
    def off_policy(self) -> bool:
        return self in (Algorithm.DDPG, Algorithm.TD3)

    @classmethod
    def parse(cls, value: "str | Algorithm") -> "Algorithm":
        if isinstance(value, Algorithm):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError as err:
            choices = ", ".join(a.value for a in cls)
            raise ValueError(
                f"Unknown algorithm {value!r}, expected one of {choices}"
            ) from err


@dataclass(frozen=True)
class AgentHyperparameters:
    """Learning hyperparameters; fields unused by an algorithm are ignored.

    Attributes
    ----------
    gamma : float
        Discount factor in [0, 1].
    tau : float
        Soft target update rate in (0, 1] (DDPG, TD3).
    actor_lr, critic_lr : float
        Learning rates of DDPG/TD3 networks.
    learning_rate : float
        Learning rate of PPO/A2C networks.
    clip_epsilon : float
        PPO clipping range in (0, 1).
    ppo_epochs, minibatch_size : int
        PPO passes over each rollout and minibatch length.
    n_steps : int
        On-policy rollout length (PPO, A2C).
    gae_lambda : float
        PPO advantage smoothing.
    buffer_capacity, batch_size, learning_starts : int
        Replay settings (DDPG, TD3).
    exploration_noise : float
        Standard deviation of Gaussian action noise (DDPG, TD3).
    policy_delay : int
        Critic updates per actor update (TD3).
    target_noise, target_noise_clip : float
        Target policy smoothing noise and its clip (TD3).
    log_std_init : float
        Initial log standard deviation of Gaussian policies (PPO, A2C).
    hidden_sizes : tuple of int
        Hidden layer widths of every network.
    total_timesteps : int
        Environment steps per training run.
    reward_scale : float
        Factor applied to rewards before learning.
    max_grad_norm : float
        Global gradient norm clip; 0 disables.
    """

    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    learning_rate: float = 3e-4
    clip_epsilon: float = 0.2
    ppo_epochs: int = 10
    minibatch_size: int = 64
    n_steps: int = 256
    gae_lambda: float = 0.95
    buffer_capacity: int = 100_000
    batch_size: int = 64
    learning_starts: int = 100
    exploration_noise: float = 0.1
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    log_std_init: float = math.log(0.5)
    hidden_sizes: tuple[int, ...] = (64, 64)
    total_timesteps: int = 10_000
    reward_scale: float = 1e-4
    max_grad_norm: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must be in [0, 1]")
        for name in ("actor_lr", "critic_lr", "learning_rate", "exploration_noise",
                     "target_noise", "target_noise_clip", "max_grad_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("ppo_epochs", "minibatch_size", "n_steps", "buffer_capacity",
                     "batch_size", "policy_delay", "total_timesteps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_starts < 0:
            raise ValueError("learning_starts must be nonnegative")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must list positive widths")


def default_hyperparameters(algorithm: Algorithm) -> AgentHyperparameters:
    """Per-algorithm defaults: short rollouts for A2C, gradient clipping for PPO/A2C."""
    algorithm = Algorithm.parse(algorithm)
    if algorithm is Algorithm.A2C:
        return AgentHyperparameters(n_steps=5, max_grad_norm=0.5)
    if algorithm is Algorithm.PPO:
        return AgentHyperparameters(max_grad_norm=0.5)
    return AgentHyperparameters()


def state_features(
    state: PortfolioState,
    initial_balance: float,
    base_prices: np.ndarray,
    h_max: int,
) -> np.ndarray:
    """Normalized ``[b, p, h]`` feature vector of length ``2D + 1``."""
    return np.concatenate(
        (
            [state.balance / initial_balance],
            state.prices / base_prices,
            state.holdings / h_max,
        )
    )


@dataclass(frozen=True, eq=False)
class AgentPolicy:
    """Networks, hyperparameters and feature scaling of one trained agent.

    ``critics`` holds one Q network for DDPG, two for TD3, and one state-value
    network for PPO and A2C. ``target_actor`` and ``target_critics`` are only
    used by DDPG and TD3.
    """

    algorithm: Algorithm
    actor: MlpParams
    critics: tuple[MlpParams, ...]
    hyperparameters: AgentHyperparameters
    seed: int
    base_prices: np.ndarray
    initial_balance: float
    h_max: int
    target_actor: MlpParams | None = None
    target_critics: tuple[MlpParams, ...] = ()
    log_std: np.ndarray | None = None
    name: str = ""
    training_window: DateWindow | None = None
    episode_returns: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if not self.name:
            object.__setattr__(self, "name", self.algorithm.value)
        prices = np.array(self.base_prices, dtype=np.float64, copy=True)
        prices.setflags(write=False)
        object.__setattr__(self, "base_prices", prices)

    @property
    def n_tickers(self) -> int:
        return self.actor.output_size

    @property
    def feature_size(self) -> int:
        return self.actor.input_size

    def features(self, state: PortfolioState) -> np.ndarray:
        return state_features(state, self.initial_balance, self.base_prices, self.h_max)

    def decide(
        self,
        state: PortfolioState,
        config: EnvConfig,
        rng: np.random.Generator,
        explore: bool = False,
    ) -> np.ndarray:
        return act(self, self.features(state), explore, rng)

    def is_finite(self) -> bool:
        networks = [self.actor, *self.critics, *self.target_critics]
        if self.target_actor is not None:
            networks.append(self.target_actor)
        arrays = [a for net in networks for a in net.arrays()]
        if self.log_std is not None:
            arrays.append(self.log_std)
        return all(np.all(np.isfinite(a)) for a in arrays)


def init_policy(
    algorithm: Algorithm | str,
    config: EnvConfig,
    base_prices: np.ndarray,
    hyperparameters: AgentHyperparameters | None = None,
    seed: int = 0,
    name: str = "",
) -> AgentPolicy:
    """Freshly initialized policy for ``len(base_prices)`` tickers."""
    algorithm = Algorithm.parse(algorithm)
    hp = hyperparameters or default_hyperparameters(algorithm)
    rng = make_rng(seed)
    n_tickers = len(base_prices)
    n_features = 2 * n_tickers + 1
    hidden = list(hp.hidden_sizes)

    actor = init_mlp([n_features, *hidden, n_tickers], rng, output_activation="tanh")
    if algorithm.off_policy:
        n_critics = 2 if algorithm is Algorithm.TD3 else 1
        critics = tuple(
            init_mlp([n_features + n_tickers, *hidden, 1], rng) for _ in range(n_critics)
        )
        return AgentPolicy(
            algorithm=algorithm,
            actor=actor,
            critics=critics,
            hyperparameters=hp,
            seed=seed,
            base_prices=base_prices,
            initial_balance=config.initial_balance,
            h_max=config.h_max,
            target_actor=actor,
            target_critics=critics,
            name=name,
        )
    critic = init_mlp([n_features, *hidden, 1], rng)
    return AgentPolicy(
        algorithm=algorithm,
        actor=actor,
        critics=(critic,),
        hyperparameters=hp,
        seed=seed,
        base_prices=base_prices,
        initial_balance=config.initial_balance,
        h_max=config.h_max,
        log_std=np.full(n_tickers, hp.log_std_init),
        name=name,
    )


def _check_features(policy: AgentPolicy, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != policy.feature_size:
        raise DimensionMismatch(
            f"Feature vector of length {features.shape[-1]} does not match "
            f"actor input size {policy.feature_size}"
        )
    return features


def sample_action(
    policy: AgentPolicy, features: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Unclamped exploratory action: noisy actor output or a Gaussian sample."""
    features = _check_features(policy, features)
    mean = forward(policy.actor, features)
    if policy.algorithm.off_policy:
        noise = rng.normal(0.0, policy.hyperparameters.exploration_noise, mean.shape)
        return mean + noise
    return mean + np.exp(policy.log_std) * rng.standard_normal(mean.shape)


def act(
    policy: AgentPolicy,
    features: np.ndarray,
    explore: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    """Action in [-1, 1]^D for a feature vector.

    Without exploration the actor output (DDPG, TD3) or the distribution mean
    (PPO, A2C) is returned; with exploration, seeded noise is added or the
    distribution is sampled. The result is always clamped to [-1, 1].

    Raises
    ------
    DimensionMismatch
        If the feature length differs from the actor input size.
    """
    if explore:
        action = sample_action(policy, features, rng)
    else:
        action = forward(policy.actor, _check_features(policy, features))
    return np.clip(action, -1.0, 1.0)


def gaussian_log_prob(
    actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray
) -> np.ndarray:
    """Log-density of a diagonal Gaussian, summed over the last axis."""
    z = (actions - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * _LOG_2PI, axis=-1)


def _as_output(value: np.ndarray):
    return value.item() if np.ndim(value) == 0 else value


def ddpg_target(r, gamma: float, done, q_target_next):
    """Bellman backup ``r + gamma * (1 - done) * q_target_next``.

    Terminal transitions return ``r`` exactly, whatever ``q_target_next`` is.
    Accepts scalars or arrays.
    """
    r = np.asarray(r, dtype=np.float64)
    terminal = np.asarray(done, dtype=bool)
    return _as_output(np.where(terminal, r, r + gamma * np.asarray(q_target_next)))


def td3_target(r, gamma: float, done, q1_target_next, q2_target_next):
    """Clipped double-Q backup: :func:`ddpg_target` on the smaller target value."""
    return ddpg_target(r, gamma, done, np.minimum(q1_target_next, q2_target_next))


def a2c_advantage(r, gamma: float, v_next, v_now, done):
    """One-step advantage ``r + gamma * (1 - done) * v_next - v_now``."""
    return _as_output(np.asarray(ddpg_target(r, gamma, done, v_next)) - v_now)


def probability_ratio(logp_new, logp_old):
    """Policy probability ratio ``exp(logp_new - logp_old)``."""
    return _as_output(np.exp(np.asarray(logp_new) - np.asarray(logp_old)))


def ppo_surrogate(ratio, advantage, epsilon: float):
    """Clipped surrogate ``min(r * A, clip(r, 1 - eps, 1 + eps) * A)``."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    unclipped = ratio * advantage
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage
    return _as_output(np.minimum(unclipped, clipped))


def _pairs(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.concatenate((states, actions), axis=1)


def q_values(critic: MlpParams, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return forward(critic, _pairs(states, actions))[:, 0]


def state_values(critic: MlpParams, states: np.ndarray) -> np.ndarray:
    return forward(critic, states)[:, 0]


def _mse_and_tape(
    critic: MlpParams, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, GradientTape]:
    errors = forward(critic, inputs)[:, 0] - targets
    upstream = (2.0 / len(errors)) * errors[:, None]
    return float(np.mean(errors * errors)), backward(critic, inputs, upstream)


def _ddpg_backup(batch: TransitionBatch, policy: AgentPolicy) -> np.ndarray:
    hp = policy.hyperparameters
    next_actions = forward(policy.target_actor, batch.next_states)
    q_next = q_values(policy.target_critics[0], batch.next_states, next_actions)
    return np.asarray(ddpg_target(batch.rewards, hp.gamma, batch.dones, q_next))


def ddpg_critic_loss(batch: TransitionBatch, policy: AgentPolicy) -> float:
    """Mean squared Bellman error of the (first) critic against target backups.

    Raises
    ------
    EmptyBatch
        If the batch is empty.
    """
    require_nonempty(batch)
    targets = _ddpg_backup(batch, policy)
    errors = q_values(policy.critics[0], batch.states, batch.actions) - targets
    return float(np.mean(errors * errors))


def ddpg_actor_objective(batch: TransitionBatch, policy: AgentPolicy) -> float:
    """Mean critic value ``Q(s, mu(s))`` over the batch states."""
    require_nonempty(batch)
    actions = forward(policy.actor, batch.states)
    return float(np.mean(q_values(policy.critics[0], batch.states, actions)))


def ddpg_actor_gradient(batch: TransitionBatch, policy: AgentPolicy) -> GradientTape:
    """Gradient of :func:`ddpg_actor_objective` w.r.t. the actor, critic held fixed."""
    require_nonempty(batch)
    states = batch.states
    actions = forward(policy.actor, states)
    critic = policy.critics[0]
    n = len(states)
    critic_tape = backward(critic, _pairs(states, actions), np.full((n, 1), 1.0 / n))
    dq_da = critic_tape.inputs[:, states.shape[1]:]
    return backward(policy.actor, states, dq_da)


class PolicyGradient(NamedTuple):
    """Gradient of a Gaussian policy objective."""

    actor: GradientTape
    log_std: np.ndarray


def _gaussian_policy_gradient(
    policy: AgentPolicy, states: np.ndarray, actions: np.ndarray, coef: np.ndarray
) -> PolicyGradient:
    """Gradient of ``sum(coef * log pi(a | s))`` with ``coef`` held constant."""
    mean = forward(policy.actor, states)
    inv_var = np.exp(-2.0 * policy.log_std)
    diff = actions - mean
    d_mean = coef[:, None] * diff * inv_var
    d_log_std = np.sum(coef[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    return PolicyGradient(backward(policy.actor, states, d_mean), d_log_std)


def a2c_advantages(batch: TransitionBatch, policy: AgentPolicy) -> np.ndarray:
    """One-step advantages of a batch under the current value network."""
    critic = policy.critics[0]
    return np.asarray(
        a2c_advantage(
            batch.rewards,
            policy.hyperparameters.gamma,
            state_values(critic, batch.next_states),
            state_values(critic, batch.states),
            batch.dones,
        )
    )


def a2c_objective(batch: TransitionBatch, policy: AgentPolicy) -> float:
    """Mean ``log pi(a | s) * A(s, a)`` with advantages from the value network."""
    require_nonempty(batch)
    advantages = a2c_advantages(batch, policy)
    mean = forward(policy.actor, batch.states)
    logp = gaussian_log_prob(batch.actions, mean, policy.log_std)
    return float(np.mean(logp * advantages))


def a2c_policy_gradient(batch: TransitionBatch, policy: AgentPolicy) -> PolicyGradient:
    """Gradient of :func:`a2c_objective`, treating advantages as constants.

    Raises
    ------
    EmptyBatch
        If the batch is empty.
    """
    require_nonempty(batch)
    coef = a2c_advantages(batch, policy) / len(batch)
    return _gaussian_policy_gradient(policy, batch.states, batch.actions, coef)


def ppo_objective(
    policy: AgentPolicy,
    states: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
) -> float:
    """Mean clipped surrogate of a minibatch."""
    mean = forward(policy.actor, states)
    ratio = probability_ratio(gaussian_log_prob(actions, mean, policy.log_std), logp_old)
    eps = policy.hyperparameters.clip_epsilon
    return float(np.mean(ppo_surrogate(ratio, advantages, eps)))


def ppo_policy_gradient(
    policy: AgentPolicy,
    states: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
) -> PolicyGradient:
    """Gradient of :func:`ppo_objective`; samples whose ratio is clipped contribute zero."""
    mean = forward(policy.actor, states)
    ratio = np.asarray(
        probability_ratio(gaussian_log_prob(actions, mean, policy.log_std), logp_old)
    )
    eps = policy.hyperparameters.clip_epsilon
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    active = unclipped <= clipped
    coef = np.where(active, advantages * ratio, 0.0) / len(states)
    return _gaussian_policy_gradient(policy, states, actions, coef)


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Generalized advantage estimates of a rollout, computed backwards."""
    advantages = np.zeros(len(rewards))
    running = 0.0
    for t in reversed(range(len(rewards))):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * live * next_values[t] - values[t]
        running = delta + gamma * lam * live * running
        advantages[t] = running
    return advantages


@dataclass(frozen=True, eq=False)
class LearnerState:
    """A policy together with the optimizer state that trains it."""

    policy: AgentPolicy
    actor_opt: AdamState
    critic_opts: tuple[AdamState, ...]
    log_std_opt: AdamState | None = None
    updates: int = 0


def init_learner(policy: AgentPolicy) -> LearnerState:
    log_std_opt = None
    if policy.log_std is not None:
        log_std_opt = AdamState.zeros_like([policy.log_std])
    return LearnerState(
        policy=policy,
        actor_opt=AdamState.zeros_like(policy.actor.arrays()),
        critic_opts=tuple(AdamState.zeros_like(c.arrays()) for c in policy.critics),
        log_std_opt=log_std_opt,
    )


def _fit_critic(
    critic: MlpParams,
    opt: AdamState,
    inputs: np.ndarray,
    targets: np.ndarray,
    hp: AgentHyperparameters,
    learning_rate: float,
) -> tuple[MlpParams, AdamState]:
    _, tape = _mse_and_tape(critic, inputs, targets)
    return optimizer_step(critic, tape.clipped(hp.max_grad_norm), opt, learning_rate)


def _ascend_actor(
    state: LearnerState, gradient: GradientTape, learning_rate: float
) -> tuple[MlpParams, AdamState]:
    hp = state.policy.hyperparameters
    tape = gradient.scaled(-1.0).clipped(hp.max_grad_norm)
    return optimizer_step(state.policy.actor, tape, state.actor_opt, learning_rate)


def _ascend_gaussian(
    state: LearnerState, gradient: PolicyGradient
) -> tuple[MlpParams, np.ndarray, AdamState, AdamState]:
    hp = state.policy.hyperparameters
    actor, actor_opt = _ascend_actor(state, gradient.actor, hp.learning_rate)
    (log_std,), log_std_opt = adam_update(
        [state.policy.log_std], [-gradient.log_std], state.log_std_opt, hp.learning_rate
    )
    return actor, log_std, actor_opt, log_std_opt


def ddpg_update(batch: TransitionBatch, state: LearnerState) -> LearnerState:
    """One DDPG step: critic regression, actor ascent, soft target updates."""
    require_nonempty(batch)
    policy = state.policy
    hp = policy.hyperparameters
    targets = _ddpg_backup(batch, policy)
    critic, critic_opt = _fit_critic(
        policy.critics[0],
        state.critic_opts[0],
        _pairs(batch.states, batch.actions),
        targets,
        hp,
        hp.critic_lr,
    )
    policy = replace(policy, critics=(critic,))
    actor, actor_opt = _ascend_actor(
        replace(state, policy=policy), ddpg_actor_gradient(batch, policy), hp.actor_lr
    )
    policy = replace(
        policy,
        actor=actor,
        target_actor=polyak_update(policy.target_actor, actor, hp.tau),
        target_critics=(polyak_update(policy.target_critics[0], critic, hp.tau),),
    )
    return replace(
        state,
        policy=policy,
        actor_opt=actor_opt,
        critic_opts=(critic_opt,),
        updates=state.updates + 1,
    )


def td3_critic_targets(
    batch: TransitionBatch, policy: AgentPolicy, rng: np.random.Generator
) -> np.ndarray:
    """Backups from smoothed target actions and the smaller twin target critic."""
    hp = policy.hyperparameters
    next_mean = forward(policy.target_actor, batch.next_states)
    noise = np.clip(
        rng.normal(0.0, hp.target_noise, next_mean.shape),
        -hp.target_noise_clip,
        hp.target_noise_clip,
    )
    next_actions = np.clip(next_mean + noise, -1.0, 1.0)
    q1 = q_values(policy.target_critics[0], batch.next_states, next_actions)
    q2 = q_values(policy.target_critics[1], batch.next_states, next_actions)
    return np.asarray(td3_target(batch.rewards, hp.gamma, batch.dones, q1, q2))


def td3_update(
    batch: TransitionBatch,
    state: LearnerState,
    step_counter: int,
    rng: np.random.Generator,
) -> LearnerState:
    """One TD3 step.

    Both critics regress on the clipped double-Q backup. The actor and all
    target networks are updated only when ``step_counter`` is a multiple of
    ``policy_delay``.
    """
    require_nonempty(batch)
    policy = state.policy
    hp = policy.hyperparameters
    targets = td3_critic_targets(batch, policy, rng)
    inputs = _pairs(batch.states, batch.actions)
    fitted = [
        _fit_critic(critic, opt, inputs, targets, hp, hp.critic_lr)
        for critic, opt in zip(policy.critics, state.critic_opts)
    ]
    critics = tuple(critic for critic, _ in fitted)
    critic_opts = tuple(opt for _, opt in fitted)
    policy = replace(policy, critics=critics)
    state = replace(state, policy=policy, critic_opts=critic_opts)

    if step_counter % hp.policy_delay == 0:
        actor, actor_opt = _ascend_actor(
            state, ddpg_actor_gradient(batch, policy), hp.actor_lr
        )
        policy = replace(
            policy,
            actor=actor,
            target_actor=polyak_update(policy.target_actor, actor, hp.tau),
            target_critics=tuple(
                polyak_update(target, online, hp.tau)
                for target, online in zip(policy.target_critics, critics)
            ),
        )
        state = replace(state, policy=policy, actor_opt=actor_opt)
    return replace(state, updates=state.updates + 1)


def a2c_update(batch: TransitionBatch, state: LearnerState) -> LearnerState:
    """One A2C step on an on-policy batch: policy ascent and value regression."""
    require_nonempty(batch)
    policy = state.policy
    hp = policy.hyperparameters
    gradient = a2c_policy_gradient(batch, policy)
    values_next = state_values(policy.critics[0], batch.next_states)
    targets = np.asarray(ddpg_target(batch.rewards, hp.gamma, batch.dones, values_next))
    critic, critic_opt = _fit_critic(
        policy.critics[0], state.critic_opts[0], batch.states, targets, hp, hp.learning_rate
    )
    actor, log_std, actor_opt, log_std_opt = _ascend_gaussian(state, gradient)
    return replace(
        state,
        policy=replace(policy, actor=actor, log_std=log_std, critics=(critic,)),
        actor_opt=actor_opt,
        critic_opts=(critic_opt,),
        log_std_opt=log_std_opt,
        updates=state.updates + 1,
    )


@dataclass(frozen=True, eq=False)
class Rollout:
    """On-policy transitions with the log-probabilities they were sampled at."""

    batch: TransitionBatch
    log_probs: np.ndarray


def _normalized(values: np.ndarray) -> np.ndarray:
    if len(values) < 2:
        return values
    std = values.std()
    if std == 0:
        return values - values.mean()
    return (values - values.mean()) / (std + 1e-8)


def ppo_update(
    rollout: Rollout, state: LearnerState, rng: np.random.Generator
) -> LearnerState:
    """PPO epochs over a rollout.

    Advantages come from generalized advantage estimation under the value
    network at the start of the update, and are normalized per minibatch.
    """
    batch = rollout.batch
    require_nonempty(batch)
    hp = state.policy.hyperparameters
    critic = state.policy.critics[0]
    values = state_values(critic, batch.states)
    advantages = gae_advantages(
        batch.rewards,
        values,
        state_values(critic, batch.next_states),
        batch.dones,
        hp.gamma,
        hp.gae_lambda,
    )
    returns = advantages + values

    n = len(batch)
    for _ in range(hp.ppo_epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.minibatch_size):
            idx = order[start : start + hp.minibatch_size]
            policy = state.policy
            gradient = ppo_policy_gradient(
                policy,
                batch.states[idx],
                batch.actions[idx],
                rollout.log_probs[idx],
                _normalized(advantages[idx]),
            )
            critic, critic_opt = _fit_critic(
                policy.critics[0],
                state.critic_opts[0],
                batch.states[idx],
                returns[idx],
                hp,
                hp.learning_rate,
            )
            actor, log_std, actor_opt, log_std_opt = _ascend_gaussian(state, gradient)
            state = replace(
                state,
                policy=replace(policy, actor=actor, log_std=log_std, critics=(critic,)),
                actor_opt=actor_opt,
                critic_opts=(critic_opt,),
                log_std_opt=log_std_opt,
                updates=state.updates + 1,
            )
    return state
