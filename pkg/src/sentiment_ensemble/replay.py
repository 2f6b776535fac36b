"""Fixed-capacity FIFO store of transitions for off-policy learners."""

from dataclasses import dataclass

import numpy as np

from sentiment_ensemble.errors import EmptyBatch


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    """Column arrays of transitions ``(s, a, r, s', d)``.

    ``actions`` holds the action the learner produced (for Gaussian policies,
    the sample before clamping to [-1, 1]).
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)

    def subset(self, indices: np.ndarray) -> "TransitionBatch":
        return TransitionBatch(
            self.states[indices],
            self.actions[indices],
            self.rewards[indices],
            self.next_states[indices],
            self.dones[indices],
        )


def require_nonempty(batch: TransitionBatch) -> None:
    if len(batch) == 0:
        raise EmptyBatch("Update received an empty batch")


class ReplayBuffer:
    """Ring buffer of transitions with uniform sampling.

    Once full, each insertion evicts the oldest transition.

    Parameters
    ----------
    capacity : int
        Maximum number of stored transitions.
    state_size : int
        Length of a state feature vector.
    action_size : int
        Length of an action vector.
    """

    def __init__(self, capacity: int, state_size: int, action_size: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_size))
        self._actions = np.zeros((capacity, action_size))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_size))
        self._dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, state, action, reward: float, next_state, done: bool) -> None:
        i = self._next
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _ordered_indices(self) -> np.ndarray:
        start = self._next if self._size == self.capacity else 0
        return (start + np.arange(self._size)) % self.capacity

    def contents(self) -> TransitionBatch:
        """Every stored transition, oldest first."""
        return self._gather(self._ordered_indices())

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Slot indices drawn uniformly with replacement."""
        if self._size == 0:
            raise EmptyBatch("Cannot sample from an empty replay buffer")
        return rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        return self._gather(self.sample_indices(batch_size, rng))

    def _gather(self, indices: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            self._states[indices],
            self._actions[indices],
            self._rewards[indices],
            self._next_states[indices],
            self._dones[indices],
        )
