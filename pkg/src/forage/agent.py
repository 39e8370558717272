"""Recurrent Q-policy wrapper: parameters, state lifecycle, action choice.

The prime and helper use structurally identical networks that differ only
in input width (the prime's observation carries the goodness bits). The
recurrent state is the only memory an agent carries across steps; it is
reset to zeros at every episode boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from forage import nn
from forage.env import HELPER_OBS_SIZE, PRIME_OBS_SIZE

ROLES = ("prime", "helper")


def input_size_for_role(role: str) -> int:
    if role == "prime":
        return PRIME_OBS_SIZE
    if role == "helper":
        return HELPER_OBS_SIZE
    raise ValueError(f"role must be one of {ROLES}, got {role!r}")


@dataclass
class PolicyNet:
    """One agent's parameters: LSTM cell plus linear Q head."""

    lstm: nn.LSTMParams
    head: nn.LinearParams
    role: str

    def __post_init__(self):
        expect = input_size_for_role(self.role)
        if self.lstm.input_size != expect:
            raise ValueError(
                f"{self.role} policy needs input size {expect}, "
                f"got {self.lstm.input_size}")

    @property
    def hidden_size(self) -> int:
        return self.lstm.hidden_size

    def arrays(self) -> list[np.ndarray]:
        return nn.param_arrays(self.lstm, self.head)


def make_policy(rng: np.random.Generator, role: str, hidden_size: int,
                dtype=np.float32) -> PolicyNet:
    lstm, head = nn.init_params(rng, input_size_for_role(role), hidden_size, dtype=dtype)
    return PolicyNet(lstm=lstm, head=head, role=role)


def reset_state(policy: PolicyNet, batch: int = 1) -> nn.LSTMState:
    """Fresh all-zero recurrent state for an episode start."""
    return nn.zero_state(policy.hidden_size, batch=batch, dtype=policy.lstm.w_x.dtype)


def select_action(q: np.ndarray, epsilon: float, rng: Optional[np.random.Generator]) -> int:
    """Greedy argmax with lowest-index tie-break; with probability epsilon a
    uniform random action (greedy included). epsilon=0 consumes no randomness
    and is exactly greedy."""
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon-greedy selection needs an rng")
        if rng.random() < epsilon:
            return int(rng.integers(nn.NUM_ACTIONS))
    return int(np.argmax(q))


def act(
    policy: PolicyNet,
    state: nn.LSTMState,
    obs: np.ndarray,
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> tuple[int, nn.LSTMState, np.ndarray]:
    """Advance the recurrent state on one observation and pick an action.

    Returns (action, new_state, q) with q the length-3 action-value vector.
    """
    if obs.ndim != 1:
        raise ValueError(f"act takes a single observation, got shape {obs.shape}")
    new_state, _ = nn.lstm_step(policy.lstm, state, obs[None, :].astype(policy.lstm.w_x.dtype))
    q = nn.q_head(policy.head, new_state.h)[0]
    return select_action(q, epsilon, rng), new_state, q
