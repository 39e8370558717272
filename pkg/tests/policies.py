"""Scripted policies used as fixtures: oracles and the observed-policy shapes.

These follow the scripted-policy protocol the rollout helpers accept:
reset_episode(task, script) at episode start, then act(obs) once per step.
They may read the task and script (they are test fixtures, not agents).
"""

from forage.env import (
    Action,
    END_CELLS,
    EPISODE_STEPS,
    HELPER_START,
    OBJECT_LIFETIME,
    PRIME_START,
)


def _toward(pos, target):
    if target < pos:
        return int(Action.LEFT)
    if target > pos:
        return int(Action.RIGHT)
    return int(Action.STAY)


class StayPolicy:
    """Never moves."""

    def __init__(self, role):
        self.role = role

    def reset_episode(self, task, script):
        pass

    def act(self, obs):
        return int(Action.STAY)


class RandomPolicy:
    """Uniform random actions from its own generator."""

    def __init__(self, role, rng):
        self.role = role
        self.rng = rng

    def reset_episode(self, task, script):
        pass

    def act(self, obs):
        return int(self.rng.integers(3))


class MoveUntilPolicy:
    """Moves in one direction until a cutoff step, then stays."""

    def __init__(self, role, action, until):
        self.role = role
        self.action = int(action)
        self.until = until
        self.t = 0

    def reset_episode(self, task, script):
        self.t = 0

    def act(self, obs):
        a = self.action if self.t < self.until else int(Action.STAY)
        self.t += 1
        return a


class OracleHelper:
    """Collects every good object and never touches a bad one.

    Reads the script and task, walks to each good object's end cell timed to
    arrive no earlier than its spawn, waits on the adjacent inner cell when
    early, and parks at the center once done (end cells are unsafe to idle
    on: a bad object could spawn underfoot). With skip_first=True the
    episode's first object is left alone even when good (the prime's job in
    the observed joint policy).
    """

    role = "helper"

    def __init__(self, skip_first=False):
        self.skip_first = skip_first

    def reset_episode(self, task, script):
        entries = script.entries
        self.targets = [
            (e.t, e.cell) for k, e in enumerate(entries)
            if task.is_good(e.cls) and not (self.skip_first and k == 0)
        ]
        self.idx = 0
        self.pos = HELPER_START
        self.t = 0

    def act(self, obs):
        if self.idx >= len(self.targets):
            action = _toward(self.pos, 2) if self.pos in END_CELLS else int(Action.STAY)
        else:
            spawn_t, cell = self.targets[self.idx]
            dist = abs(self.pos - cell)
            if dist == 0 and self.t + 1 < spawn_t:
                # parked on the end cell too early: another object could
                # spawn underfoot, so retreat to the inner neighbour
                action = int(Action.RIGHT) if cell == 0 else int(Action.LEFT)
            elif dist == 1 and self.t + 1 < spawn_t:
                action = int(Action.STAY)  # don't step onto the end cell early
            else:
                action = _toward(self.pos, cell)

        self.pos = min(4, max(0, self.pos + (-1 if action == 0 else (1 if action == 1 else 0))))
        self.t += 1
        if self.idx < len(self.targets):
            spawn_t, cell = self.targets[self.idx]
            if self.pos == cell and self.t >= spawn_t:
                self.idx += 1
        return action


class FigTwoPrime:
    """The observed prime policy: collect the first object if it is good,
    otherwise never move; in both cases stay put afterwards."""

    role = "prime"

    def reset_episode(self, task, script):
        first = script.entries[0]
        self.collect_it = task.is_good(first.cls)
        self.target = first.cell
        self.pos = PRIME_START

    def act(self, obs):
        if not self.collect_it or self.pos == self.target:
            return int(Action.STAY)
        action = _toward(self.pos, self.target)
        self.pos = min(4, max(0, self.pos + (-1 if action == 0 else 1)))
        return action


def verify_oracle_collects_all(task, script):
    """Count of good objects the oracle provably reaches (window check)."""
    goods = [(e.t, e.cell) for e in script.entries if task.is_good(e.cls)]
    pos, t, got = HELPER_START, 0, 0
    for spawn_t, cell in goods:
        arrive = max(spawn_t, t + abs(pos - cell))
        if arrive <= spawn_t + OBJECT_LIFETIME - 1 and arrive <= EPISODE_STEPS:
            got += 1
            pos, t = cell, arrive
    return got, len(goods)
