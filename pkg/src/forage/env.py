"""1-D foraging gridworld for two agents with a hidden per-episode reward rule.

Five cells in a row. Objects from two classes appear alternately at the two
end cells on a fixed schedule, live for 9 steps, and vanish. One class is
"good" (+1 when collected), the other "bad" (-1); which is which is the
episode's hidden task. The prime agent's observation carries a per-object
goodness bit, the helper's does not. Moving costs the prime -0.1 per step;
the helper moves for free. An episode is exactly 100 steps.

Everything here is deterministic given (task, script, action sequences).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np

GRID_CELLS = 5
EPISODE_STEPS = 100
NUM_OBJECTS = 20
OBJECT_LIFETIME = 9
SPAWN_PERIOD = 5
MOVE_PENALTY = 0.1
PRIME_START = 1
HELPER_START = 3

# Per-cell observation layout, cells serialized left to right.
# [prime_present, helper_present, object_present, class_is_A, class_is_B]
# plus a trailing goodness bit for the prime.
HELPER_CELL_BITS = 5
PRIME_CELL_BITS = 6
HELPER_OBS_SIZE = GRID_CELLS * HELPER_CELL_BITS  # 25
PRIME_OBS_SIZE = GRID_CELLS * PRIME_CELL_BITS    # 30

END_CELLS = (0, GRID_CELLS - 1)


class ObjectClass(IntEnum):
    A = 0
    B = 1


class Action(IntEnum):
    LEFT = 0
    RIGHT = 1
    STAY = 2


NUM_ACTIONS = 3
ACTION_DELTA = {Action.LEFT: -1, Action.RIGHT: 1, Action.STAY: 0}


@dataclass(frozen=True)
class TaskSpec:
    """The hidden reward rule: which object class is worth +1."""

    good_class: ObjectClass

    def flipped(self) -> "TaskSpec":
        return TaskSpec(ObjectClass(1 - self.good_class))

    def is_good(self, cls: ObjectClass) -> bool:
        return cls == self.good_class


class ScriptEntry(NamedTuple):
    t: int
    cell: int
    cls: ObjectClass


@dataclass(frozen=True)
class SpawnScript:
    """Replayable schedule of the 20 object appearances in an episode."""

    entries: tuple[ScriptEntry, ...]

    def __post_init__(self):
        es = self.entries
        if len(es) != NUM_OBJECTS:
            raise ValueError(f"script must have {NUM_OBJECTS} entries, got {len(es)}")
        for i, e in enumerate(es):
            if not (0 <= e.t < EPISODE_STEPS):
                raise ValueError(f"entry {i}: spawn time {e.t} outside [0,{EPISODE_STEPS})")
            if e.cell not in END_CELLS:
                raise ValueError(f"entry {i}: objects spawn only at cells {END_CELLS}")
            if i > 0:
                if e.t <= es[i - 1].t:
                    raise ValueError("spawn times must be strictly increasing")
                if e.cell == es[i - 1].cell:
                    raise ValueError("spawn cells must alternate between the two ends")
            # An object occupies its cell for OBJECT_LIFETIME steps; the next
            # spawn on the same side must not land on a still-live object.
            if i > 1 and e.t - es[i - 2].t < OBJECT_LIFETIME:
                raise ValueError(
                    f"entries {i-2} and {i} reuse cell {e.cell} only "
                    f"{e.t - es[i-2].t} steps apart (< {OBJECT_LIFETIME})"
                )

    def to_text(self) -> str:
        """One `t,cell,class` line per entry."""
        return "\n".join(f"{e.t},{e.cell},{e.cls.name}" for e in self.entries) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SpawnScript":
        entries = []
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {ln}: expected 't,cell,class', got {raw!r}")
            t, cell, name = int(parts[0]), int(parts[1]), parts[2].strip()
            try:
                ocls = ObjectClass[name]
            except KeyError:
                raise ValueError(f"line {ln}: unknown object class {name!r}") from None
            entries.append(ScriptEntry(t, cell, ocls))
        return cls(tuple(entries))


@dataclass
class GridObject:
    cell: int
    cls: ObjectClass
    spawn_time: int
    expiry_time: int  # spawn_time + OBJECT_LIFETIME


class CollectionEvent(NamedTuple):
    """One object pickup. `credit` names the agent the reward is attributed
    to for the reward decompositions (prime wins a shared cell); spawn_time
    identifies the script entry the object came from."""

    cell: int
    cls: ObjectClass
    good: bool
    by_prime: bool
    by_helper: bool
    credit: str  # "prime" | "helper"
    spawn_time: int


@dataclass
class EnvState:
    t: int
    prime_pos: int
    helper_pos: Optional[int]  # None when running the prime-alone baseline
    live_objects: list[GridObject]
    script: SpawnScript
    task: TaskSpec


class StepOutcome(NamedTuple):
    prime_obs: Optional[np.ndarray]  # None when the env runs with auto_encode=False
    helper_obs: Optional[np.ndarray]
    reward: float
    done: bool
    collections: tuple[CollectionEvent, ...]
    prime_moved: bool


def sample_task(rng: np.random.Generator) -> TaskSpec:
    """Draw the episode's hidden reward rule, uniform over the two classes."""
    return TaskSpec(ObjectClass(int(rng.integers(2))))


def default_spawn_script(rng: np.random.Generator) -> SpawnScript:
    """Standard schedule: one object every SPAWN_PERIOD steps, sides
    alternating from a uniformly random end, classes i.i.d. uniform."""
    first_right = bool(rng.integers(2))
    classes = rng.integers(2, size=NUM_OBJECTS)
    entries = []
    for i in range(NUM_OBJECTS):
        side = END_CELLS[1] if (i % 2 == 0) == first_right else END_CELLS[0]
        entries.append(ScriptEntry(i * SPAWN_PERIOD, side, ObjectClass(int(classes[i]))))
    return SpawnScript(tuple(entries))


def encode_observation(state: EnvState, role: str, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Flat binary observation vector for one role (cells left to right).

    The helper's encoding never touches the task: only the prime sees the
    per-object goodness bit.
    """
    if role == "prime":
        bits, size = PRIME_CELL_BITS, PRIME_OBS_SIZE
    elif role == "helper":
        bits, size = HELPER_CELL_BITS, HELPER_OBS_SIZE
    else:
        raise ValueError(f"role must be 'prime' or 'helper', got {role!r}")
    if out is None:
        out = np.zeros(size, dtype=np.float32)
    else:
        if out.shape != (size,):
            raise ValueError(f"out has shape {out.shape}, expected ({size},)")
        out[:] = 0.0
    out[state.prime_pos * bits + 0] = 1.0
    if state.helper_pos is not None:
        out[state.helper_pos * bits + 1] = 1.0
    for obj in state.live_objects:
        base = obj.cell * bits
        out[base + 2] = 1.0
        out[base + 3 + int(obj.cls)] = 1.0
        if role == "prime" and state.task.is_good(obj.cls):
            out[base + 5] = 1.0
    return out


class ForagingEnv:
    """One episode instance. Instances are independent; use one per rollout.

    `include_helper=False` runs the prime-alone baseline: the helper is absent
    (its presence bits stay 0) and `step` takes no helper action. With
    `auto_encode=False` step outcomes carry no observation vectors; callers
    encode the post-step state themselves (batched rollouts reuse buffers).
    """

    def __init__(self, include_helper: bool = True, auto_encode: bool = True):
        self.include_helper = include_helper
        self.auto_encode = auto_encode
        self.state: Optional[EnvState] = None
        self._next_spawn = 0
        self._pending: tuple[list[CollectionEvent], int, int] = ([], 0, 0)

    def reset(self, task: TaskSpec, script: SpawnScript) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """Start an episode; returns the initial (prime_obs, helper_obs)."""
        self.state = EnvState(
            t=0,
            prime_pos=PRIME_START,
            helper_pos=HELPER_START if self.include_helper else None,
            live_objects=[],
            script=script,
            task=task,
        )
        self._next_spawn = 0
        self._spawn_due()
        # An agent already standing on a spawn cell collects at once; the
        # reward lands on the first step's outcome.
        events, ngood, nbad = self._collect()
        self._pending = (events, ngood, nbad)
        if not self.auto_encode:
            return None, None
        helper_obs = encode_observation(self.state, "helper") if self.include_helper else None
        return encode_observation(self.state, "prime"), helper_obs

    def step(self, prime_action: int, helper_action: Optional[int] = None) -> StepOutcome:
        s = self.state
        if s is None:
            raise RuntimeError("reset() the environment before stepping")
        if s.t >= EPISODE_STEPS:
            raise RuntimeError("episode is over; reset() to start a new one")
        if self.include_helper:
            if helper_action is None:
                raise ValueError("helper action required (env has a helper)")
        elif helper_action is not None:
            raise ValueError("no helper in this environment")

        # Resolution order: move, expire, spawn, collect.
        prime_moved = prime_action != Action.STAY
        s.prime_pos = _move(s.prime_pos, prime_action)
        if self.include_helper:
            s.helper_pos = _move(s.helper_pos, helper_action)
        s.t += 1

        if s.live_objects:
            s.live_objects = [o for o in s.live_objects if o.expiry_time != s.t]
        self._spawn_due()

        events, ngood, nbad = self._collect()
        pend_events, pend_good, pend_bad = self._pending
        if pend_events:
            events = pend_events + events
            ngood += pend_good
            nbad += pend_bad
            self._pending = ([], 0, 0)

        reward = float(ngood - nbad)
        if prime_moved:
            reward -= MOVE_PENALTY
        done = s.t >= EPISODE_STEPS
        prime_obs = helper_obs = None
        if self.auto_encode:
            prime_obs = encode_observation(s, "prime")
            if self.include_helper:
                helper_obs = encode_observation(s, "helper")
        return StepOutcome(
            prime_obs=prime_obs,
            helper_obs=helper_obs,
            reward=reward,
            done=done,
            collections=tuple(events),
            prime_moved=prime_moved,
        )

    def _spawn_due(self):
        s = self.state
        entries = s.script.entries
        while self._next_spawn < len(entries) and entries[self._next_spawn].t == s.t:
            e = entries[self._next_spawn]
            for o in s.live_objects:
                if o.cell == e.cell:
                    raise RuntimeError(f"spawn on occupied cell {e.cell} at t={s.t}")
            s.live_objects.append(GridObject(e.cell, e.cls, e.t, e.t + OBJECT_LIFETIME))
            self._next_spawn += 1

    def _collect(self) -> tuple[list[CollectionEvent], int, int]:
        s = self.state
        events: list[CollectionEvent] = []
        ngood = nbad = 0
        remaining = []
        for o in s.live_objects:
            on_prime = o.cell == s.prime_pos
            on_helper = s.helper_pos is not None and o.cell == s.helper_pos
            if not (on_prime or on_helper):
                remaining.append(o)
                continue
            good = s.task.is_good(o.cls)
            if good:
                ngood += 1
            else:
                nbad += 1
            events.append(CollectionEvent(
                cell=o.cell, cls=o.cls, good=good,
                by_prime=on_prime, by_helper=on_helper,
                credit="prime" if on_prime else "helper",
                spawn_time=o.spawn_time,
            ))
        if events:
            s.live_objects = remaining
        return events, ngood, nbad


def _move(pos: int, action: int) -> int:
    # Off-grid moves clamp to the boundary (the -0.1 penalty still applies:
    # it charges the chosen action, not the displacement).
    if action == 0:
        return pos - 1 if pos > 0 else 0
    if action == 1:
        return pos + 1 if pos < GRID_CELLS - 1 else GRID_CELLS - 1
    if action == 2:
        return pos
    raise ValueError(f"unknown action {action!r}")


def render_state(state: EnvState) -> str:
    """Small ASCII picture of the grid, for logs and demos."""
    rows = []
    for cell in range(GRID_CELLS):
        obj = next((o for o in state.live_objects if o.cell == cell), None)
        tag = ""
        if obj is not None:
            tag = obj.cls.name + ("+" if state.task.is_good(obj.cls) else "-")
        who = ("P" if state.prime_pos == cell else "") + (
            "H" if state.helper_pos == cell else "")
        rows.append(f"{who:>2}{tag:<2}")
    return f"t={state.t:3d} |" + "|".join(rows) + "|"
