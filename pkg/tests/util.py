"""Shared helpers for the test suite."""

import numpy as np

from forage.env import (
    EPISODE_STEPS,
    NUM_OBJECTS,
    SPAWN_PERIOD,
    ForagingEnv,
    ObjectClass,
    ScriptEntry,
    SpawnScript,
)


def make_script(classes, first_cell=4, times=None):
    """Build a script from a list of 20 class values (0/1 or ObjectClass)."""
    if times is None:
        times = [i * SPAWN_PERIOD for i in range(NUM_OBJECTS)]
    entries = []
    for i, cls in enumerate(classes):
        cell = first_cell if i % 2 == 0 else 4 - first_cell
        entries.append(ScriptEntry(times[i], cell, ObjectClass(int(cls))))
    return SpawnScript(tuple(entries))


def random_valid_script(rng):
    """Random script exercising irregular but legal spawn schedules.

    Gaps start at the standard 5 and get jittered: disjoint (5,5) pairs may
    become (4,6) and leftover budget sprinkles +1s, which keeps every
    same-cell spacing >= 9 and every spawn time < 100.
    """
    gaps = [5] * (NUM_OBJECTS - 1)
    for i in range(0, NUM_OBJECTS - 2, 2):
        if rng.random() < 0.3:
            gaps[i], gaps[i + 1] = 4, 6
    budget = EPISODE_STEPS - 1 - sum(gaps)
    for i in rng.permutation(len(gaps)):
        if budget <= 0:
            break
        if gaps[i] == 5 and rng.random() < 0.25:
            gaps[i] += 1
            budget -= 1
    t0 = int(rng.integers(0, budget + 1)) if budget > 0 else 0
    times = [t0]
    for g in gaps:
        times.append(times[-1] + g)
    first_cell = 4 if rng.integers(2) else 0
    return make_script(rng.integers(2, size=NUM_OBJECTS), first_cell=first_cell, times=times)


def random_actions(rng, steps=EPISODE_STEPS):
    return [int(a) for a in rng.integers(3, size=steps)]


def run_env_episode(task, script, prime_actions, helper_actions):
    """Drive ForagingEnv through a full episode; returns obs/reward streams."""
    env = ForagingEnv(include_helper=helper_actions is not None)
    p_obs, h_obs = env.reset(task, script)
    out = {
        "prime_obs": [p_obs],
        "helper_obs": None if h_obs is None else [h_obs],
        "rewards": [],
        "done": [],
        "collections": [],
    }
    for t in range(EPISODE_STEPS):
        ha = None if helper_actions is None else helper_actions[t]
        o = env.step(prime_actions[t], ha)
        out["prime_obs"].append(o.prime_obs)
        if o.helper_obs is not None:
            out["helper_obs"].append(o.helper_obs)
        out["rewards"].append(o.reward)
        out["done"].append(o.done)
        out["collections"].append(o.collections)
    return out, env


def reward_tenths(reward):
    """Recover the exact multiple of 0.1 a step reward represents."""
    scaled = reward * 10.0
    tenths = int(np.rint(scaled))
    assert abs(scaled - tenths) < 1e-6, f"reward {reward!r} is not a tenth"
    return tenths
