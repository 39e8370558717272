"""Walk through the foraging task mechanics step by step.

Renders a short episode as ASCII: a scripted helper that knows the task
sweeps the grid collecting good objects while the prime sits still. Shows
how observations encode the world differently for the two roles.
"""

import numpy as np

from forage.env import (
    Action,
    ForagingEnv,
    ObjectClass,
    TaskSpec,
    default_spawn_script,
    encode_observation,
    render_state,
)

rng = np.random.default_rng(7)
task = TaskSpec(ObjectClass.B)
script = default_spawn_script(rng)

print("Hidden task: objects of class", task.good_class.name, "are worth +1,")
print("the other class costs -1. Only the prime knows this.\n")

print("Spawn script (time, cell, class) - one object every 5 steps,")
print("alternating ends, 9-step lifetime:")
print("   " + "  ".join(f"({e.t},{e.cell},{e.cls.name})" for e in script.entries[:8]) + " ...\n")

env = ForagingEnv()
p_obs, h_obs = env.reset(task, script)

print("Initial grid (P=prime, H=helper, A/B=object class, +/-=goodness):")
print(" ", render_state(env.state))
print("\nPrime observation, 6 bits per cell")
print("  [prime_here, helper_here, object, class_A, class_B, good]:")
print(" ", p_obs.reshape(5, 6).astype(int).tolist())
print("Helper observation has no goodness column:")
print(" ", h_obs.reshape(5, 5).astype(int).tolist())

# a hand-written helper policy: walk to each good object in spawn order
from_targets = [(e.t, e.cell) for e in script.entries if task.is_good(e.cls)]
pos, idx = 3, 0
total = 0.0
print("\nRunning 30 steps with a scripted task-aware helper:")
for t in range(30):
    action = Action.STAY
    if idx < len(from_targets):
        spawn_t, cell = from_targets[idx]
        if pos != cell and not (abs(pos - cell) == 1 and t + 1 < spawn_t):
            action = Action.LEFT if cell < pos else Action.RIGHT
        elif pos == cell and t + 1 < spawn_t and cell in (0, 4):
            action = Action.RIGHT if cell == 0 else Action.LEFT
    out = env.step(Action.STAY, action)
    pos = env.state.helper_pos
    if idx < len(from_targets) and pos == from_targets[idx][1] and env.state.t >= from_targets[idx][0]:
        idx += 1
    total += out.reward
    marker = f"   <-- collected {'+'.join(ev.cls.name for ev in out.collections)}" \
        if out.collections else ""
    print(" ", render_state(env.state), f"r={out.reward:+.1f}{marker}")

print(f"\nReward after 30 steps: {total:+.1f}")
print("The joint reward counts +1/-1 per collected object and -0.1 per prime move.")
