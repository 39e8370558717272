"""Two-agent foraging gridworld with a hand-rolled recurrent Q-learning stack.

A reward-aware "prime" agent and a reward-blind "helper" agent forage on a
5-cell grid; the per-episode reward rule is hidden from the helper, and
training both agents jointly makes a physical communication protocol emerge.

Subpackage map:
    env         the foraging task (objects, observations, joint reward)
    nn          dense numerics: LSTM cell, Q head, BPTT, Adam, grad checks
    agent       recurrent policy wrapper and action selection
    trainer     batched meta-training loop and prime-alone baseline
    evaluation  summary statistics, first-object probes, curves
    config      run configuration (flat key=value files)
    checkpoint  versioned binary checkpoints
    serve       play the prime yourself against a trained helper
"""

from forage.env import (
    Action,
    ForagingEnv,
    ObjectClass,
    SpawnScript,
    TaskSpec,
    default_spawn_script,
    encode_observation,
    sample_task,
)

__all__ = [
    "Action",
    "ForagingEnv",
    "ObjectClass",
    "SpawnScript",
    "TaskSpec",
    "default_spawn_script",
    "encode_observation",
    "sample_task",
]

__version__ = "0.1.0"
