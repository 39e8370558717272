"""Meta-training loop: batched episode rollouts and per-agent Q updates.

Every update samples a fresh batch of (task, script) pairs, rolls the
batch out in lockstep (one LSTM step per timestep for the whole batch),
computes each agent's summed TD loss on the shared reward stream, and
applies one clipped Adam step per agent. Baseline mode drops the helper
entirely and trains the prime alone. No replay buffer, no target network.

Randomness is derived statelessly: the stream for episode b of update k is
seeded by SeedSequence(seed, spawn_key=(stream_tag, k, b)), so results do
not depend on rollout order and resuming from a checkpoint is exact by
construction. Within an episode the draw order is fixed: task, script,
then per step the prime's exploration draw followed by the helper's.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from forage import nn
from forage.agent import PolicyNet, make_policy, reset_state, select_action
from forage.checkpoint import AgentSnapshot, Checkpoint, load_checkpoint, save_checkpoint
from forage.config import TrainConfig, train_config_to_dict
from forage.env import (
    EPISODE_STEPS,
    Action,
    ForagingEnv,
    SpawnScript,
    TaskSpec,
    default_spawn_script,
    encode_observation,
    sample_task,
)
from forage.metrics import MetricsWriter

INIT_STREAM = 0
TRAIN_STREAM = 1
EVAL_STREAM = 2

CHECKPOINT_NAME = "checkpoint.bin"
METRICS_NAME = "metrics.csv"


class TrainingDiverged(RuntimeError):
    """Raised on a non-finite loss; the last good checkpoint is kept."""

    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# ------------------------------------------------------------- rollouts


@dataclass
class EpisodeTrace:
    """Everything one episode produced, aligned step by step."""

    task: TaskSpec
    script: SpawnScript
    rewards: np.ndarray                    # (T,) float64
    prime_obs: Optional[np.ndarray]        # (T, 30) float32
    prime_q: Optional[np.ndarray]          # (T, 3)
    prime_actions: np.ndarray              # (T,) int8
    helper_obs: Optional[np.ndarray]
    helper_q: Optional[np.ndarray]
    helper_actions: Optional[np.ndarray]
    collections: list                      # per step: tuple of CollectionEvent
    prime_collect: float
    helper_collect: float
    prime_moves: int
    helper_moves: int

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


@dataclass
class BatchRollout:
    """A lockstep batch of episodes, stacked time-major: (T, B, ...)."""

    tasks: list[TaskSpec]
    scripts: list[SpawnScript]
    rewards: np.ndarray
    prime_q: np.ndarray
    prime_actions: np.ndarray
    helper_q: Optional[np.ndarray]
    helper_actions: Optional[np.ndarray]
    prime_caches: Optional[list[nn.StepCache]]
    helper_caches: Optional[list[nn.StepCache]]
    prime_obs: Optional[np.ndarray]
    helper_obs: Optional[np.ndarray]
    collections: Optional[list]            # [t][b] -> tuple of events
    prime_collect: np.ndarray              # (B,) reward credited to the prime
    helper_collect: np.ndarray
    prime_moves: np.ndarray
    helper_moves: np.ndarray

    @property
    def batch_size(self) -> int:
        return self.rewards.shape[1]

    @property
    def episode_rewards(self) -> np.ndarray:
        return self.rewards.sum(axis=0)

    def episode(self, b: int) -> EpisodeTrace:
        has_helper = self.helper_actions is not None
        return EpisodeTrace(
            task=self.tasks[b],
            script=self.scripts[b],
            rewards=self.rewards[:, b].copy(),
            prime_obs=None if self.prime_obs is None else self.prime_obs[:, b],
            prime_q=self.prime_q[:, b],
            prime_actions=self.prime_actions[:, b],
            helper_obs=None if self.helper_obs is None else self.helper_obs[:, b],
            helper_q=self.helper_q[:, b] if has_helper else None,
            helper_actions=self.helper_actions[:, b] if has_helper else None,
            collections=[evs[b] for evs in self.collections] if self.collections else [],
            prime_collect=float(self.prime_collect[b]),
            helper_collect=float(self.helper_collect[b]),
            prime_moves=int(self.prime_moves[b]),
            helper_moves=int(self.helper_moves[b]),
        )


def rollout_batch(
    prime: PolicyNet,
    helper: Optional[PolicyNet],
    tasks: Sequence[TaskSpec],
    scripts: Sequence[SpawnScript],
    epsilon: float,
    rngs: Optional[Sequence[np.random.Generator]] = None,
    record_caches: bool = False,
    record_trace: bool = False,
) -> BatchRollout:
    """Run len(tasks) episodes in lockstep under epsilon-greedy control.

    record_caches keeps the LSTM forward intermediates for BPTT;
    record_trace keeps observations and collection events (probes, tests).
    """
    batch = len(tasks)
    if len(scripts) != batch:
        raise ValueError("tasks and scripts must pair up")
    if epsilon > 0.0 and (rngs is None or len(rngs) != batch):
        raise ValueError("epsilon-greedy rollouts need one rng per episode")
    has_helper = helper is not None
    dtype = prime.lstm.w_x.dtype

    envs = [ForagingEnv(include_helper=has_helper, auto_encode=False) for _ in range(batch)]
    x_p = np.empty((batch, prime.lstm.input_size), dtype=dtype)
    x_h = np.empty((batch, helper.lstm.input_size), dtype=dtype) if has_helper else None
    for b, env in enumerate(envs):
        env.reset(tasks[b], scripts[b])
        encode_observation(envs[b].state, "prime", out=x_p[b])
        if has_helper:
            encode_observation(envs[b].state, "helper", out=x_h[b])

    p_state = reset_state(prime, batch)
    h_state = reset_state(helper, batch) if has_helper else None

    tlen = EPISODE_STEPS
    rewards = np.empty((tlen, batch), dtype=np.float64)
    prime_q = np.empty((tlen, batch, nn.NUM_ACTIONS), dtype=dtype)
    prime_actions = np.empty((tlen, batch), dtype=np.int8)
    helper_q = np.empty_like(prime_q) if has_helper else None
    helper_actions = np.empty_like(prime_actions) if has_helper else None
    p_caches = [] if record_caches else None
    h_caches = [] if (record_caches and has_helper) else None
    p_obs_rec = np.empty((tlen, batch, x_p.shape[1]), dtype=dtype) if record_trace else None
    h_obs_rec = (np.empty((tlen, batch, x_h.shape[1]), dtype=dtype)
                 if (record_trace and has_helper) else None)
    all_events = [] if record_trace else None

    prime_collect = np.zeros(batch)
    helper_collect = np.zeros(batch)
    prime_moves = np.zeros(batch, dtype=np.int32)
    helper_moves = np.zeros(batch, dtype=np.int32)
    stay = int(Action.STAY)

    p_forward = nn.LSTMForward(prime.lstm)
    h_forward = nn.LSTMForward(helper.lstm) if has_helper else None

    for t in range(tlen):
        if record_trace:
            p_obs_rec[t] = x_p
            if has_helper:
                h_obs_rec[t] = x_h

        p_state, p_cache = p_forward.step(p_state, x_p)
        q_p = nn.q_head(prime.head, p_state.h)
        prime_q[t] = q_p
        if record_caches:
            p_caches.append(p_cache)
        if has_helper:
            h_state, h_cache = h_forward.step(h_state, x_h)
            q_h = nn.q_head(helper.head, h_state.h)
            helper_q[t] = q_h
            if record_caches:
                h_caches.append(h_cache)

        # batched argmax; the per-row epsilon logic below mirrors
        # agent.select_action draw for draw
        greedy_p = q_p.argmax(axis=1)
        greedy_h = q_h.argmax(axis=1) if has_helper else None

        # the step caches hold references to the input buffers: write the
        # next observations into fresh arrays
        next_x_p = np.empty_like(x_p)
        next_x_h = np.empty_like(x_h) if has_helper else None
        step_events = [] if record_trace else None

        for b in range(batch):
            rng = rngs[b] if rngs is not None else None
            if epsilon > 0.0 and rng.random() < epsilon:
                a_p = int(rng.integers(nn.NUM_ACTIONS))
            else:
                a_p = int(greedy_p[b])
            prime_actions[t, b] = a_p
            a_h = None
            if has_helper:
                if epsilon > 0.0 and rng.random() < epsilon:
                    a_h = int(rng.integers(nn.NUM_ACTIONS))
                else:
                    a_h = int(greedy_h[b])
                helper_actions[t, b] = a_h
            out = envs[b].step(a_p, a_h)
            rewards[t, b] = out.reward
            if out.prime_moved:
                prime_moves[b] += 1
            if has_helper and a_h != stay:
                helper_moves[b] += 1
            for ev in out.collections:
                value = 1.0 if ev.good else -1.0
                if ev.credit == "prime":
                    prime_collect[b] += value
                else:
                    helper_collect[b] += value
            if record_trace:
                step_events.append(out.collections)
            encode_observation(envs[b].state, "prime", out=next_x_p[b])
            if has_helper:
                encode_observation(envs[b].state, "helper", out=next_x_h[b])

        if record_trace:
            all_events.append(step_events)
        x_p = next_x_p
        x_h = next_x_h

    return BatchRollout(
        tasks=list(tasks), scripts=list(scripts),
        rewards=rewards,
        prime_q=prime_q, prime_actions=prime_actions,
        helper_q=helper_q, helper_actions=helper_actions,
        prime_caches=p_caches, helper_caches=h_caches,
        prime_obs=p_obs_rec, helper_obs=h_obs_rec,
        collections=all_events,
        prime_collect=prime_collect, helper_collect=helper_collect,
        prime_moves=prime_moves, helper_moves=helper_moves,
    )


class _NetRunner:
    """Adapts a PolicyNet to the scripted-policy protocol (reset/act)."""

    def __init__(self, policy: PolicyNet, epsilon: float, rng):
        self.policy = policy
        self.epsilon = epsilon
        self.rng = rng
        self.role = policy.role
        self.state = None
        self.last_q = None
        self._forward = None

    def reset_episode(self, task, script):
        self.state = reset_state(self.policy)
        self._forward = nn.LSTMForward(self.policy.lstm)

    def act(self, obs):
        self.state, _ = self._forward.step(
            self.state, obs[None, :].astype(self.policy.lstm.w_x.dtype))
        q = nn.q_head(self.policy.head, self.state.h)[0]
        self.last_q = q
        return select_action(q, self.epsilon, self.rng)


def rollout_episode(
    env: ForagingEnv,
    prime,
    helper,
    task: TaskSpec,
    script: SpawnScript,
    epsilon: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> EpisodeTrace:
    """Scalar-path rollout of one episode; accepts networks or scripted
    policies (anything with reset_episode(task, script) and act(obs))."""
    runners = []
    for pol in (prime, helper):
        if pol is None:
            runners.append(None)
        elif isinstance(pol, PolicyNet):
            runners.append(_NetRunner(pol, epsilon, rng))
        else:
            runners.append(pol)
    p_run, h_run = runners
    if env.include_helper != (h_run is not None):
        raise ValueError("env and helper policy disagree about baseline mode")

    p_obs, h_obs = env.reset(task, script)
    p_run.reset_episode(task, script)
    if h_run is not None:
        h_run.reset_episode(task, script)

    tlen = EPISODE_STEPS
    trace = EpisodeTrace(
        task=task, script=script,
        rewards=np.empty(tlen, dtype=np.float64),
        prime_obs=np.empty((tlen, p_obs.shape[0]), dtype=np.float32),
        prime_q=np.zeros((tlen, nn.NUM_ACTIONS), dtype=np.float32),
        prime_actions=np.empty(tlen, dtype=np.int8),
        helper_obs=None if h_run is None else np.empty((tlen, h_obs.shape[0]), np.float32),
        helper_q=None if h_run is None else np.zeros((tlen, nn.NUM_ACTIONS), np.float32),
        helper_actions=None if h_run is None else np.empty(tlen, dtype=np.int8),
        collections=[],
        prime_collect=0.0, helper_collect=0.0, prime_moves=0, helper_moves=0,
    )
    stay = int(Action.STAY)
    for t in range(tlen):
        trace.prime_obs[t] = p_obs
        a_p = p_run.act(p_obs)
        if isinstance(p_run, _NetRunner):
            trace.prime_q[t] = p_run.last_q
        trace.prime_actions[t] = a_p
        a_h = None
        if h_run is not None:
            trace.helper_obs[t] = h_obs
            a_h = h_run.act(h_obs)
            if isinstance(h_run, _NetRunner):
                trace.helper_q[t] = h_run.last_q
            trace.helper_actions[t] = a_h
        out = env.step(a_p, a_h)
        trace.rewards[t] = out.reward
        trace.collections.append(out.collections)
        if out.prime_moved:
            trace.prime_moves += 1
        if a_h is not None and a_h != stay:
            trace.helper_moves += 1
        for ev in out.collections:
            value = 1.0 if ev.good else -1.0
            if ev.credit == "prime":
                trace.prime_collect += value
            else:
                trace.helper_collect += value
        p_obs, h_obs = out.prime_obs, out.helper_obs
    return trace


def replay_actions(task, script, prime_actions, helper_actions):
    """Re-simulate recorded actions in a fresh env; returns the reward list."""
    env = ForagingEnv(include_helper=helper_actions is not None)
    env.reset(task, script)
    rewards = []
    for t in range(len(prime_actions)):
        a_h = None if helper_actions is None else int(helper_actions[t])
        rewards.append(env.step(int(prime_actions[t]), a_h).reward)
    return rewards


# ------------------------------------------------------------- updates


def one_hot_actions(actions: np.ndarray, dtype=np.float32) -> np.ndarray:
    out = np.zeros(actions.shape + (nn.NUM_ACTIONS,), dtype=dtype)
    np.put_along_axis(out, actions.astype(np.int64)[..., None], 1.0, axis=-1)
    return out


def _agent_update(policy, caches, actions, rewards, q_seq, adam, cfg):
    onehot = one_hot_actions(actions, dtype=q_seq.dtype)
    loss, dq = nn.td_loss(q_seq, onehot, rewards, cfg.gamma)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite {policy.role} loss {loss!r}")
    grads = nn.backward(caches, policy.lstm, policy.head, dq)
    arrays = grads.arrays()
    if cfg.clip_norm is not None:
        norm = nn.clip_global_norm(arrays, cfg.clip_norm)
    else:
        norm = nn.global_norm(arrays)
    adam.step(policy.arrays(), arrays)
    return loss, norm


def train_step(
    batch: BatchRollout,
    prime: PolicyNet,
    helper: Optional[PolicyNet],
    prime_adam: nn.Adam,
    helper_adam: Optional[nn.Adam],
    cfg: TrainConfig,
) -> dict:
    """One gradient update per agent from a recorded batch; returns metrics."""
    if batch.prime_caches is None:
        raise ValueError("train_step needs a rollout recorded with caches")
    loss_p, norm_p = _agent_update(
        prime, batch.prime_caches, batch.prime_actions, batch.rewards,
        batch.prime_q, prime_adam, cfg)
    loss_h = norm_h = None
    if helper is not None:
        loss_h, norm_h = _agent_update(
            helper, batch.helper_caches, batch.helper_actions, batch.rewards,
            batch.helper_q, helper_adam, cfg)

    mean_reward = float(batch.episode_rewards.mean())
    row = {
        "mean_reward": mean_reward,
        "prime_moves": float(batch.prime_moves.mean()),
        "helper_moves": float(batch.helper_moves.mean()) if helper is not None else None,
        "prime_collect": float(batch.prime_collect.mean()),
        "helper_collect": float(batch.helper_collect.mean()) if helper is not None else None,
        "loss_prime": loss_p,
        "loss_helper": loss_h,
        "grad_norm_prime": norm_p,
        "grad_norm_helper": norm_h,
    }
    # attribution identity: collections minus movement penalty is the reward
    recomposed = (row["prime_collect"] + (row["helper_collect"] or 0.0)
                  - 0.1 * row["prime_moves"])
    if abs(recomposed - mean_reward) > 1e-6:
        raise AssertionError(
            f"attribution identity violated: {recomposed} != {mean_reward}")
    return row


def sample_batch(seed: int, update: int, batch_episodes: int, stream: int = TRAIN_STREAM):
    """Per-episode rngs plus the (task, script) pairs they begin with."""
    rngs = [derive_rng(seed, stream, update, b) for b in range(batch_episodes)]
    tasks = [sample_task(r) for r in rngs]
    scripts = [default_spawn_script(r) for r in rngs]
    return rngs, tasks, scripts


def greedy_eval(
    prime: PolicyNet,
    helper: Optional[PolicyNet],
    n_episodes: int,
    seed: int,
    stream: int = EVAL_STREAM,
    update: int = 0,
    chunk: int = 100,
) -> dict:
    """Greedy rollouts on fresh tasks/scripts; returns per-episode arrays."""
    rewards, p_moves, h_moves = [], [], []
    p_collect, h_collect = [], []
    done = 0
    while done < n_episodes:
        size = min(chunk, n_episodes - done)
        rngs = [derive_rng(seed, stream, update, done + i) for i in range(size)]
        tasks = [sample_task(r) for r in rngs]
        scripts = [default_spawn_script(r) for r in rngs]
        batch = rollout_batch(prime, helper, tasks, scripts, epsilon=0.0, rngs=None)
        rewards.append(batch.episode_rewards)
        p_moves.append(batch.prime_moves)
        h_moves.append(batch.helper_moves)
        p_collect.append(batch.prime_collect)
        h_collect.append(batch.helper_collect)
        done += size
    return {
        "reward": np.concatenate(rewards),
        "prime_moves": np.concatenate(p_moves),
        "helper_moves": np.concatenate(h_moves),
        "prime_collect": np.concatenate(p_collect),
        "helper_collect": np.concatenate(h_collect),
    }


# ------------------------------------------------------------- the loop


@dataclass
class TrainResult:
    checkpoint_path: Path
    metrics_path: Path
    updates: int
    final_eval_reward: Optional[float]


def _make_checkpoint(cfg, update_index, prime, prime_adam, helper, helper_adam):
    return Checkpoint(
        config=cfg,
        update_index=update_index,
        prime=AgentSnapshot.of(prime, prime_adam),
        helper=None if helper is None else AgentSnapshot.of(helper, helper_adam),
        rng_state={"scheme": "spawn_key", "seed": cfg.seed},
    )


def _check_resume(cfg: TrainConfig, ck: Checkpoint):
    ours = train_config_to_dict(cfg)
    theirs = train_config_to_dict(ck.config)
    ours.pop("total_updates")
    theirs.pop("total_updates")
    if ours != theirs:
        raise ValueError("resume config does not match the checkpoint's config")
    if ck.update_index > cfg.total_updates:
        raise ValueError(
            f"checkpoint already has {ck.update_index} updates >= requested "
            f"{cfg.total_updates}")
    if cfg.baseline_mode != (ck.helper is None):
        raise ValueError("checkpoint and config disagree about baseline mode")


def train(
    cfg: TrainConfig,
    out_dir,
    resume_from=None,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """Run the full training loop; writes metrics.csv and checkpoint.bin.

    Fully reproducible from cfg.seed: two runs with the same config produce
    bit-identical checkpoints, and resuming from a checkpoint matches the
    uninterrupted run exactly.
    """
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ck_path = out_dir / CHECKPOINT_NAME
    metrics_path = out_dir / METRICS_NAME

    start_update = 0
    if resume_from is not None:
        ck = load_checkpoint(resume_from)
        _check_resume(cfg, ck)
        prime = ck.prime.policy()
        prime_adam = ck.prime.adam()
        helper = None if ck.helper is None else ck.helper.policy()
        helper_adam = None if ck.helper is None else ck.helper.adam()
        start_update = ck.update_index
    else:
        prime = make_policy(derive_rng(cfg.seed, INIT_STREAM, 0), "prime", cfg.hidden_size)
        prime_adam = nn.Adam()
        helper = helper_adam = None
        if not cfg.baseline_mode:
            helper = make_policy(derive_rng(cfg.seed, INIT_STREAM, 1), "helper",
                                 cfg.hidden_size)
            helper_adam = nn.Adam()

    writer = MetricsWriter(metrics_path, append=start_update > 0 and metrics_path.exists())
    last_eval_reward = None
    try:
        for k in range(start_update, cfg.total_updates):
            rngs, tasks, scripts = sample_batch(cfg.seed, k, cfg.batch_episodes)
            batch = rollout_batch(prime, helper, tasks, scripts, cfg.epsilon, rngs,
                                  record_caches=True)
            try:
                row = train_step(batch, prime, helper, prime_adam, helper_adam, cfg)
            except TrainingDiverged as exc:
                raise TrainingDiverged(
                    f"update {k}: {exc}; last good checkpoint: {ck_path}",
                    last_checkpoint=ck_path) from None
            row["update"] = k

            is_last = k + 1 == cfg.total_updates
            if cfg.eval_episodes and (is_last or (
                    cfg.eval_every and (k + 1) % cfg.eval_every == 0)):
                ev = greedy_eval(prime, helper, cfg.eval_episodes, cfg.seed,
                                 update=k + 1, chunk=cfg.batch_episodes)
                row["eval_reward"] = float(ev["reward"].mean())
                row["eval_prime_moves"] = float(ev["prime_moves"].mean())
                if helper is not None:
                    row["eval_helper_moves"] = float(ev["helper_moves"].mean())
                last_eval_reward = row["eval_reward"]
                save_checkpoint(ck_path, _make_checkpoint(
                    cfg, k + 1, prime, prime_adam, helper, helper_adam))
                if log:
                    log(f"update {k + 1}/{cfg.total_updates}: "
                        f"train reward {row['mean_reward']:+.3f}, "
                        f"eval reward {row['eval_reward']:+.3f}")
            elif log and (k + 1) % 50 == 0:
                log(f"update {k + 1}/{cfg.total_updates}: "
                    f"train reward {row['mean_reward']:+.3f}")
            writer.write(row)

        save_checkpoint(ck_path, _make_checkpoint(
            cfg, cfg.total_updates, prime, prime_adam, helper, helper_adam))
    finally:
        writer.close()
    return TrainResult(
        checkpoint_path=ck_path,
        metrics_path=metrics_path,
        updates=cfg.total_updates - start_update,
        final_eval_reward=last_eval_reward,
    )
