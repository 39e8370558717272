"""Quantitative analyses of trained agents.

Four instruments: summary statistics over fresh greedy episodes, the
first-object policy probe (does the prime's reaction to the episode's
first object tell the helper which class is good?), per-timestep action
histograms, and the reward-attribution learning curve with its
rise-peak-drop phase detector. Each ships with a documented CSV export.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from forage.agent import PolicyNet
from forage.env import (
    END_CELLS,
    EPISODE_STEPS,
    NUM_OBJECTS,
    SPAWN_PERIOD,
    Action,
    ForagingEnv,
    ObjectClass,
    ScriptEntry,
    SpawnScript,
    TaskSpec,
    default_spawn_script,
    sample_task,
)
from forage.metrics import read_metrics
from forage.trainer import derive_rng, rollout_batch, rollout_episode

EVAL_STREAM = 3
PROBE_STREAM = 4
HISTOGRAM_STREAM = 5


# ------------------------------------------------------------- summary stats


@dataclass
class EvalStats:
    n_episodes: int
    reward_mean: float
    reward_stderr: float
    prime_moves_mean: float
    prime_moves_stderr: float
    helper_moves_mean: Optional[float]
    helper_moves_stderr: Optional[float]
    prime_collect_mean: float
    prime_collect_stderr: float
    helper_collect_mean: Optional[float]
    helper_collect_stderr: Optional[float]


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(values.mean()), stderr


def _episode_arrays(prime, helper, n_episodes, seed, stream):
    """Greedy rollouts on fresh tasks/scripts; batched when both policies
    are networks, one by one for scripted fixtures."""
    batched = isinstance(prime, PolicyNet) and (helper is None or isinstance(helper, PolicyNet))
    rewards = np.empty(n_episodes)
    p_moves = np.empty(n_episodes)
    h_moves = np.empty(n_episodes)
    p_collect = np.empty(n_episodes)
    h_collect = np.empty(n_episodes)
    if batched:
        done = 0
        while done < n_episodes:
            size = min(100, n_episodes - done)
            rngs = [derive_rng(seed, stream, 0, done + i) for i in range(size)]
            tasks = [sample_task(r) for r in rngs]
            scripts = [default_spawn_script(r) for r in rngs]
            batch = rollout_batch(prime, helper, tasks, scripts, epsilon=0.0)
            sl = slice(done, done + size)
            rewards[sl] = batch.episode_rewards
            p_moves[sl] = batch.prime_moves
            h_moves[sl] = batch.helper_moves
            p_collect[sl] = batch.prime_collect
            h_collect[sl] = batch.helper_collect
            done += size
    else:
        for i in range(n_episodes):
            rng = derive_rng(seed, stream, 0, i)
            task, script = sample_task(rng), default_spawn_script(rng)
            env = ForagingEnv(include_helper=helper is not None)
            tr = rollout_episode(env, prime, helper, task, script)
            rewards[i] = tr.total_reward
            p_moves[i] = tr.prime_moves
            h_moves[i] = tr.helper_moves
            p_collect[i] = tr.prime_collect
            h_collect[i] = tr.helper_collect
    return rewards, p_moves, h_moves, p_collect, h_collect


def evaluate(prime, helper, n_episodes: int, seed: int = 0) -> EvalStats:
    """Greedy evaluation on n_episodes fresh tasks; means with stderrs."""
    rewards, p_moves, h_moves, p_collect, h_collect = _episode_arrays(
        prime, helper, n_episodes, seed, EVAL_STREAM)
    r = _mean_stderr(rewards)
    pm = _mean_stderr(p_moves)
    pc = _mean_stderr(p_collect)
    hm = _mean_stderr(h_moves) if helper is not None else (None, None)
    hc = _mean_stderr(h_collect) if helper is not None else (None, None)
    return EvalStats(
        n_episodes=n_episodes,
        reward_mean=r[0], reward_stderr=r[1],
        prime_moves_mean=pm[0], prime_moves_stderr=pm[1],
        helper_moves_mean=hm[0], helper_moves_stderr=hm[1],
        prime_collect_mean=pc[0], prime_collect_stderr=pc[1],
        helper_collect_mean=hc[0], helper_collect_stderr=hc[1],
    )


EVAL_STATS_COLUMNS = [
    "n_episodes",
    "reward_mean", "reward_stderr",
    "prime_moves_mean", "prime_moves_stderr",
    "helper_moves_mean", "helper_moves_stderr",
    "prime_collect_mean", "prime_collect_stderr",
    "helper_collect_mean", "helper_collect_stderr",
]


def write_eval_stats_csv(path, stats: EvalStats) -> None:
    row = []
    for col in EVAL_STATS_COLUMNS:
        value = getattr(stats, col)
        if value is None:
            row.append("")
        elif isinstance(value, float):
            row.append(repr(value))
        else:
            row.append(value)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_STATS_COLUMNS)
        w.writerow(row)


# ------------------------------------------------------------- probes


def probe_script(first_good: bool, task: TaskSpec, first_cell: int) -> SpawnScript:
    """Controlled script: classes alternate starting from the probed first
    object, so the signal comes only from the first object's goodness."""
    first = task.good_class if first_good else ObjectClass(1 - task.good_class)
    entries = []
    for i in range(NUM_OBJECTS):
        cls = first if i % 2 == 0 else ObjectClass(1 - first)
        cell = first_cell if i % 2 == 0 else 4 - first_cell
        entries.append(ScriptEntry(i * SPAWN_PERIOD, cell, cls))
    return SpawnScript(tuple(entries))


@dataclass
class ProbeScenario:
    scenario: str                      # "first_good" | "first_bad"
    n_trials: int
    prime_moves_mean: float
    prime_first_collect_rate: float    # prime picked up the episode's first object
    helper_good_rate_mean: float       # share of post-first good objects the helper got
    helper_good_ge80_frac: float       # episodes where that share reached 0.8
    helper_bad_avoid_rate: float       # share of bad objects the helper left alone


@dataclass
class ProbeReport:
    first_good: ProbeScenario
    first_bad: ProbeScenario


def _run_probe_scenario(prime, helper, n_trials, seed, first_good) -> ProbeScenario:
    prime_moves = np.empty(n_trials)
    first_collect = np.zeros(n_trials, dtype=bool)
    good_rates = np.empty(n_trials)
    bad_avoid = np.empty(n_trials)
    scenario_tag = 0 if first_good else 1

    for i in range(n_trials):
        rng = derive_rng(seed, PROBE_STREAM, scenario_tag, i)
        task = sample_task(rng)
        first_cell = END_CELLS[int(rng.integers(2))]
        script = probe_script(first_good, task, first_cell)
        env = ForagingEnv()
        tr = rollout_episode(env, prime, helper, task, script)

        prime_moves[i] = tr.prime_moves
        first_entry = script.entries[0]
        goods_after_first = {e.t for e in script.entries[1:] if task.is_good(e.cls)}
        bads = {e.t for e in script.entries if not task.is_good(e.cls)}
        got_goods, got_bads = set(), set()
        for events in tr.collections:
            for ev in events:
                if ev.by_prime and ev.spawn_time == first_entry.t and ev.cell == first_entry.cell:
                    first_collect[i] = True
                if ev.by_helper:
                    if ev.spawn_time in goods_after_first and ev.good:
                        got_goods.add(ev.spawn_time)
                    if not ev.good:
                        got_bads.add(ev.spawn_time)
        good_rates[i] = len(got_goods) / len(goods_after_first)
        bad_avoid[i] = 1.0 - len(got_bads) / len(bads)

    return ProbeScenario(
        scenario="first_good" if first_good else "first_bad",
        n_trials=n_trials,
        prime_moves_mean=float(prime_moves.mean()),
        prime_first_collect_rate=float(first_collect.mean()),
        helper_good_rate_mean=float(good_rates.mean()),
        helper_good_ge80_frac=float((good_rates >= 0.8).mean()),
        helper_bad_avoid_rate=float(bad_avoid.mean()),
    )


def probe_first_object(prime, helper, n_trials: int, seed: int = 0) -> ProbeReport:
    """Fix the first object's class and watch both policy branches."""
    return ProbeReport(
        first_good=_run_probe_scenario(prime, helper, n_trials, seed, True),
        first_bad=_run_probe_scenario(prime, helper, n_trials, seed, False),
    )


PROBE_COLUMNS = [
    "scenario", "n_trials", "prime_moves_mean", "prime_first_collect_rate",
    "helper_good_rate_mean", "helper_good_ge80_frac", "helper_bad_avoid_rate",
]


def write_probe_csv(path, report: ProbeReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROBE_COLUMNS)
        for sc in (report.first_good, report.first_bad):
            w.writerow([sc.scenario, sc.n_trials] + [
                repr(getattr(sc, c)) for c in PROBE_COLUMNS[2:]])


# ------------------------------------------------------------- histograms


def action_histogram(prime, helper, n_episodes: int, seed: int = 0):
    """Per-timestep move frequencies: two length-100 vectors (helper all
    zero / unused in baseline mode)."""
    stay = int(Action.STAY)
    p_freq = np.zeros(EPISODE_STEPS)
    h_freq = np.zeros(EPISODE_STEPS)
    batched = isinstance(prime, PolicyNet) and (helper is None or isinstance(helper, PolicyNet))
    if batched:
        done = 0
        while done < n_episodes:
            size = min(100, n_episodes - done)
            rngs = [derive_rng(seed, HISTOGRAM_STREAM, 0, done + i) for i in range(size)]
            tasks = [sample_task(r) for r in rngs]
            scripts = [default_spawn_script(r) for r in rngs]
            batch = rollout_batch(prime, helper, tasks, scripts, epsilon=0.0)
            p_freq += (batch.prime_actions != stay).sum(axis=1)
            if helper is not None:
                h_freq += (batch.helper_actions != stay).sum(axis=1)
            done += size
    else:
        for i in range(n_episodes):
            rng = derive_rng(seed, HISTOGRAM_STREAM, 0, i)
            task, script = sample_task(rng), default_spawn_script(rng)
            env = ForagingEnv(include_helper=helper is not None)
            tr = rollout_episode(env, prime, helper, task, script)
            p_freq += tr.prime_actions != stay
            if helper is not None:
                h_freq += tr.helper_actions != stay
    return p_freq / n_episodes, h_freq / n_episodes


def write_histogram_csv(path, prime_freq, helper_freq=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "prime_move_freq", "helper_move_freq"])
        for t in range(len(prime_freq)):
            w.writerow([t, repr(float(prime_freq[t])),
                        "" if helper_freq is None else repr(float(helper_freq[t]))])


# ------------------------------------------------------------- curves


@dataclass
class PhaseSummary:
    """Shape test for the prime-attributed reward curve during training:
    does it rise, peak strictly inside the run, and drop again?"""

    detected: bool
    peak_update: int
    peak_value: float
    start_value: float
    end_value: float
    margin: float


@dataclass
class LearningCurve:
    updates: np.ndarray
    prime_attributed: np.ndarray
    helper_attributed: np.ndarray
    mean_reward: np.ndarray
    smoothed_prime: np.ndarray
    phases: PhaseSummary


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return np.asarray(values, dtype=np.float64)
    window = min(window, len(values))
    kernel = np.ones(window) / window
    padded = np.concatenate([
        np.full(window // 2, values[0]),
        values,
        np.full(window - 1 - window // 2, values[-1]),
    ])
    return np.convolve(padded, kernel, mode="valid")


def detect_rise_peak_drop(curve: np.ndarray, margin: float = 0.5,
                          window: int = 1) -> PhaseSummary:
    smooth = moving_average(np.asarray(curve, dtype=np.float64), window)
    peak = int(np.argmax(smooth))
    start, end = float(smooth[0]), float(smooth[-1])
    peak_value = float(smooth[peak])
    detected = (peak_value >= start + margin) and (peak_value >= end + margin)
    return PhaseSummary(detected=detected, peak_update=peak, peak_value=peak_value,
                        start_value=start, end_value=end, margin=margin)


def learning_curve(metrics_path, margin: float = 0.5, window: int = 101) -> LearningCurve:
    """Attribution curves from a training metrics CSV plus phase detection."""
    cols = read_metrics(metrics_path)
    needed = ("update", "prime_collect", "helper_collect", "mean_reward")
    for name in needed:
        if name not in cols or len(cols[name]) == 0:
            raise ValueError(f"{metrics_path}: missing or empty column {name!r}")
    prime_curve = cols["prime_collect"]
    if np.isnan(prime_curve).any():
        raise ValueError(f"{metrics_path}: prime_collect has gaps")
    smoothed = moving_average(prime_curve, window)
    phases = detect_rise_peak_drop(prime_curve, margin=margin, window=window)
    return LearningCurve(
        updates=cols["update"].astype(int),
        prime_attributed=prime_curve,
        helper_attributed=cols["helper_collect"],
        mean_reward=cols["mean_reward"],
        smoothed_prime=smoothed,
        phases=phases,
    )


def write_learning_curve_csv(path, curve: LearningCurve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["update", "prime_attributed", "helper_attributed",
                    "mean_reward", "smoothed_prime"])
        for k in range(len(curve.updates)):
            helper_val = curve.helper_attributed[k]
            w.writerow([
                int(curve.updates[k]),
                repr(float(curve.prime_attributed[k])),
                "" if np.isnan(helper_val) else repr(float(helper_val)),
                repr(float(curve.mean_reward[k])),
                repr(float(curve.smoothed_prime[k])),
            ])
