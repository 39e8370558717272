"""Acceptance suite: one test per criterion, each printing a PASS line.

Fast criteria (gradient oracle, environment equivalence, reward
accounting, determinism) run with the default suite. The desk-scale
training smoke is marked `slow` (minutes). The paper-scale reproduction
checks are marked `longrun` and read finished run directories from
$FORAGE_RUN_DIR (expected layout: <dir>/baseline_full_s*/ and
<dir>/joint_full_s*/, each holding checkpoint.bin + metrics.csv from
`forage train`); without artifacts they skip with instructions.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from forage import evaluation, nn, trainer
from forage.checkpoint import checkpoints_equal, load_checkpoint
from forage.config import TrainConfig
from forage.env import EPISODE_STEPS, Action, ForagingEnv, sample_task
from forage.trainer import derive_rng

import reference_env
from test_nn import frozen_target_loss, frozen_targets, max_rel_error, onehot, run_forward
from util import random_valid_script, reward_tenths, run_env_episode


def report(name, ok, detail=""):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


# -----------------------------------------------------------------
# 1. Gradient oracle
# -----------------------------------------------------------------


def test_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(1234)
    worst = 0.0
    trials = 22
    for _ in range(trials):
        hsz = int(rng.integers(2, 9))
        d = int(rng.integers(2, 9))
        tlen = int(rng.integers(2, 9))
        batch = int(rng.integers(1, 3))
        lstm, head = nn.init_params(rng, d, hsz, dtype=np.float64)
        lstm.b[:] = rng.normal(scale=0.3, size=lstm.b.shape)
        xs = rng.normal(size=(tlen, batch, d))
        actions = onehot(rng.integers(3, size=(tlen, batch)), tlen)
        rewards = rng.uniform(-1, 1, size=(tlen, batch))

        _, dq, caches, qs = run_forward(lstm, head, xs, actions, rewards, 0.95)
        grads = nn.backward(caches, lstm, head, dq)
        y = frozen_targets(qs, rewards, 0.95)
        fd = nn.finite_diff_grad(
            lambda _a: frozen_target_loss(lstm, head, xs, actions, y),
            nn.param_arrays(lstm, head), step=1e-5)
        worst = max(worst, max_rel_error(grads.arrays(), fd))
    elapsed = time.time() - t0
    report("gradient oracle", worst < 1e-5 and elapsed < 60,
           f"{trials} nets, max rel err {worst:.2e}, {elapsed:.1f}s")


# -----------------------------------------------------------------
# 2. Environment oracle equivalence
# -----------------------------------------------------------------


def test_environment_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(4321)
    n = 1000
    for k in range(n):
        task = sample_task(rng)
        script = random_valid_script(rng) if k % 2 else None
        if script is None:
            from forage.env import default_spawn_script
            script = default_spawn_script(rng)
        pa = [int(a) for a in rng.integers(3, size=EPISODE_STEPS)]
        ha = None if k % 9 == 0 else [int(a) for a in rng.integers(3, size=EPISODE_STEPS)]
        mine, _ = run_env_episode(task, script, pa, ha)
        ref = reference_env.simulate(
            task.good_class.name,
            [(e.t, e.cell, e.cls.name) for e in script.entries], pa, ha)
        assert mine["rewards"] == ref["rewards"], f"reward stream differs (triple {k})"
        assert mine["done"] == ref["done"]
        for a, b in zip(mine["prime_obs"], ref["prime_obs"]):
            assert a.tolist() == b, f"prime obs differ (triple {k})"
        if ha is not None:
            for a, b in zip(mine["helper_obs"], ref["helper_obs"]):
                assert a.tolist() == b, f"helper obs differ (triple {k})"
    elapsed = time.time() - t0
    report("environment oracle equivalence", elapsed < 60,
           f"{n} triples exact, {elapsed:.1f}s")


# -----------------------------------------------------------------
# 3. Reward accounting
# -----------------------------------------------------------------


def test_reward_accounting_10k_episodes():
    rng = np.random.default_rng(99)
    episodes = 10_000
    for k in range(episodes):
        task = sample_task(rng)
        script = random_valid_script(rng)
        env = ForagingEnv(include_helper=k % 3 != 0, auto_encode=False)
        env.reset(task, script)
        pa = rng.integers(3, size=EPISODE_STEPS)
        ha = rng.integers(3, size=EPISODE_STEPS)
        tenths = good = bad = moves = 0
        for t in range(EPISODE_STEPS):
            a_h = int(ha[t]) if env.include_helper else None
            out = env.step(int(pa[t]), a_h)
            tenths += reward_tenths(out.reward)
            for ev in out.collections:
                if ev.good:
                    good += 1
                else:
                    bad += 1
            if out.prime_moved:
                moves += 1
        assert tenths == 10 * (good - bad) - moves, f"episode {k} accounting broke"
    report("reward accounting", True, f"{episodes} episodes, identity exact")


# -----------------------------------------------------------------
# 4. Determinism and resume
# -----------------------------------------------------------------


def test_training_determinism_and_resume(tmp_path):
    cfg = TrainConfig(hidden_size=16, batch_episodes=10, total_updates=50,
                      seed=7, eval_every=25, eval_episodes=10)
    r1 = trainer.train(cfg, tmp_path / "a")
    r2 = trainer.train(cfg, tmp_path / "b")
    identical = checkpoints_equal(load_checkpoint(r1.checkpoint_path),
                                  load_checkpoint(r2.checkpoint_path))

    half = TrainConfig(hidden_size=16, batch_episodes=10, total_updates=25,
                       seed=7, eval_every=25, eval_episodes=10)
    rh = trainer.train(half, tmp_path / "half")
    rr = trainer.train(cfg, tmp_path / "resumed", resume_from=rh.checkpoint_path)
    resumed_ok = checkpoints_equal(load_checkpoint(r1.checkpoint_path),
                                   load_checkpoint(rr.checkpoint_path))
    report("determinism + resume", identical and resumed_ok,
           "bit-identical checkpoints (repeat and resume)")


# -----------------------------------------------------------------
# 5. Desk-scale learning smoke (minutes; -m slow)
# -----------------------------------------------------------------


@pytest.mark.slow
def test_desk_scale_baseline_smoke(tmp_path):
    target = 4.0
    best = -np.inf
    tried = []
    for seed in (0, 1, 2):
        cfg = TrainConfig(hidden_size=64, baseline_mode=True, total_updates=2000,
                          seed=seed, eval_every=0, eval_episodes=0)
        res = trainer.train(cfg, tmp_path / f"seed{seed}")
        ck = load_checkpoint(res.checkpoint_path)
        ev = trainer.greedy_eval(ck.prime.policy(), None, n_episodes=500,
                                 seed=seed, update=cfg.total_updates)
        score = float(ev["reward"].mean())
        tried.append(f"seed {seed}: {score:+.2f}")
        best = max(best, score)
        if best >= target:
            break
    report("desk-scale baseline smoke", best >= target,
           f"best greedy eval {best:+.2f} over 500 episodes ({'; '.join(tried)})")


# -----------------------------------------------------------------
# 6-8. Paper-scale reproduction (hours; -m longrun with artifacts)
# -----------------------------------------------------------------


def _run_dirs(prefix):
    root = os.environ.get("FORAGE_RUN_DIR")
    if not root:
        pytest.skip("set FORAGE_RUN_DIR to a directory of finished paper-scale "
                    "runs (see README: reproduction protocol)")
    dirs = sorted(Path(root).glob(f"{prefix}*"))
    dirs = [d for d in dirs if (d / "checkpoint.bin").exists()]
    if not dirs:
        pytest.skip(f"no finished {prefix}* runs under {root}")
    return dirs


@pytest.mark.longrun
def test_full_reproduction_baseline():
    best = None
    for d in _run_dirs("baseline_full_s"):
        ck = load_checkpoint(d / "checkpoint.bin")
        stats = evaluation.evaluate(ck.prime.policy(), None, 1000, seed=1000)
        cand = (stats.reward_mean, stats.prime_moves_mean, d.name)
        if best is None or cand[0] > best[0]:
            best = cand
    reward, moves, name = best
    ok = abs(reward - 5.99) <= 1.0 and abs(moves - 29.48) <= 8.0
    report("full reproduction: baseline", ok,
           f"{name}: reward {reward:+.2f} (target 5.99±1.0), "
           f"prime moves {moves:.2f} (target 29.48±8)")


@pytest.mark.longrun
def test_full_reproduction_joint():
    best = None
    for d in _run_dirs("joint_full_s"):
        ck = load_checkpoint(d / "checkpoint.bin")
        stats = evaluation.evaluate(ck.prime.policy(), ck.helper.policy(), 1000,
                                    seed=2000)
        cand = (stats.reward_mean, stats.prime_moves_mean, d.name)
        if best is None or cand[0] > best[0]:
            best = cand
    reward, moves, name = best
    ok = abs(reward - 9.29) <= 0.7 and abs(moves - 3.98) <= 3.0
    report("full reproduction: joint", ok,
           f"{name}: reward {reward:+.2f} (target 9.29±0.7), "
           f"prime moves {moves:.2f} (target 3.98±3)")


def _best_joint_run():
    dirs = _run_dirs("joint_full_s")
    best = None
    for d in dirs:
        ck = load_checkpoint(d / "checkpoint.bin")
        stats = evaluation.evaluate(ck.prime.policy(), ck.helper.policy(), 200,
                                    seed=123)
        if best is None or stats.reward_mean > best[0]:
            best = (stats.reward_mean, d, ck)
    return best[1], best[2]


@pytest.mark.longrun
def test_joint_run_figure_shapes():
    d, ck = _best_joint_run()
    prime, helper = ck.prime.policy(), ck.helper.policy()
    p_freq, _ = evaluation.action_histogram(prime, helper, n_episodes=500, seed=77)
    early, late = float(p_freq[:20].mean()), float(p_freq[20:].mean())
    hist_ok = early > late

    curve = evaluation.learning_curve(d / "metrics.csv")
    report("joint figure shapes", hist_ok and curve.phases.detected,
           f"move freq early {early:.3f} > late {late:.3f}; "
           f"prime-attributed curve peak {curve.phases.peak_value:+.2f} "
           f"@ {curve.phases.peak_update} over start {curve.phases.start_value:+.2f} "
           f"/ end {curve.phases.end_value:+.2f}")


@pytest.mark.longrun
def test_joint_run_probe_behavior():
    _, ck = _best_joint_run()
    rep = evaluation.probe_first_object(ck.prime.policy(), ck.helper.policy(),
                                        n_trials=200, seed=88)
    ok = (rep.first_good.helper_good_ge80_frac >= 0.8
          and rep.first_bad.prime_moves_mean <= 2.0)
    report("joint probe behavior", ok,
           f"first-good: helper >=80% of later goods in "
           f"{rep.first_good.helper_good_ge80_frac:.0%} of episodes; "
           f"first-bad: prime moves {rep.first_bad.prime_moves_mean:.2f} on average")


# -----------------------------------------------------------------
# 9. Serve replay equivalence (secondary surface, no UI required)
# -----------------------------------------------------------------


def test_serve_replay_equivalence():
    from forage import serve
    from test_serve import joint_checkpoint

    session = serve.start_session(joint_checkpoint(), seed=77)
    rng = np.random.default_rng(7)
    names = ["left", "right", "stay"]
    while not session.done:
        session.handle_action(names[int(rng.integers(3))])
    t = session.transcript()
    rewards = trainer.replay_actions(session.task, session.script,
                                     t["prime_actions"], t["helper_actions"])
    report("serve replay equivalence", rewards == t["rewards"],
           f"{len(rewards)}-step session reproduced exactly from seed+actions")
