"""Reproduce the full-scale quantitative results (long; hours on a CPU).

Runs the complete protocol for one seed: the prime-alone baseline and the
joint two-agent experiment, both at full scale (200 LSTM units, batches of
100 episodes, 10,000 updates), then the 1,000-episode greedy evaluations.

    python3 demos/04_reproduce_full_runs.py runs/ [seed]

Reference targets (best of 3 seeds): baseline reward ~5.99 with ~29.5
moves per episode; joint reward ~9.29 with ~4 prime moves. After a few
seeds, point the acceptance suite at the artifacts:

    FORAGE_RUN_DIR=runs python3 -m pytest tests/test_acceptance.py -m longrun
"""

import sys
from pathlib import Path

from forage import evaluation, trainer
from forage.checkpoint import load_checkpoint
from forage.config import TrainConfig

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

for baseline in (True, False):
    name = f"{'baseline' if baseline else 'joint'}_full_s{seed}"
    out = root / name
    if (out / "checkpoint.bin").exists():
        print(f"{name}: checkpoint exists, skipping training")
    else:
        print(f"{name}: training (this is the long part)")
        cfg = TrainConfig(baseline_mode=baseline, seed=seed,
                          eval_every=500, eval_episodes=200)
        trainer.train(cfg, out, log=print)

    ck = load_checkpoint(out / "checkpoint.bin")
    prime = ck.prime.policy()
    helper = None if ck.helper is None else ck.helper.policy()
    stats = evaluation.evaluate(prime, helper, n_episodes=1000, seed=seed + 500)
    evaluation.write_eval_stats_csv(out / "eval_stats.csv", stats)
    print(f"{name}: reward {stats.reward_mean:+.2f} ± {stats.reward_stderr:.2f}, "
          f"prime moves {stats.prime_moves_mean:.2f}\n")
