"""Train a small prime-alone baseline from scratch, live.

A 2-minute taste of the full experiment: 32 LSTM units, 600 updates of 50
episodes each. Watch the mean training reward climb as the prime learns to
walk to good objects (it sees which ones are good) and stop wasting the
movement penalty.

Full-scale runs use the CLI instead:  forage train --out runs/...
"""

import tempfile
from pathlib import Path

from forage import trainer
from forage.config import TrainConfig
from forage.checkpoint import load_checkpoint

out = Path(tempfile.mkdtemp(prefix="forage_demo_"))
cfg = TrainConfig(hidden_size=32, batch_episodes=50, total_updates=600,
                  baseline_mode=True, seed=0, eval_every=150, eval_episodes=100)

print(f"training: H={cfg.hidden_size}, {cfg.total_updates} updates of "
      f"{cfg.batch_episodes} episodes, prime alone; artifacts in {out}\n")

result = trainer.train(cfg, out, log=print)

ck = load_checkpoint(result.checkpoint_path)
ev = trainer.greedy_eval(ck.prime.policy(), None, n_episodes=300, seed=1,
                         update=cfg.total_updates)
print(f"\ngreedy evaluation over 300 fresh episodes: "
      f"reward {ev['reward'].mean():+.2f}, "
      f"prime moves {ev['prime_moves'].mean():.1f} per episode")
print("(the paper-scale baseline reaches about +6 with 200 units and 10k updates)")
print(f"\nresume or inspect with:  forage eval --checkpoint {result.checkpoint_path}")
