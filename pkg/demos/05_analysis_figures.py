"""Analyze a finished joint run: probes, histograms, curves, SVG figures.

    python3 demos/05_analysis_figures.py runs/joint_full_s0 [out_dir]

Writes the four CSV exports plus, when matplotlib is importable, three
vector figures: the per-timestep move histogram, the reward-attribution
learning curve with its detected peak, and the probe summary.
"""

import sys
from pathlib import Path

from forage import evaluation
from forage.checkpoint import load_checkpoint

run_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/joint_full_s0")
out = Path(sys.argv[2]) if len(sys.argv) > 2 else run_dir / "analysis"
out.mkdir(parents=True, exist_ok=True)

ck = load_checkpoint(run_dir / "checkpoint.bin")
if ck.helper is None:
    sys.exit("need a joint checkpoint (this one is a baseline run)")
prime, helper = ck.prime.policy(), ck.helper.policy()

print("1/4 greedy evaluation (500 episodes)")
stats = evaluation.evaluate(prime, helper, n_episodes=500, seed=1)
evaluation.write_eval_stats_csv(out / "eval_stats.csv", stats)
print(f"    reward {stats.reward_mean:+.2f}, prime moves {stats.prime_moves_mean:.2f}, "
      f"helper moves {stats.helper_moves_mean:.2f}")

print("2/4 first-object probe (200 trials per branch)")
report = evaluation.probe_first_object(prime, helper, n_trials=200, seed=2)
evaluation.write_probe_csv(out / "probe_report.csv", report)
for sc in (report.first_good, report.first_bad):
    print(f"    {sc.scenario}: prime moves {sc.prime_moves_mean:.2f}, "
          f"picks first object {sc.prime_first_collect_rate:.0%}, "
          f"helper gets {sc.helper_good_rate_mean:.0%} of later goods")

print("3/4 per-timestep move histogram (500 episodes)")
p_freq, h_freq = evaluation.action_histogram(prime, helper, n_episodes=500, seed=3)
evaluation.write_histogram_csv(out / "action_histogram.csv", p_freq, h_freq)
print(f"    prime moves early (t<20): {p_freq[:20].mean():.3f}, "
      f"late (t>=20): {p_freq[20:].mean():.3f}")

print("4/4 learning curve from the training metrics")
curve = evaluation.learning_curve(run_dir / "metrics.csv")
evaluation.write_learning_curve_csv(out / "learning_curve.csv", curve)
ph = curve.phases
print(f"    prime-attributed reward: start {ph.start_value:+.2f} -> "
      f"peak {ph.peak_value:+.2f} @ update {ph.peak_update} -> end {ph.end_value:+.2f} "
      f"({'rise-peak-drop' if ph.detected else 'no peak'})")

try:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
except ImportError:
    print(f"\nCSV outputs in {out}; install matplotlib for the SVG figures")
    sys.exit(0)

fig, ax = plt.subplots(figsize=(5, 3))
ax.plot(p_freq, label="prime", lw=1.5)
ax.plot(h_freq, label="helper", lw=1.5, alpha=0.7)
ax.set(xlabel="timestep", ylabel="move frequency", title="when the agents move")
ax.legend()
fig.tight_layout()
fig.savefig(out / "action_histogram.svg")

fig, ax = plt.subplots(figsize=(5, 3))
ax.plot(curve.updates, curve.prime_attributed, alpha=0.25, color="C0")
ax.plot(curve.updates, curve.smoothed_prime, color="C0", label="prime-attributed")
ax.plot(curve.updates, curve.helper_attributed, alpha=0.25, color="C1")
ax.plot(curve.updates, evaluation.moving_average(curve.helper_attributed, 101),
        color="C1", label="helper-attributed")
ax.axvline(ph.peak_update, ls=":", color="gray")
ax.set(xlabel="update", ylabel="collection reward / episode",
       title="who earns the reward during training")
ax.legend()
fig.tight_layout()
fig.savefig(out / "learning_curve.svg")

fig, ax = plt.subplots(figsize=(5, 3))
ax.bar([0, 1], [report.first_good.prime_moves_mean, report.first_bad.prime_moves_mean],
       color=["C2", "C3"])
ax.set_xticks([0, 1], ["first object good", "first object bad"])
ax.set(ylabel="prime moves / episode", title="the prime's one-shot signal")
fig.tight_layout()
fig.savefig(out / "probe_moves.svg")

print(f"\nwrote CSVs and SVG figures to {out}")
