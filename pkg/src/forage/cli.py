"""Command-line surface: train, eval, probe, curve, serve.

Every run is reproducible from its config file plus --seed; outputs land in
--out, and nothing overwrites existing artifacts unless --force is given.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from forage import checkpoint as ckpt
from forage import config as cfgmod
from forage import evaluation, trainer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forage",
        description="two-agent foraging gridworld: train, analyze, and play",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the meta-training loop")
    p_train.add_argument("--config", type=Path, help="key=value config file")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--baseline", action="store_true",
                         help="prime-alone baseline (no helper)")
    p_train.add_argument("--out", type=Path, required=True, help="output directory")
    p_train.add_argument("--checkpoint", type=Path,
                         help="resume from this checkpoint")
    p_train.add_argument("--force", action="store_true",
                         help="overwrite existing outputs")
    p_train.add_argument("--quiet", action="store_true", help="no progress lines")

    for name, extra in (("eval", "summary statistics"),
                        ("probe", "first-object policy probe")):
        p = sub.add_parser(name, help=f"greedy {extra} from a checkpoint")
        p.add_argument("--checkpoint", type=Path, required=True)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--force", action="store_true")
        if name == "eval":
            p.add_argument("--episodes", type=int, default=1000)
        else:
            p.add_argument("--trials", type=int, default=200)

    p_curve = sub.add_parser("curve", help="attribution curves from a metrics log")
    p_curve.add_argument("--metrics", type=Path, required=True,
                         help="metrics.csv written by train")
    p_curve.add_argument("--out", type=Path, default=Path("."))
    p_curve.add_argument("--margin", type=float, default=0.5,
                         help="peak-over-endpoints margin for phase detection")
    p_curve.add_argument("--window", type=int, default=101,
                         help="moving-average window (updates)")
    p_curve.add_argument("--force", action="store_true")

    p_serve = sub.add_parser("serve", help="play the prime against a trained helper")
    p_serve.add_argument("--checkpoint", type=Path, required=True)
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--seed", type=int, help="fixed session seed (default: random)")
    p_serve.add_argument("--static", type=Path, help="directory with the UI bundle")
    p_serve.add_argument("--timeout", type=float,
                         help="seconds before an idle turn auto-plays 'stay'")
    return parser


def _refuse_overwrite(paths, force: bool):
    if force:
        return
    for p in paths:
        if Path(p).exists():
            raise FileExistsError(f"{p} exists; pass --force to overwrite")


def _load_policies(path):
    ck = ckpt.load_checkpoint(path)
    prime = ck.prime.policy()
    helper = None if ck.helper is None else ck.helper.policy()
    return ck, prime, helper


def _cmd_train(args) -> int:
    run_cfg = cfgmod.load_config(args.config) if args.config else cfgmod.RunConfig()
    cfg = run_cfg.train
    if args.seed is not None:
        cfg.seed = args.seed
    if args.baseline:
        cfg.baseline_mode = True
    cfg.validate()

    out: Path = args.out
    if args.checkpoint is None:
        _refuse_overwrite([out / trainer.CHECKPOINT_NAME, out / trainer.METRICS_NAME],
                          args.force)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.save_config(out / "config.txt", run_cfg)

    log = None if args.quiet else lambda line: print(line, flush=True)
    result = trainer.train(cfg, out, resume_from=args.checkpoint, log=log)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics:    {result.metrics_path}")
    if result.final_eval_reward is not None:
        print(f"final greedy eval reward: {result.final_eval_reward:+.3f}")
    return 0


def _cmd_eval(args) -> int:
    ck, prime, helper = _load_policies(args.checkpoint)
    out_path = args.out / "eval_stats.csv"
    _refuse_overwrite([out_path], args.force)
    stats = evaluation.evaluate(prime, helper, args.episodes, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    evaluation.write_eval_stats_csv(out_path, stats)
    mode = "baseline (prime alone)" if helper is None else "joint"
    print(f"{mode} checkpoint @ update {ck.update_index}, "
          f"{stats.n_episodes} greedy episodes:")
    print(f"  reward       {stats.reward_mean:+.3f} ± {stats.reward_stderr:.3f}")
    print(f"  prime moves  {stats.prime_moves_mean:.2f}")
    if helper is not None:
        print(f"  helper moves {stats.helper_moves_mean:.2f}")
        print(f"  collected: prime {stats.prime_collect_mean:+.3f}, "
              f"helper {stats.helper_collect_mean:+.3f}")
    print(f"wrote {out_path}")
    return 0


def _cmd_probe(args) -> int:
    ck, prime, helper = _load_policies(args.checkpoint)
    if helper is None:
        print("error: probe needs a joint checkpoint (this one is baseline)",
              file=sys.stderr)
        return 1
    out_path = args.out / "probe_report.csv"
    _refuse_overwrite([out_path], args.force)
    report = evaluation.probe_first_object(prime, helper, args.trials, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    evaluation.write_probe_csv(out_path, report)
    for sc in (report.first_good, report.first_bad):
        print(f"{sc.scenario}: prime moves {sc.prime_moves_mean:.2f}, "
              f"first-object pickup {sc.prime_first_collect_rate:.0%}, "
              f"helper good rate {sc.helper_good_rate_mean:.0%} "
              f"(>=80% in {sc.helper_good_ge80_frac:.0%} of episodes), "
              f"bad avoided {sc.helper_bad_avoid_rate:.0%}")
    print(f"wrote {out_path}")
    return 0


def _cmd_curve(args) -> int:
    out_path = args.out / "learning_curve.csv"
    _refuse_overwrite([out_path], args.force)
    curve = evaluation.learning_curve(args.metrics, margin=args.margin,
                                      window=args.window)
    args.out.mkdir(parents=True, exist_ok=True)
    evaluation.write_learning_curve_csv(out_path, curve)
    ph = curve.phases
    shape = "rise-peak-drop detected" if ph.detected else "no rise-peak-drop"
    print(f"prime-attributed reward: start {ph.start_value:+.3f}, "
          f"peak {ph.peak_value:+.3f} @ update {ph.peak_update}, "
          f"end {ph.end_value:+.3f} -> {shape} (margin {ph.margin})")
    print(f"wrote {out_path}")
    return 0


def _cmd_serve(args) -> int:
    from forage import serve as servemod

    return servemod.serve_forever(
        checkpoint_path=args.checkpoint,
        port=args.port,
        seed=args.seed,
        static_dir=args.static,
        turn_timeout=args.timeout,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "probe": _cmd_probe,
        "curve": _cmd_curve,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (FileNotFoundError, FileExistsError, ValueError,
            ckpt.CheckpointError, trainer.TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
