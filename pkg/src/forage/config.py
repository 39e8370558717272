"""Run configuration: dataclasses plus a flat key=value text format.

Defaults mirror the reference experiment, so an empty config file trains
the full-scale setup (200-unit LSTM, batches of 100 episodes, 10,000
updates, gamma 0.95, epsilon 0.05). Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional


@dataclass
class TrainConfig:
    hidden_size: int = 200
    gamma: float = 0.95
    epsilon: float = 0.05
    batch_episodes: int = 100
    total_updates: int = 10_000
    seed: int = 0
    baseline_mode: bool = False
    clip_norm: Optional[float] = 10.0  # None disables clipping
    eval_every: int = 500              # 0 disables periodic greedy eval
    eval_episodes: int = 200

    def validate(self) -> "TrainConfig":
        if self.hidden_size <= 0 or self.batch_episodes <= 0 or self.total_updates <= 0:
            raise ValueError("hidden_size, batch_episodes and total_updates must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0,1), got {self.gamma}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0,1], got {self.epsilon}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive (or none to disable)")
        if self.eval_every < 0 or self.eval_episodes < 0:
            raise ValueError("eval settings must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        return self


@dataclass
class RunConfig:
    """TrainConfig plus the artifact-level knobs (paths, eval, serving)."""

    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    final_eval_episodes: int = 1000
    probe_trials: int = 200
    histogram_episodes: int = 500
    serve_port: int = 8765
    serve_turn_timeout: Optional[float] = None  # seconds; None = wait forever

    def validate(self) -> "RunConfig":
        self.train.validate()
        if self.final_eval_episodes <= 0 or self.probe_trials <= 0:
            raise ValueError("episode counts must be positive")
        if not (0 < self.serve_port < 65536):
            raise ValueError(f"bad port {self.serve_port}")
        if self.serve_turn_timeout is not None and self.serve_turn_timeout <= 0:
            raise ValueError("turn timeout must be positive (or none)")
        return self


_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "train"}

_OPTIONAL_FLOATS = {"clip_norm", "serve_turn_timeout"}
_BOOLS = {"baseline_mode"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOLS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if key in _OPTIONAL_FLOATS:
        if raw.lower() in ("none", "off"):
            return None
        return float(raw)
    field = _TRAIN_FIELDS.get(key) or _RUN_FIELDS.get(key)
    if field.type in ("int", int):
        return int(raw)
    return float(raw)


def _render_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` lines; '#' starts a comment; unknown keys fail."""
    train_kw, run_kw = {}, {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in train_kw or key in run_kw:
            raise ValueError(f"line {ln}: duplicate key {key!r}")
        if key in _TRAIN_FIELDS:
            train_kw[key] = _parse_value(key, val)
        elif key in _RUN_FIELDS:
            run_kw[key] = _parse_value(key, val)
        else:
            raise ValueError(f"line {ln}: unknown config key {key!r}")
    return RunConfig(train=TrainConfig(**train_kw), **run_kw).validate()


def render_config(cfg: RunConfig) -> str:
    """Inverse of parse_config: parse(render(c)) == c."""
    lines = ["# training"]
    for name in _TRAIN_FIELDS:
        lines.append(f"{name} = {_render_value(getattr(cfg.train, name))}")
    lines.append("")
    lines.append("# evaluation and serving")
    for name in _RUN_FIELDS:
        lines.append(f"{name} = {_render_value(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_config(cfg))


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def train_config_from_dict(d: dict) -> TrainConfig:
    unknown = set(d) - set(_TRAIN_FIELDS)
    if unknown:
        raise ValueError(f"unknown TrainConfig keys {sorted(unknown)}")
    return TrainConfig(**d).validate()
