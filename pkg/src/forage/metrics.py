"""Training metrics log: one CSV row per gradient update.

Columns (blank when not applicable, e.g. helper columns in baseline mode
and eval columns on updates without a periodic evaluation):

    update               0-based update index
    mean_reward          mean episode reward over the training batch
    prime_moves          mean non-stay prime actions per episode
    helper_moves         mean non-stay helper actions per episode
    prime_collect        mean collection reward credited to the prime
    helper_collect       mean collection reward credited to the helper
    loss_prime           summed TD loss over the batch (prime)
    loss_helper          summed TD loss over the batch (helper)
    grad_norm_prime      pre-clip global gradient norm (prime)
    grad_norm_helper     pre-clip global gradient norm (helper)
    eval_reward          mean greedy-eval episode reward
    eval_prime_moves     mean greedy-eval prime moves
    eval_helper_moves    mean greedy-eval helper moves

The identity  prime_collect + helper_collect - 0.1 * prime_moves
== mean_reward  holds on every row (up to float rounding).
"""

from __future__ import annotations

import csv
from typing import Optional

import numpy as np

METRICS_COLUMNS = [
    "update",
    "mean_reward",
    "prime_moves",
    "helper_moves",
    "prime_collect",
    "helper_collect",
    "loss_prime",
    "loss_helper",
    "grad_norm_prime",
    "grad_norm_helper",
    "eval_reward",
    "eval_prime_moves",
    "eval_helper_moves",
]


class MetricsWriter:
    """Appends rows to a metrics CSV; writes the header on a fresh file."""

    def __init__(self, path, append: bool = False):
        self.path = path
        mode = "a" if append else "w"
        self._fh = open(path, mode, encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        if self._fh.tell() == 0:
            self._writer.writerow(METRICS_COLUMNS)
            self._fh.flush()

    def write(self, row: dict) -> None:
        unknown = set(row) - set(METRICS_COLUMNS)
        if unknown:
            raise ValueError(f"unknown metrics columns {sorted(unknown)}")
        out = []
        for col in METRICS_COLUMNS:
            value = row.get(col)
            if value is None:
                out.append("")
            elif col == "update":
                out.append(str(int(value)))
            else:
                out.append(repr(float(value)))
        self._writer.writerow(out)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> dict[str, np.ndarray]:
    """Load a metrics CSV into float arrays; blanks become NaN."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "update":
            raise ValueError(f"{path}: not a metrics CSV (bad header)")
        rows = [r for r in reader if r]
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        vals = [float(r[j]) if j < len(r) and r[j] != "" else np.nan for r in rows]
        cols[name] = np.asarray(vals)
    return cols
