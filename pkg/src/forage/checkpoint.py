"""Versioned binary checkpoints: parameters, optimizer state, exact resume.

Layout: magic ``FMRL``, little-endian u32 format version, u32 section
count, then length-prefixed named sections. Parameter payloads are
little-endian float32. Loading is strict: bad magic or truncation raises
CorruptCheckpointError, an unknown version raises VersionMismatchError,
and a round trip is bit-exact.

Episode RNG streams are stateless functions of (seed, update, episode), so
the "rng" section records the derivation scheme rather than a generator
state; storing the seed and update index is enough for exact resume.
"""

from __future__ import annotations

import dataclasses
import io
import json
import os
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from forage import nn
from forage.agent import PolicyNet
from forage.config import TrainConfig, train_config_from_dict, train_config_to_dict

MAGIC = b"FMRL"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


@dataclass
class AgentSnapshot:
    role: str
    lstm: nn.LSTMParams
    head: nn.LinearParams
    adam_step: int
    adam_moments: list[np.ndarray]  # m arrays then v arrays; empty before any update

    @classmethod
    def of(cls, policy: PolicyNet, adam: nn.Adam) -> "AgentSnapshot":
        return cls(role=policy.role, lstm=policy.lstm, head=policy.head,
                   adam_step=adam.step_count, adam_moments=adam.state_arrays())

    def policy(self) -> PolicyNet:
        return PolicyNet(lstm=self.lstm, head=self.head, role=self.role)

    def adam(self, **kwargs) -> nn.Adam:
        opt = nn.Adam(**kwargs)
        if self.adam_moments:
            opt.restore(self.adam_step, self.adam_moments)
        else:
            opt.step_count = self.adam_step
        return opt


@dataclass
class Checkpoint:
    config: TrainConfig
    update_index: int
    prime: AgentSnapshot
    helper: Optional[AgentSnapshot]
    rng_state: dict


# ------------------------------------------------------------- packing


def _pack_arrays(arrays: Sequence[np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<I", len(arrays)))
    for arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f4")
        out.write(struct.pack("<B", data.ndim))
        for dim in data.shape:
            out.write(struct.pack("<I", dim))
        raw = data.tobytes()
        out.write(struct.pack("<Q", len(raw)))
        out.write(raw)
    return out.getvalue()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptCheckpointError("checkpoint truncated")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _unpack_arrays(blob: bytes) -> list[np.ndarray]:
    r = _Reader(blob)
    (count,) = r.unpack("<I")
    arrays = []
    for _ in range(count):
        (ndim,) = r.unpack("<B")
        shape = tuple(r.unpack("<I")[0] for _ in range(ndim))
        (nbytes,) = r.unpack("<Q")
        arr = np.frombuffer(r.take(nbytes), dtype="<f4").reshape(shape)
        arrays.append(arr.copy())
    if r.pos != len(blob):
        raise CorruptCheckpointError("trailing bytes in array section")
    return arrays


def _pack_agent(snap: AgentSnapshot) -> tuple[bytes, bytes]:
    params = _pack_arrays(nn.param_arrays(snap.lstm, snap.head))
    adam = struct.pack("<Q", snap.adam_step) + _pack_arrays(snap.adam_moments)
    return params, adam


def _unpack_agent(role: str, params_blob: bytes, adam_blob: bytes) -> AgentSnapshot:
    arrays = _unpack_arrays(params_blob)
    if len(arrays) != 5:
        raise CorruptCheckpointError(f"expected 5 parameter arrays, got {len(arrays)}")
    w_x, w_h, b, head_w, head_b = arrays
    (adam_step,) = struct.unpack("<Q", adam_blob[:8])
    moments = _unpack_arrays(adam_blob[8:])
    return AgentSnapshot(
        role=role,
        lstm=nn.LSTMParams(w_x, w_h, b),
        head=nn.LinearParams(head_w, head_b),
        adam_step=adam_step,
        adam_moments=moments,
    )


# ------------------------------------------------------------- file I/O


def save_checkpoint(path, ck: Checkpoint) -> None:
    sections: list[tuple[str, bytes]] = [
        ("meta", json.dumps({"update_index": ck.update_index}).encode()),
        ("config", json.dumps(train_config_to_dict(ck.config)).encode()),
        ("rng", json.dumps(ck.rng_state).encode()),
    ]
    p_params, p_adam = _pack_agent(ck.prime)
    sections += [("prime.params", p_params), ("prime.adam", p_adam)]
    if ck.helper is not None:
        h_params, h_adam = _pack_agent(ck.helper)
        sections += [("helper.params", h_params), ("helper.adam", h_adam)]

    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(struct.pack("<I", len(sections)))
    for name, payload in sections:
        raw = name.encode("ascii")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(struct.pack("<Q", len(payload)))
        out.write(payload)

    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(out.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    (count,) = r.unpack("<I")
    sections: dict[str, bytes] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("ascii")
        (size,) = r.unpack("<Q")
        sections[name] = r.take(size)
    if r.pos != len(blob):
        raise CorruptCheckpointError(f"{path}: trailing bytes after last section")

    try:
        meta = json.loads(sections["meta"])
        cfg = train_config_from_dict(json.loads(sections["config"]))
        rng_state = json.loads(sections["rng"])
        prime = _unpack_agent("prime", sections["prime.params"], sections["prime.adam"])
    except KeyError as missing:
        raise CorruptCheckpointError(f"{path}: missing section {missing}") from None
    helper = None
    if "helper.params" in sections:
        helper = _unpack_agent("helper", sections["helper.params"], sections["helper.adam"])
    return Checkpoint(
        config=cfg,
        update_index=int(meta["update_index"]),
        prime=prime,
        helper=helper,
        rng_state=rng_state,
    )


def snapshots_equal(a: AgentSnapshot, b: AgentSnapshot) -> bool:
    """Bit-exact equality of parameters and optimizer state."""
    if a.role != b.role or a.adam_step != b.adam_step:
        return False
    xs = nn.param_arrays(a.lstm, a.head) + a.adam_moments
    ys = nn.param_arrays(b.lstm, b.head) + b.adam_moments
    if len(xs) != len(ys):
        return False
    return all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(xs, ys))


def checkpoints_equal(a: Checkpoint, b: Checkpoint) -> bool:
    if dataclasses.asdict(a.config) != dataclasses.asdict(b.config):
        return False
    if a.update_index != b.update_index or a.rng_state != b.rng_state:
        return False
    if (a.helper is None) != (b.helper is None):
        return False
    if not snapshots_equal(a.prime, b.prime):
        return False
    return a.helper is None or snapshots_equal(a.helper, b.helper)
