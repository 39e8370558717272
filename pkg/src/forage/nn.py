"""Dense numerical core: LSTM cell, linear Q head, TD loss, BPTT, Adam.

Everything is plain numpy, batched over episodes along the leading axis.
Training runs in float32; the gradient-check tests run the same code in
float64 (dtype follows the parameter arrays). No autodiff: the backward
pass is written out by hand and verified against central finite differences.

Gate order inside every 4H-sized block is (input, forget, output, candidate):
the three sigmoid gates sit in one contiguous slice, the tanh candidate last.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

NUM_ACTIONS = 3


@dataclass
class LSTMParams:
    """One LSTM cell: stacked gate weights (4H x D and 4H x H) and bias 4H."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]


@dataclass
class LinearParams:
    """Q head: 3 x H weights plus bias, one output per action."""

    w: np.ndarray
    b: np.ndarray


@dataclass
class Gradients:
    """Parameter gradients, shape-matched to LSTMParams + LinearParams."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w_x, self.w_h, self.b, self.head_w, self.head_b]


def param_arrays(lstm: LSTMParams, head: LinearParams) -> list[np.ndarray]:
    """Canonical flat ordering used by Adam, clipping and checkpoints."""
    return [lstm.w_x, lstm.w_h, lstm.b, head.w, head.b]


class LSTMState(NamedTuple):
    """Recurrent state, batched: h and c are (batch, H)."""

    h: np.ndarray
    c: np.ndarray


class StepCache(NamedTuple):
    """Forward intermediates of one step, kept for the backward pass."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


def init_params(
    rng: np.random.Generator,
    input_size: int,
    hidden_size: int,
    dtype=np.float32,
) -> tuple[LSTMParams, LinearParams]:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights; zero biases except
    the forget gate, which starts at 1.0."""
    if input_size <= 0 or hidden_size <= 0:
        raise ValueError("sizes must be positive")
    d, h = input_size, hidden_size
    lim_x, lim_h = 1.0 / np.sqrt(d), 1.0 / np.sqrt(h)
    w_x = rng.uniform(-lim_x, lim_x, (4 * h, d)).astype(dtype)
    w_h = rng.uniform(-lim_h, lim_h, (4 * h, h)).astype(dtype)
    b = np.zeros(4 * h, dtype=dtype)
    b[h:2 * h] = 1.0
    head_w = rng.uniform(-lim_h, lim_h, (NUM_ACTIONS, h)).astype(dtype)
    head_b = np.zeros(NUM_ACTIONS, dtype=dtype)
    return LSTMParams(w_x, w_h, b), LinearParams(head_w, head_b)


def zero_state(hidden_size: int, batch: int = 1, dtype=np.float32) -> LSTMState:
    return LSTMState(
        h=np.zeros((batch, hidden_size), dtype=dtype),
        c=np.zeros((batch, hidden_size), dtype=dtype),
    )


class LSTMForward:
    """Reusable forward context for one set of (fixed) parameters.

    Holds contiguous transposed weight copies so the per-step GEMMs run at
    full speed; build one per rollout, while the parameters are frozen.
    """

    def __init__(self, params: LSTMParams):
        self.params = params
        self.w_x_t = np.ascontiguousarray(params.w_x.T)
        self.w_h_t = np.ascontiguousarray(params.w_h.T)

    def step(self, state: LSTMState, x: np.ndarray) -> tuple[LSTMState, StepCache]:
        params = self.params
        hsz = params.hidden_size
        if x.ndim != 2 or x.shape[1] != params.input_size:
            raise ValueError(f"input shape {x.shape}, expected (batch, {params.input_size})")
        if state.h.shape != (x.shape[0], hsz) or state.c.shape != (x.shape[0], hsz):
            raise ValueError(
                f"state shape {state.h.shape} does not match batch {x.shape[0]}, H={hsz}")

        z = x @ self.w_x_t
        z += state.h @ self.w_h_t
        z += params.b
        # sigmoid(v) = 0.5 tanh(v/2) + 0.5, in place over the i,f,o block
        zs = z[:, :3 * hsz]
        zs *= 0.5
        np.tanh(zs, out=zs)
        zs *= 0.5
        zs += 0.5
        zg = z[:, 3 * hsz:]
        np.tanh(zg, out=zg)

        i = z[:, :hsz]
        f = z[:, hsz:2 * hsz]
        o = z[:, 2 * hsz:3 * hsz]
        g = zg
        c = f * state.c
        c += i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        if not np.isfinite(c).all() or not np.isfinite(h).all():
            raise FloatingPointError("non-finite LSTM state")
        cache = StepCache(x=x, h_prev=state.h, c_prev=state.c,
                          i=i, f=f, g=g, o=o, c=c, tanh_c=tanh_c, h=h)
        return LSTMState(h=h, c=c), cache


def lstm_step(params: LSTMParams, state: LSTMState, x: np.ndarray) -> tuple[LSTMState, StepCache]:
    """One LSTM update over a batch of inputs x (batch, D).

    Returns the new state plus the cache of intermediates that backward()
    consumes. Raises on shape mismatch or non-finite output. For many steps
    under fixed parameters, build one LSTMForward and call .step() instead.
    """
    return LSTMForward(params).step(state, x)


def q_head(head: LinearParams, h: np.ndarray) -> np.ndarray:
    """Action values q = W h + b for a batch of hidden states (batch, H)."""
    if h.ndim != 2 or h.shape[1] != head.w.shape[1]:
        raise ValueError(f"hidden shape {h.shape}, expected (batch, {head.w.shape[1]})")
    return h @ head.w.T + head.b


def td_loss(
    qs: np.ndarray,
    actions_onehot: np.ndarray,
    rewards: np.ndarray,
    gamma: float,
) -> tuple[float, np.ndarray]:
    """Episode-sum Q-learning loss and its gradient w.r.t. the q sequence.

    L = sum_t [q_t . a_t - y_t]^2 with y_t = r_t + gamma * max_a q_{t+1}
    and a zero bootstrap on the final step. The target y is held constant
    (semi-gradient): no gradient flows through the max term. Accepts
    (T, 3) for one episode or (T, B, 3) for a batch; the batch loss is the
    plain sum over episodes.
    """
    if qs.ndim == 2:
        loss, dq = td_loss(qs[:, None, :], actions_onehot[:, None, :], rewards[:, None], gamma)
        return loss, dq[:, 0, :]
    if qs.ndim != 3 or qs.shape[-1] != NUM_ACTIONS:
        raise ValueError(f"qs shape {qs.shape}, expected (T, B, {NUM_ACTIONS})")
    if actions_onehot.shape != qs.shape:
        raise ValueError(f"actions shape {actions_onehot.shape} != qs shape {qs.shape}")
    if rewards.shape != qs.shape[:2]:
        raise ValueError(f"rewards shape {rewards.shape}, expected {qs.shape[:2]}")

    chosen = np.sum(qs * actions_onehot, axis=-1)          # (T, B)
    y = rewards.astype(qs.dtype).copy()
    if qs.shape[0] > 1:
        y[:-1] += np.asarray(gamma, dtype=qs.dtype) * np.max(qs[1:], axis=-1)
    delta = chosen - y
    loss = float(np.sum(np.square(delta, dtype=np.float64)))
    dq = (2.0 * delta)[..., None] * actions_onehot
    return loss, dq


def episode_loss(qs, actions_onehot, rewards, gamma: float) -> float:
    """Loss of a single episode (see td_loss); sequences of length T align."""
    loss, _ = td_loss(qs, actions_onehot, rewards, gamma)
    return loss


def backward(
    caches: Sequence[StepCache],
    lstm: LSTMParams,
    head: LinearParams,
    dq: np.ndarray,
) -> Gradients:
    """Exact reverse-mode gradient through the unrolled episode batch.

    `caches` is the forward record, one StepCache per step; `dq` is
    (T, B, 3), the loss gradient at each step's q vector. Gradients are
    summed over batch and time in a fixed order, so results are
    reproducible bit for bit.
    """
    tlen = len(caches)
    if dq.shape[0] != tlen:
        raise ValueError(f"dq has {dq.shape[0]} steps, caches have {tlen}")
    hsz = lstm.hidden_size
    dtype = lstm.w_x.dtype

    g = Gradients(
        w_x=np.zeros_like(lstm.w_x), w_h=np.zeros_like(lstm.w_h), b=np.zeros_like(lstm.b),
        head_w=np.zeros_like(head.w), head_b=np.zeros_like(head.b),
    )
    batch = caches[0].x.shape[0]
    # scratch reused across the time loop (the hot path of every update)
    dh = np.empty((batch, hsz), dtype=dtype)
    dh_next = np.zeros((batch, hsz), dtype=dtype)
    dc = np.empty((batch, hsz), dtype=dtype)
    dc_next = np.zeros((batch, hsz), dtype=dtype)
    dz = np.empty((batch, 4 * hsz), dtype=dtype)
    tmp = np.empty((batch, hsz), dtype=dtype)
    acc_wx = np.empty_like(lstm.w_x)
    acc_wh = np.empty_like(lstm.w_h)

    for t in range(tlen - 1, -1, -1):
        cc = caches[t]
        dq_t = dq[t]
        g.head_w += dq_t.T @ cc.h
        g.head_b += dq_t.sum(axis=0)

        np.matmul(dq_t, head.w, out=dh)
        dh += dh_next

        # dc = dh * o * (1 - tanh_c^2) + carried dc
        np.multiply(cc.tanh_c, cc.tanh_c, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= cc.o
        np.multiply(dh, tmp, out=dc)
        dc += dc_next

        dzi = dz[:, :hsz]
        dzf = dz[:, hsz:2 * hsz]
        dzo = dz[:, 2 * hsz:3 * hsz]
        dzg = dz[:, 3 * hsz:]
        # pre-activation gate gradients: sigmoid' = s(1-s), tanh' = 1-g^2
        np.subtract(1.0, cc.i, out=tmp); tmp *= cc.i; np.multiply(dc, cc.g, out=dzi); dzi *= tmp
        np.subtract(1.0, cc.f, out=tmp); tmp *= cc.f; np.multiply(dc, cc.c_prev, out=dzf); dzf *= tmp
        np.subtract(1.0, cc.o, out=tmp); tmp *= cc.o; np.multiply(dh, cc.tanh_c, out=dzo); dzo *= tmp
        np.multiply(cc.g, cc.g, out=tmp); np.subtract(1.0, tmp, out=tmp)
        np.multiply(dc, cc.i, out=dzg); dzg *= tmp

        np.multiply(dc, cc.f, out=dc_next)

        np.matmul(dz.T, cc.x, out=acc_wx)
        g.w_x += acc_wx
        np.matmul(dz.T, cc.h_prev, out=acc_wh)
        g.w_h += acc_wh
        g.b += dz.sum(axis=0)
        np.matmul(dz, lstm.w_h, out=dh_next)

    for a in g.arrays():
        if not np.isfinite(a).all():
            raise FloatingPointError("non-finite gradient")
    return g


def finite_diff_grad(
    loss_fn: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    step: float = 1e-5,
) -> list[np.ndarray]:
    """Central-difference gradient estimate, one entry at a time.

    `loss_fn(arrays) -> float` must be deterministic; the arrays are
    perturbed in place and restored. Only for small parameter counts.
    """
    grads = []
    for arr in arrays:
        gout = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = gout.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_fn(arrays)
            flat[j] = orig - step
            down = loss_fn(arrays)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * step)
        grads.append(gout)
    return grads


def global_norm(arrays: Sequence[np.ndarray]) -> float:
    total = 0.0
    for a in arrays:
        total += float(np.sum(np.square(a, dtype=np.float64)))
    return float(np.sqrt(total))


def clip_global_norm(arrays: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale all arrays in place so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm."""
    norm = global_norm(arrays)
    if norm > max_norm:
        scale = np.asarray(max_norm / norm, dtype=arrays[0].dtype)
        for a in arrays:
            a *= scale
    return norm


class Adam:
    """Bias-corrected Adam with the standard defaults; updates in place."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: Optional[list[np.ndarray]] = None
        self.v: Optional[list[np.ndarray]] = None

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.step_count
        corr2 = 1.0 - b2 ** self.step_count
        for p, grad, m, v in zip(params, grads, self.m, self.v):
            if p.shape != grad.shape:
                raise ValueError(f"gradient shape {grad.shape} != param shape {p.shape}")
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * np.square(grad)
            p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        """Moment accumulators in parameter order (for checkpointing)."""
        if self.m is None:
            return []
        return list(self.m) + list(self.v)

    def restore(self, step_count: int, moments: Sequence[np.ndarray]) -> None:
        if len(moments) % 2 != 0:
            raise ValueError("moment list must hold m then v, same length")
        half = len(moments) // 2
        self.step_count = step_count
        self.m = [np.array(a, copy=True) for a in moments[:half]]
        self.v = [np.array(a, copy=True) for a in moments[half:]]
