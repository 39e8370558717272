"""Numerical core tests: scalar-loop oracles, finite differences, Adam."""

import math

import numpy as np
import pytest

from forage import nn

# ------------------------------------------------------------------
# Independent scalar references (plain python loops, no numpy algebra)
# ------------------------------------------------------------------


def scalar_sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_lstm_step(w_x, w_h, b, h_prev, c_prev, x):
    hsz = len(h_prev)
    z = []
    for r in range(4 * hsz):
        s = float(b[r])
        for j in range(len(x)):
            s += float(w_x[r][j]) * float(x[j])
        for j in range(hsz):
            s += float(w_h[r][j]) * float(h_prev[j])
        z.append(s)
    # gate layout: input, forget, output, candidate
    h_new, c_new = [], []
    for k in range(hsz):
        i = scalar_sigmoid(z[k])
        f = scalar_sigmoid(z[hsz + k])
        o = scalar_sigmoid(z[2 * hsz + k])
        g = math.tanh(z[3 * hsz + k])
        c = f * float(c_prev[k]) + i * g
        c_new.append(c)
        h_new.append(o * math.tanh(c))
    return h_new, c_new


def scalar_q(head_w, head_b, h):
    out = []
    for r in range(len(head_b)):
        s = float(head_b[r])
        for j in range(len(h)):
            s += float(head_w[r][j]) * float(h[j])
        out.append(s)
    return out


def scalar_episode_loss(qs, actions, rewards, gamma):
    total = 0.0
    tlen = len(qs)
    for t in range(tlen):
        chosen = float(qs[t][actions[t]])
        if t < tlen - 1:
            y = float(rewards[t]) + gamma * max(float(v) for v in qs[t + 1])
        else:
            y = float(rewards[t])
        total += (chosen - y) ** 2
    return total


def onehot(actions, tlen, batch=None):
    a = np.asarray(actions)
    out = np.zeros(a.shape + (3,), dtype=np.float64)
    np.put_along_axis(out, a[..., None], 1.0, axis=-1)
    return out


# ------------------------------------------------------------------ init


def test_init_shapes_and_ranges():
    rng = np.random.default_rng(0)
    lstm, head = nn.init_params(rng, input_size=30, hidden_size=200)
    assert lstm.w_x.shape == (800, 30)
    assert lstm.w_h.shape == (800, 200)
    assert lstm.b.shape == (800,)
    assert head.w.shape == (3, 200) and head.b.shape == (3,)
    assert np.abs(lstm.w_x).max() <= 1 / np.sqrt(30)
    assert np.abs(lstm.w_h).max() <= 1 / np.sqrt(200)
    # forget-gate bias block is 1, everything else 0
    assert np.all(lstm.b[200:400] == 1.0)
    assert np.all(lstm.b[:200] == 0.0) and np.all(lstm.b[400:] == 0.0)
    assert np.all(head.b == 0.0)


def test_init_rejects_bad_sizes():
    with pytest.raises(ValueError):
        nn.init_params(np.random.default_rng(0), 0, 8)


# ------------------------------------------------------------------ lstm_step


def test_zero_params_give_zero_hidden():
    lstm = nn.LSTMParams(np.zeros((16, 5)), np.zeros((16, 4)), np.zeros(16))
    state = nn.zero_state(4, batch=1, dtype=np.float64)
    new, _ = nn.lstm_step(lstm, state, np.ones((1, 5)))
    assert np.all(new.h == 0.0)


def test_forget_bias_closed_form():
    hsz = 4
    lstm = nn.LSTMParams(np.zeros((16, 5)), np.zeros((16, 4)), np.zeros(16))
    lstm.b[hsz:2 * hsz] = 1.0
    c0 = np.linspace(-1, 1, hsz)[None, :]
    state = nn.LSTMState(h=np.zeros((1, hsz)), c=c0.copy())
    new, _ = nn.lstm_step(lstm, state, np.zeros((1, 5)))
    assert np.allclose(new.c, scalar_sigmoid(1.0) * c0, rtol=1e-12)


def test_lstm_step_matches_scalar_reference():
    rng = np.random.default_rng(42)
    for _ in range(10):
        hsz, d = int(rng.integers(2, 7)), int(rng.integers(2, 8))
        lstm = nn.LSTMParams(
            rng.normal(size=(4 * hsz, d)),
            rng.normal(size=(4 * hsz, hsz)),
            rng.normal(size=4 * hsz),
        )
        h0 = rng.normal(size=(1, hsz))
        c0 = rng.normal(size=(1, hsz))
        x = rng.normal(size=(1, d))
        new, _ = nn.lstm_step(lstm, nn.LSTMState(h0, c0), x)
        h_ref, c_ref = scalar_lstm_step(lstm.w_x, lstm.w_h, lstm.b, h0[0], c0[0], x[0])
        assert np.allclose(new.h[0], h_ref, rtol=1e-12, atol=1e-14)
        assert np.allclose(new.c[0], c_ref, rtol=1e-12, atol=1e-14)


def test_lstm_step_shape_errors():
    lstm = nn.LSTMParams(np.zeros((16, 5)), np.zeros((16, 4)), np.zeros(16))
    with pytest.raises(ValueError):
        nn.lstm_step(lstm, nn.zero_state(4, 1), np.zeros((1, 6)))
    with pytest.raises(ValueError):
        nn.lstm_step(lstm, nn.zero_state(5, 1), np.zeros((1, 5)))
    with pytest.raises(ValueError):
        nn.lstm_step(lstm, nn.zero_state(4, 2), np.zeros((1, 5)))


def test_lstm_step_rejects_non_finite():
    lstm = nn.LSTMParams(np.zeros((16, 5)), np.zeros((16, 4)), np.zeros(16))
    state = nn.LSTMState(h=np.zeros((1, 4)), c=np.full((1, 4), np.nan))
    with pytest.raises(FloatingPointError):
        nn.lstm_step(lstm, state, np.zeros((1, 5)))


# ------------------------------------------------------------------ q head


def test_q_head_bias_only():
    head = nn.LinearParams(np.zeros((3, 4)), np.array([1.0, 2.0, 3.0]))
    q = nn.q_head(head, np.ones((1, 4)))
    assert q[0].tolist() == [1.0, 2.0, 3.0]


def test_q_head_zero_hidden_gives_bias():
    rng = np.random.default_rng(1)
    head = nn.LinearParams(rng.normal(size=(3, 6)), rng.normal(size=3))
    q = nn.q_head(head, np.zeros((1, 6)))
    assert np.array_equal(q[0], head.b)


def test_q_head_matches_scalar_reference():
    rng = np.random.default_rng(2)
    head = nn.LinearParams(rng.normal(size=(3, 8)), rng.normal(size=3))
    h = rng.normal(size=(1, 8))
    assert np.allclose(nn.q_head(head, h)[0], scalar_q(head.w, head.b, h[0]), rtol=1e-12)


def test_q_head_shape_error():
    head = nn.LinearParams(np.zeros((3, 4)), np.zeros(3))
    with pytest.raises(ValueError):
        nn.q_head(head, np.zeros((1, 5)))


# ------------------------------------------------------------------ loss


def test_loss_single_step_hand_case():
    qs = np.array([[0.5, 0.2, 0.1]])
    acts = onehot([0], 1)
    loss = nn.episode_loss(qs, acts, np.array([1.0]), gamma=0.95)
    assert loss == pytest.approx(0.25, abs=1e-12)


def test_loss_fixed_point_is_zero():
    # rewards equal the chosen q and the next-step q is all zero
    qs = np.array([[0.3, 0.0, 0.0], [0.0, 0.0, 0.0]])
    acts = onehot([0, 1], 2)
    rewards = np.array([0.3, 0.0])
    loss = nn.episode_loss(qs, acts, rewards, gamma=0.95)
    assert loss == 0.0


def test_loss_matches_scalar_reference():
    rng = np.random.default_rng(3)
    for _ in range(10):
        tlen = int(rng.integers(1, 6))
        qs = rng.normal(size=(tlen, 3))
        actions = rng.integers(3, size=tlen)
        rewards = rng.normal(size=tlen)
        mine = nn.episode_loss(qs, onehot(actions, tlen), rewards, gamma=0.95)
        ref = scalar_episode_loss(qs, actions, rewards, 0.95)
        assert mine == pytest.approx(ref, rel=1e-12)


def test_loss_terminal_step_ignores_future():
    # a one-step episode's loss depends only on q_0 and r_0
    qs = np.array([[2.0, -1.0, 0.5]])
    acts = onehot([2], 1)
    a = nn.episode_loss(qs, acts, np.array([1.5]), gamma=0.95)
    assert a == pytest.approx((0.5 - 1.5) ** 2, abs=1e-12)


def test_loss_batch_is_sum_of_episodes():
    rng = np.random.default_rng(4)
    tlen, batch = 5, 7
    qs = rng.normal(size=(tlen, batch, 3))
    actions = rng.integers(3, size=(tlen, batch))
    rewards = rng.normal(size=(tlen, batch))
    total, dq = nn.td_loss(qs, onehot(actions, tlen), rewards, 0.95)
    per = [nn.episode_loss(qs[:, b], onehot(actions[:, b], tlen), rewards[:, b], 0.95)
           for b in range(batch)]
    assert total == pytest.approx(sum(per), rel=1e-12)
    assert dq.shape == qs.shape


def test_loss_shape_errors():
    qs = np.zeros((4, 3))
    with pytest.raises(ValueError):
        nn.episode_loss(qs, np.zeros((5, 3)), np.zeros(4), 0.95)
    with pytest.raises(ValueError):
        nn.episode_loss(qs, np.zeros((4, 3)), np.zeros(5), 0.95)


# ------------------------------------------------------------------ finite differences


def test_finite_diff_on_quadratic():
    x = np.array([3.0])
    grads = nn.finite_diff_grad(lambda arrs: float(arrs[0][0] ** 2), [x], step=1e-5)
    assert grads[0][0] == pytest.approx(6.0, abs=1e-8)
    assert x[0] == 3.0  # restored


def test_finite_diff_on_linear_is_exact():
    x = np.array([1.0, -2.0, 0.5])
    w = np.array([2.0, 4.0, -8.0])
    grads = nn.finite_diff_grad(lambda arrs: float(arrs[0] @ w), [x], step=1e-4)
    assert np.allclose(grads[0], w, atol=1e-9)


# ------------------------------------------------------------------ BPTT


def run_forward(lstm, head, xs, actions, rewards, gamma):
    """Forward an episode batch; returns (loss, dq, caches, qs)."""
    tlen, batch = xs.shape[0], xs.shape[1]
    state = nn.zero_state(lstm.hidden_size, batch, dtype=lstm.w_x.dtype)
    caches, qs = [], []
    for t in range(tlen):
        state, cache = nn.lstm_step(lstm, state, xs[t])
        caches.append(cache)
        qs.append(nn.q_head(head, state.h))
    qs = np.stack(qs)
    loss, dq = nn.td_loss(qs, actions, rewards, gamma)
    return loss, dq, caches, qs


def frozen_targets(qs, rewards, gamma):
    """TD targets evaluated once at the base parameters.

    The training gradient is the semi-gradient: no flow through the
    max q_{t+1} term. Its finite-difference oracle therefore perturbs the
    parameters while holding these targets fixed.
    """
    y = rewards.astype(np.float64).copy()
    if qs.shape[0] > 1:
        y[:-1] += gamma * np.max(qs[1:], axis=-1)
    return y


def frozen_target_loss(lstm, head, xs, actions, y):
    state = nn.zero_state(lstm.hidden_size, xs.shape[1], dtype=lstm.w_x.dtype)
    total = 0.0
    for t in range(xs.shape[0]):
        state, _ = nn.lstm_step(lstm, state, xs[t])
        q = nn.q_head(head, state.h)
        delta = np.sum(q * actions[t], axis=-1) - y[t]
        total += float(np.sum(delta * delta))
    return total


def random_episode(rng, hsz, d, tlen, batch=1):
    lstm, head = nn.init_params(rng, d, hsz, dtype=np.float64)
    # break the symmetric init a little so gradients are generic
    lstm.b[:] = rng.normal(scale=0.3, size=lstm.b.shape)
    xs = rng.normal(size=(tlen, batch, d))
    actions = onehot(rng.integers(3, size=(tlen, batch)), tlen)
    rewards = rng.uniform(-1, 1, size=(tlen, batch))
    return lstm, head, xs, actions, rewards


def max_rel_error(got, want):
    err = 0.0
    for a, b in zip(got, want):
        denom = np.maximum(np.abs(a) + np.abs(b), 1e-3)  # guards the FD noise floor
        err = max(err, float(np.max(np.abs(a - b) / denom)))
    return err


def test_zero_loss_episode_gives_zero_gradients():
    rng = np.random.default_rng(5)
    lstm, head, xs, actions, rewards = random_episode(rng, 4, 5, 3)
    loss, dq, caches, _ = run_forward(lstm, head, xs, actions, rewards, 0.95)
    grads = nn.backward(caches, lstm, head, np.zeros_like(dq))
    for a in grads.arrays():
        assert np.all(a == 0.0)


def test_bptt_matches_finite_differences():
    rng = np.random.default_rng(6)
    for trial in range(5):
        hsz = int(rng.integers(2, 6))
        d = int(rng.integers(2, 6))
        tlen = int(rng.integers(2, 7))
        lstm, head, xs, actions, rewards = random_episode(rng, hsz, d, tlen)
        loss, dq, caches, qs = run_forward(lstm, head, xs, actions, rewards, 0.95)
        grads = nn.backward(caches, lstm, head, dq)

        arrays = nn.param_arrays(lstm, head)
        y = frozen_targets(qs, rewards, 0.95)

        def loss_of(_arrays):
            return frozen_target_loss(lstm, head, xs, actions, y)

        fd = nn.finite_diff_grad(loss_of, arrays, step=1e-5)
        assert max_rel_error(grads.arrays(), fd) < 1e-5


def test_duplicated_batch_doubles_gradient():
    rng = np.random.default_rng(7)
    lstm, head, xs, actions, rewards = random_episode(rng, 4, 5, 6)
    loss1, dq1, caches1, _ = run_forward(lstm, head, xs, actions, rewards, 0.95)
    g1 = nn.backward(caches1, lstm, head, dq1)

    xs2 = np.repeat(xs, 2, axis=1)
    actions2 = np.repeat(actions, 2, axis=1)
    rewards2 = np.repeat(rewards, 2, axis=1)
    loss2, dq2, caches2, _ = run_forward(lstm, head, xs2, actions2, rewards2, 0.95)
    g2 = nn.backward(caches2, lstm, head, dq2)

    assert loss2 == pytest.approx(2 * loss1, rel=1e-14)
    # sums over the batch: doubling is exact up to FMA reassociation in the BLAS
    for a, b in zip(g2.arrays(), g1.arrays()):
        assert np.allclose(a, 2 * b, rtol=1e-13, atol=0)


def test_backward_rejects_misaligned_dq():
    rng = np.random.default_rng(8)
    lstm, head, xs, actions, rewards = random_episode(rng, 3, 4, 5)
    _, dq, caches, _ = run_forward(lstm, head, xs, actions, rewards, 0.95)
    with pytest.raises(ValueError):
        nn.backward(caches, lstm, head, dq[:-1])


# ------------------------------------------------------------------ clipping


def test_clip_global_norm():
    a = np.full(4, 3.0)
    b = np.full(9, 4.0)  # joint norm = sqrt(36 + 144) > 10
    pre = nn.clip_global_norm([a, b], 10.0)
    assert pre == pytest.approx(np.sqrt(180))
    assert nn.global_norm([a, b]) <= 10.0 + 1e-6


def test_clip_noop_below_threshold():
    a = np.array([0.3, -0.4])
    before = a.copy()
    nn.clip_global_norm([a], 10.0)
    assert np.array_equal(a, before)


# ------------------------------------------------------------------ Adam


def test_adam_first_step_magnitude():
    p = np.array([0.0])
    adam = nn.Adam()
    adam.step([p], [np.array([1.0])])
    assert p[0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-9)


def test_adam_zero_gradient_is_identity():
    p = np.array([1.5, -2.5])
    adam = nn.Adam()
    adam.step([p], [np.zeros(2)])
    assert p.tolist() == [1.5, -2.5]


def test_adam_two_steps_match_hand_recurrence():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    g = 0.5
    # hand-rolled scalar recurrence
    p_ref, m, v = 1.0, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p_ref -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)

    p = np.array([1.0])
    adam = nn.Adam(lr=lr, beta1=b1, beta2=b2, eps=eps)
    for _ in range(2):
        adam.step([p], [np.array([g])])
    assert p[0] == pytest.approx(p_ref, rel=1e-14)
    assert adam.step_count == 2


def test_adam_restore_round_trip():
    rng = np.random.default_rng(9)
    p1 = rng.normal(size=(4, 3))
    p2 = p1.copy()
    a1, a2 = nn.Adam(), nn.Adam()
    g = [rng.normal(size=(4, 3))]
    a1.step([p1], g)
    a2.step([p2], g)
    a2.restore(a1.step_count, a1.state_arrays())
    g2 = [rng.normal(size=(4, 3))]
    a1.step([p1], g2)
    a2.step([p2], g2)
    assert np.array_equal(p1, p2)


def test_adam_shape_mismatch_raises():
    adam = nn.Adam()
    with pytest.raises(ValueError):
        adam.step([np.zeros(3)], [np.zeros(4)])


# ------------------------------------------------------------------ determinism


def test_updates_are_bit_deterministic():
    def run():
        rng = np.random.default_rng(10)
        lstm, head, xs, actions, rewards = random_episode(rng, 6, 5, 8, batch=3)
        adam = nn.Adam()
        for _ in range(5):
            _, dq, caches, _ = run_forward(lstm, head, xs, actions, rewards, 0.95)
            grads = nn.backward(caches, lstm, head, dq)
            nn.clip_global_norm(grads.arrays(), 10.0)
            adam.step(nn.param_arrays(lstm, head), grads.arrays())
        return nn.param_arrays(lstm, head)

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)
