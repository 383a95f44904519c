"""Hot inner-loop kernels, written once and shared by both backends.

Every function here is plain numpy that numba can compile in nopython
mode: explicit time loops, no Python objects, no cross-function calls.
``kernels`` imports these either as-is (numpy backend) or wrapped in
``numba.njit`` (default). Keep the bodies allocation-light and the
operand arrays C-contiguous; ``np.dot`` requires it under numba.
"""

import math

import numpy as np


def gru_forward(gx, h0, u_z, u_r, u_h):
    """Unidirectional GRU unroll.

    gx is the precomputed input projection x @ [W_z|W_r|W_h] + bias,
    shape (T, B, 3H). Gate layout along the last axis: update, reset,
    candidate. Returns hidden states plus the gate activations needed
    by the backward pass.
    """
    T, B, H3 = gx.shape
    H = H3 // 3
    h = np.empty((T, B, H), gx.dtype)
    z = np.empty((T, B, H), gx.dtype)
    r = np.empty((T, B, H), gx.dtype)
    c = np.empty((T, B, H), gx.dtype)
    one = np.ones(1, gx.dtype)[0]  # typed scalar; keeps float32 math in float32
    h_prev = h0
    for t in range(T):
        g = gx[t]
        zt = one / (one + np.exp(-(g[:, :H] + np.dot(h_prev, u_z))))
        rt = one / (one + np.exp(-(g[:, H : 2 * H] + np.dot(h_prev, u_r))))
        ct = np.tanh(g[:, 2 * H :] + np.dot(rt * h_prev, u_h))
        ht = (one - zt) * h_prev + zt * ct
        z[t] = zt
        r[t] = rt
        c[t] = ct
        h[t] = ht
        h_prev = ht
    return h, z, r, c


def gru_backward(dy, z, r, c, h, h0, u_zt, u_rt, u_ht):
    """Reverse-time pass matching gru_forward.

    dy is the gradient w.r.t. every hidden state output, (T, B, H).
    u_*t are the transposed recurrent matrices (pass contiguous copies).
    Returns the gradient w.r.t. gx (gate pre-activation layout) and h0;
    weight gradients are assembled outside from gx-space quantities.
    """
    T, B, H = dy.shape
    dgx = np.empty((T, B, 3 * H), dy.dtype)
    dh = np.zeros((B, H), dy.dtype)
    one = np.ones(1, dy.dtype)[0]
    for t in range(T - 1, -1, -1):
        if t > 0:
            h_prev = h[t - 1]
        else:
            h_prev = h0
        zt = z[t]
        rt = r[t]
        ct = c[t]
        dht = dh + dy[t]
        dzt = dht * (ct - h_prev)
        dct = dht * zt
        dh_next = dht * (one - zt)
        dclin = dct * (one - ct * ct)
        drh = np.dot(dclin, u_ht)
        drt = drh * h_prev
        dh_next = dh_next + drh * rt
        dzlin = dzt * zt * (one - zt)
        drlin = drt * rt * (one - rt)
        dh_next = dh_next + np.dot(dzlin, u_zt) + np.dot(drlin, u_rt)
        dgx[t, :, :H] = dzlin
        dgx[t, :, H : 2 * H] = drlin
        dgx[t, :, 2 * H :] = dclin
        dh = dh_next
    return dgx, dh


def ctc_alpha_beta(emit, can_skip):
    """Log-space forward/backward lattice over the blank-extended labels.

    emit[t, s] is the log-probability of the extended label at state s
    under frame t. can_skip[s] marks states reachable by the s-2 -> s
    transition. alpha includes the emission at its own frame; beta does
    not (it scores the completion strictly after the frame), so the
    state posterior is exp(alpha + beta - log_total).

    Returns (alpha, beta, log_total).
    """
    T, S = emit.shape
    neg_inf = -np.inf
    alpha = np.full((T, S), neg_inf)
    beta = np.full((T, S), neg_inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        for s in range(S):
            a0 = alpha[t - 1, s]
            a1 = alpha[t - 1, s - 1] if s >= 1 else neg_inf
            a2 = alpha[t - 1, s - 2] if s >= 2 and can_skip[s] else neg_inf
            m = a0
            if a1 > m:
                m = a1
            if a2 > m:
                m = a2
            if m == neg_inf:
                alpha[t, s] = neg_inf
            else:
                acc = math.exp(a0 - m) + math.exp(a1 - m) + math.exp(a2 - m)
                alpha[t, s] = emit[t, s] + m + math.log(acc)
    if S > 1:
        a = alpha[T - 1, S - 1]
        b = alpha[T - 1, S - 2]
        m = a if a > b else b
        if m == neg_inf:
            log_total = neg_inf
        else:
            log_total = m + math.log(math.exp(a - m) + math.exp(b - m))
    else:
        log_total = alpha[T - 1, 0]
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S - 1, -1, -1):
            b0 = beta[t + 1, s] + emit[t + 1, s]
            b1 = beta[t + 1, s + 1] + emit[t + 1, s + 1] if s + 1 < S else neg_inf
            if s + 2 < S and can_skip[s + 2]:
                b2 = beta[t + 1, s + 2] + emit[t + 1, s + 2]
            else:
                b2 = neg_inf
            m = b0
            if b1 > m:
                m = b1
            if b2 > m:
                m = b2
            if m == neg_inf:
                beta[t, s] = neg_inf
            else:
                acc = math.exp(b0 - m) + math.exp(b1 - m) + math.exp(b2 - m)
                beta[t, s] = m + math.log(acc)
    return alpha, beta, log_total
