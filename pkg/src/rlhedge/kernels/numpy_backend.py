"""Pure-numpy implementations of the hot kernels.

This is the reference backend: the compiled core must match it to float
round-off.  Shapes follow the residual-net layout in ``neuralpolicy``:

    h0 = X @ Win.T + bin
    for each block k:  u_k = tanh(h_k @ W1_k.T + b1_k)
                       h_{k+1} = h_k + u_k @ W2_k.T + b2_k
    y = h_L @ Wout.T + bout
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def resnet_forward(x, w_in, b_in, w1, b1, w2, b2, w_out, b_out):
    """Forward pass; returns (y, hs, us) where hs/us are the backward tape."""
    n_blocks = w1.shape[0]
    h = x @ w_in.T + b_in
    hs = [h]
    us = []
    for k in range(n_blocks):
        u = np.tanh(h @ w1[k].T + b1[k])
        h = h + u @ w2[k].T + b2[k]
        us.append(u)
        hs.append(h)
    y = h @ w_out.T + b_out
    return y, hs, us


def resnet_backward(x, hs, us, dy, w_in, w1, w2, w_out):
    """Backward pass for parameter gradients given upstream dy.

    Returns (d_w_in, d_b_in, d_w1, d_b1, d_w2, d_b2, d_w_out, d_b_out).
    """
    n_blocks = w1.shape[0]
    d_w_out = dy.T @ hs[-1]
    d_b_out = dy.sum(axis=0)
    g = dy @ w_out
    d_w1 = np.empty_like(w1)
    d_b1 = np.empty_like(w1[:, :, 0])
    d_w2 = np.empty_like(w2)
    d_b2 = np.empty_like(d_b1)
    for k in range(n_blocks - 1, -1, -1):
        u = us[k]
        d_w2[k] = g.T @ u
        d_b2[k] = g.sum(axis=0)
        gz = (g @ w2[k]) * (1.0 - u * u)
        d_w1[k] = gz.T @ hs[k]
        d_b1[k] = gz.sum(axis=0)
        g = g + gz @ w1[k]
    d_w_in = g.T @ x
    d_b_in = g.sum(axis=0)
    return d_w_in, d_b_in, d_w1, d_b1, d_w2, d_b2, d_w_out, d_b_out


def qlbs_backward_panel(prices, hedges, r, dt, epsilon_tc, payoff):
    """Backward self-financing panel.

    prices: (B, T+1), hedges: (B, T), payoff: (B,).  Returns pi (B, T+1) with
    pi[:, T] = payoff pinned and, for t < T,

        pi_t = gamma (pi_{t+1} - u_t (S_{t+1} - e^{r dt} S_t) + TC_{t+1}),
        TC_{t+1} = eps |u_{t+1} - u_t| S_{t+1},  u_T := 0.
    """
    n_paths, t_steps = hedges.shape
    gamma = np.exp(-r * dt)
    growth = np.exp(r * dt)
    pi = np.empty((n_paths, t_steps + 1))
    pi[:, t_steps] = payoff
    for t in range(t_steps - 1, -1, -1):
        u_next = hedges[:, t + 1] if t + 1 < t_steps else np.zeros(n_paths)
        ds = prices[:, t + 1] - growth * prices[:, t]
        tc = epsilon_tc * np.abs(u_next - hedges[:, t]) * prices[:, t + 1]
        pi[:, t] = gamma * (pi[:, t + 1] - hedges[:, t] * ds + tc)
    return pi


def rlop_forward_panels(prices, hedges, w0, r, dt, epsilon_tc):
    """Stacked forward self-financing panels for maturities i = 1..T.

    prices: (B, T+1); hedges: (B, T, T) with hedges[b, i-1, t] the position
    u_t^{(i)} (entries with t >= i are ignored); w0: (T,) initial wealth per
    maturity.  Returns pi (B, T, T+1) with pi[b, i-1, t] for t <= i and the
    value frozen beyond maturity.  Costs are charged on rebalances strictly
    inside (0, i); there is no initial-trade or terminal-unwind charge.
    """
    n_paths, t_mat, t_steps = hedges.shape
    growth = np.exp(r * dt)
    pi = np.empty((n_paths, t_mat, t_steps + 1))
    pi[:, :, 0] = w0[np.newaxis, :]
    for t in range(t_steps):
        live = slice(t, t_mat)  # maturities i with i - 1 >= t, i.e. i > t
        u_t = hedges[:, live, t]
        s_t = prices[:, t, np.newaxis]
        s_next = prices[:, t + 1, np.newaxis]
        step = u_t * s_next + growth * (pi[:, live, t] - u_t * s_t)
        if t + 1 < t_steps:
            reb = slice(t + 1, t_mat)  # rows with a further trade at t+1
            u_next = hedges[:, reb, t + 1]
            step[:, 1:] -= epsilon_tc * np.abs(u_next - hedges[:, reb, t]) * s_next
        pi[:, live, t + 1] = step
        if t > 0:
            pi[:, :t, t + 1] = pi[:, :t, t]  # frozen past maturity
    return pi
