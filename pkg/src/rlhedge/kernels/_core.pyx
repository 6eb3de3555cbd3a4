# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: fused residual-net passes and panel recursions.

Matmuls go through BLAS (scipy.linalg.cython_blas.dgemm) exactly like the
numpy backend, so both backends agree to float round-off; the win is fused
elementwise work, no temporaries, and no per-op dispatch.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"


cdef void _xwt(double[:, ::1] x, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    """out (N,M) = x (N,K) @ w(M,K)^T."""
    cdef int m = w.shape[0], n = x.shape[0], k = x.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ct = b'T', cn = b'N'
    dgemm(&ct, &cn, &m, &n, &k, &one, &w[0, 0], &k, &x[0, 0], &k, &zero, &out[0, 0], &m)


cdef void _gtx(double[:, ::1] g, double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    """out (M,K) = g(N,M)^T @ x (N,K)."""
    cdef int m = g.shape[1], n = g.shape[0], k = x.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ct = b'T', cn = b'N'
    dgemm(&cn, &ct, &k, &m, &n, &one, &x[0, 0], &k, &g[0, 0], &m, &zero, &out[0, 0], &k)


cdef void _gw(double[:, ::1] g, double[:, ::1] w, double[:, ::1] out, bint accumulate) noexcept nogil:
    """out (N,K2) = g (N,M) @ w (M,K2), optionally added into out."""
    cdef int m = g.shape[0], k = g.shape[1], k2 = w.shape[1]
    cdef double one = 1.0
    cdef double beta = 1.0 if accumulate else 0.0
    cdef char cn = b'N'
    dgemm(&cn, &cn, &k2, &m, &k, &one, &w[0, 0], &k2, &g[0, 0], &k, &beta, &out[0, 0], &k2)


def resnet_forward(double[:, ::1] x, double[:, ::1] w_in, double[::1] b_in,
                   double[:, :, ::1] w1, double[:, ::1] b1,
                   double[:, :, ::1] w2, double[:, ::1] b2,
                   double[:, ::1] w_out, double[::1] b_out):
    cdef int n = x.shape[0]
    cdef int h = w_in.shape[0]
    cdef int n_blocks = w1.shape[0]
    cdef int o = w_out.shape[0]
    cdef int i, j, k
    hs_arr = [np.empty((n, h)) for _ in range(n_blocks + 1)]
    us_arr = [np.empty((n, h)) for _ in range(n_blocks)]
    y_arr = np.empty((n, o))
    cdef double[:, ::1] ha, hb, u
    cdef double[:, ::1] y = y_arr
    z_arr = np.empty((n, h))
    cdef double[:, ::1] z = z_arr

    ha = hs_arr[0]
    _xwt(x, w_in, ha)
    for i in range(n):
        for j in range(h):
            ha[i, j] += b_in[j]
    for k in range(n_blocks):
        ha = hs_arr[k]
        u = us_arr[k]
        _xwt(ha, w1[k], z)
        for i in range(n):
            for j in range(h):
                z[i, j] += b1[k, j]
        np.tanh(z_arr, out=us_arr[k])  # numpy's SIMD tanh beats scalar libm
        hb = hs_arr[k + 1]
        _xwt(u, w2[k], hb)
        for i in range(n):
            for j in range(h):
                hb[i, j] += ha[i, j] + b2[k, j]
    ha = hs_arr[n_blocks]
    _xwt(ha, w_out, y)
    for i in range(n):
        for j in range(o):
            y[i, j] += b_out[j]
    return y_arr, hs_arr, us_arr


def resnet_backward(double[:, ::1] x, list hs, list us, double[:, ::1] dy,
                    double[:, ::1] w_in, double[:, :, ::1] w1,
                    double[:, :, ::1] w2, double[:, ::1] w_out):
    cdef int n = x.shape[0]
    cdef int h = w_in.shape[0]
    cdef int d = w_in.shape[1]
    cdef int n_blocks = w1.shape[0]
    cdef int o = w_out.shape[0]
    cdef int i, j, k

    d_w_in_arr = np.empty((h, d)); d_b_in_arr = np.zeros(h)
    d_w1_arr = np.empty((n_blocks, h, h)); d_b1_arr = np.zeros((n_blocks, h))
    d_w2_arr = np.empty((n_blocks, h, h)); d_b2_arr = np.zeros((n_blocks, h))
    d_w_out_arr = np.empty((o, h)); d_b_out_arr = np.zeros(o)

    cdef double[:, ::1] d_w_in = d_w_in_arr
    cdef double[::1] d_b_in = d_b_in_arr
    cdef double[:, :, ::1] d_w1 = d_w1_arr
    cdef double[:, ::1] d_b1 = d_b1_arr
    cdef double[:, :, ::1] d_w2 = d_w2_arr
    cdef double[:, ::1] d_b2 = d_b2_arr
    cdef double[:, ::1] d_w_out = d_w_out_arr
    cdef double[::1] d_b_out = d_b_out_arr

    cdef double[:, ::1] g = np.empty((n, h))
    cdef double[:, ::1] gz = np.empty((n, h))
    cdef double[:, ::1] hk, u
    cdef double uij

    hk = hs[n_blocks]
    _gtx(dy, hk, d_w_out)
    for i in range(n):
        for j in range(o):
            d_b_out[j] += dy[i, j]
    _gw(dy, w_out, g, False)

    for k in range(n_blocks - 1, -1, -1):
        u = us[k]
        hk = hs[k]
        _gtx(g, u, d_w2[k])
        for i in range(n):
            for j in range(h):
                d_b2[k, j] += g[i, j]
        _gw(g, w2[k], gz, False)
        for i in range(n):
            for j in range(h):
                uij = u[i, j]
                gz[i, j] *= (1.0 - uij * uij)
        _gtx(gz, hk, d_w1[k])
        for i in range(n):
            for j in range(h):
                d_b1[k, j] += gz[i, j]
        _gw(gz, w1[k], g, True)
    _gtx(g, x, d_w_in)
    for i in range(n):
        for j in range(h):
            d_b_in[j] += g[i, j]
    return (d_w_in_arr, d_b_in_arr, d_w1_arr, d_b1_arr, d_w2_arr, d_b2_arr,
            d_w_out_arr, d_b_out_arr)


def qlbs_backward_panel(double[:, ::1] prices, double[:, ::1] hedges,
                        double r, double dt, double epsilon_tc,
                        double[::1] payoff):
    cdef int n_paths = hedges.shape[0]
    cdef int t_steps = hedges.shape[1]
    cdef double gamma = exp(-r * dt)
    cdef double growth = exp(r * dt)
    cdef int b, t
    cdef double u_next, ds, tc
    pi_arr = np.empty((n_paths, t_steps + 1))
    cdef double[:, ::1] pi = pi_arr
    with nogil:
        for b in range(n_paths):
            pi[b, t_steps] = payoff[b]
            for t in range(t_steps - 1, -1, -1):
                u_next = hedges[b, t + 1] if t + 1 < t_steps else 0.0
                ds = prices[b, t + 1] - growth * prices[b, t]
                tc = epsilon_tc * fabs(u_next - hedges[b, t]) * prices[b, t + 1]
                pi[b, t] = gamma * (pi[b, t + 1] - hedges[b, t] * ds + tc)
    return pi_arr


def rlop_forward_panels(double[:, ::1] prices, double[:, :, ::1] hedges,
                        double[::1] w0, double r, double dt, double epsilon_tc):
    cdef int n_paths = hedges.shape[0]
    cdef int t_mat = hedges.shape[1]
    cdef int t_steps = hedges.shape[2]
    cdef double growth = exp(r * dt)
    cdef int b, m, t
    cdef double u_t, step
    pi_arr = np.empty((n_paths, t_mat, t_steps + 1))
    cdef double[:, :, ::1] pi = pi_arr
    with nogil:
        for b in range(n_paths):
            for m in range(t_mat):
                pi[b, m, 0] = w0[m]
                # live trading for t < i = m + 1
                for t in range(m + 1):
                    u_t = hedges[b, m, t]
                    step = u_t * prices[b, t + 1] + growth * (pi[b, m, t] - u_t * prices[b, t])
                    if t + 1 <= m:  # a further rebalance happens at t + 1
                        step -= epsilon_tc * fabs(hedges[b, m, t + 1] - u_t) * prices[b, t + 1]
                    pi[b, m, t + 1] = step
                for t in range(m + 1, t_steps):  # frozen past maturity
                    pi[b, m, t + 1] = pi[b, m, t]
    return pi_arr
