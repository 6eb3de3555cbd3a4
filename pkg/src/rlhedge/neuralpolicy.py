"""Residual feed-forward nets with hand-rolled reverse-mode gradients.

Parameters live in one flat float64 vector with a fixed layout (offsets in
order): W_in (H,d), b_in (H), then per block W1 (H,H), b1 (H), W2 (H,H),
b2 (H), then W_out (O,H), b_out (O).  All matrices are row-major.  The
forward pass records the block activations (the tape); ``backward`` replays
it exactly, so gradients are exact up to float round-off.

Heads: ``gaussian_policy`` emits (mu, log sigma) with log sigma clamped to
[LOGSIGMA_MIN, LOGSIGMA_MAX]; ``scalar_value`` emits one number.

Initialization: weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) drawn in
layout order from one PCG64 stream, biases zero.  The output layer starts
at zero weights so a freshly initialized policy is the zero hedge; the
policy's log-sigma bias starts at LOGSIGMA_INIT to set the exploration
scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError, ParameterError

LOGSIGMA_MIN = -5.0
LOGSIGMA_MAX = 2.0
LOGSIGMA_INIT = -1.0

GAUSSIAN_POLICY = "gaussian_policy"
SCALAR_VALUE = "scalar_value"

_CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_width: int = 32
    n_blocks: int = 3
    head: str = GAUSSIAN_POLICY

    def __post_init__(self):
        if self.hidden_width < 1 or self.n_blocks < 1 or self.input_dim < 1:
            raise ParameterError("input_dim, hidden_width and n_blocks must be >= 1")
        if self.head not in (GAUSSIAN_POLICY, SCALAR_VALUE):
            raise ParameterError(f"unknown head {self.head!r}")

    @property
    def output_dim(self) -> int:
        return 2 if self.head == GAUSSIAN_POLICY else 1


def n_params(spec: NetSpec) -> int:
    h, d, o = spec.hidden_width, spec.input_dim, spec.output_dim
    return h * d + h + spec.n_blocks * (2 * h * h + 2 * h) + o * h + o


def _views(spec: NetSpec, params: np.ndarray):
    """Structured views into the flat vector (no copies)."""
    h, d, o, nb = spec.hidden_width, spec.input_dim, spec.output_dim, spec.n_blocks
    i = 0

    def take(shape):
        nonlocal i
        size = int(np.prod(shape))
        out = params[i:i + size].reshape(shape)
        i += size
        return out

    w_in = take((h, d))
    b_in = take((h,))
    w1 = take((nb, h, h))
    b1 = take((nb, h))
    w2 = take((nb, h, h))
    b2 = take((nb, h))
    w_out = take((o, h))
    b_out = take((o,))
    if i != params.size:
        raise ParameterError(f"param vector has length {params.size}, expected {i}")
    return w_in, b_in, w1, b1, w2, b2, w_out, b_out


def init_params(spec: NetSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    params = np.zeros(n_params(spec))
    w_in, _, w1, _, w2, _, w_out, b_out = _views(spec, params)
    for w in (w_in, *w1, *w2):
        fan_in = w.shape[-1]
        bound = 1.0 / math.sqrt(fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    w_out[...] = 0.0  # zero output layer: initial policy is the zero hedge
    if spec.head == GAUSSIAN_POLICY:
        b_out[1] = LOGSIGMA_INIT
    return params


def forward(spec: NetSpec, params: np.ndarray, x: np.ndarray):
    """Batched forward pass; returns (outputs (N, O), tape)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ParameterError(f"input dim {x.shape[1]} != {spec.input_dim}")
    views = _views(spec, params)
    y, hs, us = kernels.resnet_forward(x, *views)
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite network output")
    return y, (x, hs, us)


def backward(spec: NetSpec, params: np.ndarray, tape, d_out: np.ndarray) -> np.ndarray:
    """Parameter gradient of sum(d_out * outputs); same layout as params."""
    x, hs, us = tape
    w_in, _, w1, _, w2, _, w_out, _ = _views(spec, params)
    grads = kernels.resnet_backward(x, hs, us, np.asarray(d_out, dtype=float),
                                    w_in, w1, w2, w_out)
    flat = np.empty_like(params)
    out_views = _views(spec, flat)
    for view, grad in zip(out_views, grads):
        view[...] = grad
    return flat


def policy_outputs(spec: NetSpec, params: np.ndarray, states: np.ndarray):
    """(mu, sigma, tape, clamp_mask) for a gaussian_policy net."""
    if spec.head != GAUSSIAN_POLICY:
        raise ParameterError("policy_outputs requires a gaussian_policy head")
    y, tape = forward(spec, params, states)
    mu = y[:, 0]
    log_sigma_raw = y[:, 1]
    log_sigma = np.clip(log_sigma_raw, LOGSIGMA_MIN, LOGSIGMA_MAX)
    clamp_mask = (log_sigma_raw > LOGSIGMA_MIN) & (log_sigma_raw < LOGSIGMA_MAX)
    return mu, np.exp(log_sigma), tape, clamp_mask


def gaussian_logpdf_grad(mu, sigma, action):
    """Gaussian log-density and its partials w.r.t. mu and log sigma."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    action = np.asarray(action, dtype=float)
    if np.any(sigma <= 0.0):
        raise ParameterError("sigma must be > 0")
    z = (action - mu) / sigma
    logpdf = -0.5 * math.log(2.0 * math.pi) - np.log(sigma) - 0.5 * z * z
    d_mu = z / sigma
    d_log_sigma = z * z - 1.0
    return logpdf, d_mu, d_log_sigma


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n: int, learning_rate: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(step=0, m=np.zeros(n), v=np.zeros(n),
                     learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape:
        raise ParameterError("gradient/parameter shape mismatch")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(step=step, m=m, v=v, learning_rate=state.learning_rate,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_params, new_state


# ---------------------------------------------------------------------------
# Parameter checkpoints
# ---------------------------------------------------------------------------

def save_params(path, spec: NetSpec, params: np.ndarray, extra: dict | None = None):
    """Write a versioned .npz checkpoint (exact float64 round trip)."""
    payload = {
        "format_version": _CHECKPOINT_FORMAT,
        "input_dim": spec.input_dim,
        "hidden_width": spec.hidden_width,
        "n_blocks": spec.n_blocks,
        "head": spec.head,
        "params": params,
    }
    for key, value in (extra or {}).items():
        payload["x_" + key] = value
    np.savez(path, **payload)


def load_params(path):
    """Read a checkpoint; returns (spec, params, extra dict)."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != _CHECKPOINT_FORMAT:
            raise ParameterError(f"unsupported checkpoint format {version}")
        spec = NetSpec(
            input_dim=int(data["input_dim"]),
            hidden_width=int(data["hidden_width"]),
            n_blocks=int(data["n_blocks"]),
            head=str(data["head"]),
        )
        params = np.array(data["params"])
        extra = {k[2:]: np.array(data[k]) for k in data.files if k.startswith("x_")}
    return spec, params, extra
