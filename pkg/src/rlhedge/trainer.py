"""REINFORCE-with-baseline training loop shared by both environments.

Environments expose exogenous batched rollouts:

    env.build_batch(seed_base, n_paths) -> (states (N, d), meta)
    env.evaluate_actions(actions (N,), meta) -> BatchResult

States never depend on actions (the underlying is exogenous), so one policy
forward/backward per batch covers every step.  Path RNG follows the
marketsim convention (seed_base + path_index, seed_base advancing by the
batch size per batch); action-noise streams are seeded [seed, 0xAC, batch].
Environments may carry extra trainable parameters (``extra_params``, e.g.
RLOP's initial-wealth vector) whose ascent gradient arrives pathwise in
``BatchResult.extra_grad``.

All updates are Adam; gradients are clipped at global norm 10 (survives
heavy-tailed payoffs).  Returns are undiscounted sums of environment
rewards.  The value net regresses to returns with squared error at a
(default) 10x faster learning rate, since the baseline must track faster
than the policy moves.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import neuralpolicy as npol
from .errors import NumericError, ParameterError, TrainingFailedError

GRAD_CLIP = 10.0
_ACTION_STREAM = 0xAC
_POLICY_INIT_STREAM = 0x70
_VALUE_INIT_STREAM = 0x71
EVAL_SEED_OFFSET = 10**12  # keeps default evaluation seeds disjoint from training
_MAX_SKIP_FRACTION = 0.10
_CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class TrainConfig:
    episodes_per_batch: int = 256
    n_batches: int = 5000
    lr_policy: float = 1e-4
    lr_value: float = 1e-3
    seed: int = 0
    eval_paths: int = 10_000
    convergence_window: int = 200
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if self.episodes_per_batch < 1 or self.n_batches < 1 or self.eval_paths < 1:
            raise ParameterError("counts must be >= 1")
        if self.lr_policy <= 0.0 or self.lr_value <= 0.0:
            raise ParameterError("learning rates must be > 0")
        if self.convergence_window < 1 or self.convergence_tol <= 0.0:
            raise ParameterError("convergence window/tol must be positive")


@dataclass
class BatchResult:
    """Per-sample returns plus batch-level diagnostics from the environment."""

    returns: np.ndarray
    price: float
    price_se: float
    mean_return: float
    extra_grad: Optional[np.ndarray] = None  # ascent direction for env.extra_params


@dataclass
class TrainReport:
    mean_return: np.ndarray
    baseline_loss: np.ndarray
    price: np.ndarray
    price_se: np.ndarray
    grad_norm_policy: np.ndarray
    grad_norm_value: np.ndarray
    stop_reason: str
    n_skipped: int
    checkpoint_id: str


@dataclass
class Checkpoint:
    policy_spec: npol.NetSpec
    policy_params: np.ndarray
    value_spec: npol.NetSpec
    value_params: np.ndarray
    extra_params: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def checkpoint_id(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.policy_params.tobytes())
        digest.update(self.value_params.tobytes())
        digest.update(self.extra_params.tobytes())
        return digest.hexdigest()[:12]


def save_checkpoint(path, ckpt: Checkpoint):
    np.savez(
        path,
        format_version=_CHECKPOINT_FORMAT,
        policy_input_dim=ckpt.policy_spec.input_dim,
        policy_hidden_width=ckpt.policy_spec.hidden_width,
        policy_n_blocks=ckpt.policy_spec.n_blocks,
        policy_params=ckpt.policy_params,
        value_input_dim=ckpt.value_spec.input_dim,
        value_hidden_width=ckpt.value_spec.hidden_width,
        value_n_blocks=ckpt.value_spec.n_blocks,
        value_params=ckpt.value_params,
        extra_params=ckpt.extra_params,
        meta_json=json.dumps(ckpt.meta, sort_keys=True),
    )


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != _CHECKPOINT_FORMAT:
            raise ParameterError(f"unsupported checkpoint format {version}")
        policy_spec = npol.NetSpec(
            input_dim=int(data["policy_input_dim"]),
            hidden_width=int(data["policy_hidden_width"]),
            n_blocks=int(data["policy_n_blocks"]),
            head=npol.GAUSSIAN_POLICY,
        )
        value_spec = npol.NetSpec(
            input_dim=int(data["value_input_dim"]),
            hidden_width=int(data["value_hidden_width"]),
            n_blocks=int(data["value_n_blocks"]),
            head=npol.SCALAR_VALUE,
        )
        return Checkpoint(
            policy_spec=policy_spec,
            policy_params=np.array(data["policy_params"]),
            value_spec=value_spec,
            value_params=np.array(data["value_params"]),
            extra_params=np.array(data["extra_params"]),
            meta=json.loads(str(data["meta_json"])),
        )


def _clip_global_norm(grad: np.ndarray, max_norm: float = GRAD_CLIP):
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def _policy_gradient(policy_spec, policy_params, states, actions, advantages,
                     mu, sigma, tape, clamp_mask):
    """Ascent gradient of mean(A * log pi(a|s)) w.r.t. policy params."""
    n = states.shape[0]
    _, d_mu, d_log_sigma = npol.gaussian_logpdf_grad(mu, sigma, actions)
    d_out = np.empty((n, 2))
    d_out[:, 0] = advantages * d_mu / n
    d_out[:, 1] = advantages * d_log_sigma * clamp_mask / n
    return npol.backward(policy_spec, policy_params, tape, d_out)


def train(env, policy_spec: npol.NetSpec, value_spec: npol.NetSpec,
          cfg: TrainConfig, meta: dict | None = None,
          log_path=None):
    """Run the REINFORCE loop; returns (TrainReport, Checkpoint).

    Deterministic for a fixed config: rollout seeds, action noise and
    parameter initialization all derive from cfg.seed.
    """
    policy_params = npol.init_params(policy_spec, [cfg.seed, _POLICY_INIT_STREAM])
    value_params = npol.init_params(value_spec, [cfg.seed, _VALUE_INIT_STREAM])
    adam_policy = npol.adam_init(policy_params.size, learning_rate=cfg.lr_policy)
    adam_value = npol.adam_init(value_params.size, learning_rate=cfg.lr_value)
    adam_extra = (npol.adam_init(env.n_extra, learning_rate=cfg.lr_value)
                  if env.n_extra else None)

    hist = {k: [] for k in ("mean_return", "baseline_loss", "price", "price_se",
                            "grad_norm_policy", "grad_norm_value")}
    n_skipped = 0
    stop_reason = "completed"
    log_file = open(log_path, "w") if log_path is not None else None
    window = cfg.convergence_window

    try:
        for b in range(cfg.n_batches):
            seed_base = cfg.seed + b * cfg.episodes_per_batch
            try:
                states, batch_meta = env.build_batch(seed_base, cfg.episodes_per_batch)
                mu, sigma, tape_p, clamp = npol.policy_outputs(
                    policy_spec, policy_params, states)
                noise = np.random.default_rng([cfg.seed, _ACTION_STREAM, b])
                actions = mu + sigma * noise.standard_normal(mu.shape[0])
                result = env.evaluate_actions(actions, batch_meta)

                v_out, tape_v = npol.forward(value_spec, value_params, states)
                v_pred = v_out[:, 0]
                advantages = result.returns - v_pred

                g_policy = _policy_gradient(policy_spec, policy_params, states,
                                            actions, advantages, mu, sigma,
                                            tape_p, clamp)
                n = states.shape[0]
                d_v = (2.0 / n) * (v_pred - result.returns)
                g_value = npol.backward(value_spec, value_params, tape_v,
                                        d_v[:, np.newaxis])

                g_policy, norm_p = _clip_global_norm(-g_policy)
                g_value, norm_v = _clip_global_norm(g_value)
                policy_params, adam_policy = npol.adam_step(adam_policy, policy_params, g_policy)
                value_params, adam_value = npol.adam_step(adam_value, value_params, g_value)
                if adam_extra is not None and result.extra_grad is not None:
                    g_extra, _ = _clip_global_norm(-result.extra_grad)
                    env.extra_params, adam_extra = npol.adam_step(
                        adam_extra, env.extra_params, g_extra)
                baseline_loss = float(np.mean(advantages ** 2))
            except NumericError:
                n_skipped += 1
                if n_skipped > _MAX_SKIP_FRACTION * cfg.n_batches:
                    raise TrainingFailedError(
                        f"{n_skipped} skipped batches out of {b + 1}")
                continue

            hist["mean_return"].append(result.mean_return)
            hist["baseline_loss"].append(baseline_loss)
            hist["price"].append(result.price)
            hist["price_se"].append(result.price_se)
            hist["grad_norm_policy"].append(norm_p)
            hist["grad_norm_value"].append(norm_v)
            if log_file is not None:
                log_file.write(json.dumps({
                    "schema_version": 1, "batch": b,
                    "mean_return": result.mean_return,
                    "baseline_loss": baseline_loss,
                    "price": result.price, "price_se": result.price_se,
                    "grad_norm_policy": norm_p, "grad_norm_value": norm_v,
                }, sort_keys=True) + "\n")

            done = len(hist["mean_return"])
            if done >= 2 * window:
                recent = np.mean(hist["mean_return"][-window:])
                previous = np.mean(hist["mean_return"][-2 * window:-window])
                if abs(recent - previous) < cfg.convergence_tol * (abs(previous) + 1e-12):
                    stop_reason = "converged"
                    break
    finally:
        if log_file is not None:
            log_file.close()

    ckpt = Checkpoint(
        policy_spec=policy_spec, policy_params=policy_params,
        value_spec=value_spec, value_params=value_params,
        extra_params=env.extra_params.copy() if env.n_extra else np.zeros(0),
        meta=dict(meta or {}),
    )
    report = TrainReport(
        mean_return=np.array(hist["mean_return"]),
        baseline_loss=np.array(hist["baseline_loss"]),
        price=np.array(hist["price"]),
        price_se=np.array(hist["price_se"]),
        grad_norm_policy=np.array(hist["grad_norm_policy"]),
        grad_norm_value=np.array(hist["grad_norm_value"]),
        stop_reason=stop_reason,
        n_skipped=n_skipped,
        checkpoint_id=ckpt.checkpoint_id,
    )
    return report, ckpt


def evaluate(env, ckpt: Checkpoint, eval_paths: int, seed: int):
    """Price estimate with standard error under the mean (noise-free) policy."""
    if env.n_extra:
        env.extra_params = ckpt.extra_params.copy()
    states, meta = env.build_batch(seed, eval_paths)
    mu, _, _, _ = npol.policy_outputs(ckpt.policy_spec, ckpt.policy_params, states)
    result = env.evaluate_actions(mu, meta)
    return result.price, result.price_se
