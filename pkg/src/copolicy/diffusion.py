"""DDPM operations: forward noising, the per-step reverse update, full and
reduced-step sampling, and the training loss.

The reduced-step sampler walks a strided subset of the diffusion chain
deterministically. Unit jumps reuse the per-step reverse update, so running
it with stride 1 reproduces the zero-noise stochastic chain bit for bit;
longer jumps re-derive the posterior-mean coefficients from alpha_bar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .schedule import NoiseSchedule


@dataclass
class ActionLatent:
    """Joint-action sequence latent at diffusion step k (k=0 means clean)."""

    values: np.ndarray  # (t_pred, 4), normalized to [-1, 1] at k=0
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("diffusion step must be >= 0")


def forward_noise(x0: np.ndarray, k, schedule: NoiseSchedule, eps: np.ndarray) -> np.ndarray:
    """Noise clean data to step k: sqrt(abar_k) x0 + sqrt(1-abar_k) eps.

    `k` may be a scalar or a per-sample integer array broadcast against the
    leading axis of x0.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise ValueError(f"noise shape {eps.shape} != data shape {x0.shape}")
    k = np.asarray(k)
    sa = schedule.sqrt_alpha_bar(k)
    sb = schedule.sqrt_one_minus_alpha_bar(k)
    if k.ndim:  # per-sample steps: align to leading batch axis
        extra = (1,) * (x0.ndim - 1)
        sa = sa.reshape(k.shape + extra)
        sb = sb.reshape(k.shape + extra)
    return sa * x0 + sb * eps


def reverse_step(x_k: np.ndarray, k: int, predicted_noise: np.ndarray,
                 schedule: NoiseSchedule, z: np.ndarray | None = None) -> np.ndarray:
    """One reverse update from step k to k-1. z is the injected standard
    normal; pass None (or anything at k=1, where sigma is zero) for the
    deterministic variant."""
    if not (1 <= k <= schedule.K):
        raise ValueError(f"reverse step k={k} outside [1, {schedule.K}]")
    if predicted_noise.shape != x_k.shape:
        raise ValueError(f"predicted noise shape {predicted_noise.shape} != {x_k.shape}")
    mean = schedule.alpha_coef[k] * (x_k - schedule.gamma[k] * predicted_noise)
    if z is None or schedule.sigma[k] == 0.0:
        return mean
    return mean + schedule.sigma[k] * z


def jump_step(x_k: np.ndarray, k_from: int, k_to: int, predicted_noise: np.ndarray,
              schedule: NoiseSchedule, eta: float = 0.0,
              z: np.ndarray | None = None) -> np.ndarray:
    """Reverse jump k_from -> k_to (k_to < k_from) with coefficients derived
    from alpha_bar; eta scales the injected posterior noise (0 = deterministic)."""
    if k_to == k_from - 1:
        if eta == 0.0:
            return reverse_step(x_k, k_from, predicted_noise, schedule, None)
        if eta == 1.0:
            return reverse_step(x_k, k_from, predicted_noise, schedule, z)
        raise ValueError("unit jumps support eta of 0 or 1 only")
    ab_f = schedule.alpha_bar[k_from]
    ab_t = schedule.alpha_bar[k_to]
    ratio = ab_f / ab_t
    x0_hat = (x_k - np.sqrt(1.0 - ab_f) * predicted_noise) / np.sqrt(ab_f)
    coef0 = np.sqrt(ab_t) * (1.0 - ratio) / (1.0 - ab_f)
    coefk = np.sqrt(ratio) * (1.0 - ab_t) / (1.0 - ab_f)
    out = coef0 * x0_hat + coefk * x_k
    if eta > 0.0 and z is not None:
        sig = eta * np.sqrt((1.0 - ratio) * (1.0 - ab_t) / (1.0 - ab_f))
        out = out + sig * z
    return out


def strided_plan(K: int, n_steps: int) -> list[tuple[int, int]]:
    """Evenly spaced (k_from, k_to) jumps covering K -> 0 in n_steps."""
    if not (1 <= n_steps <= K):
        raise ValueError(f"inference steps must be in [1, {K}], got {n_steps}")
    ks = np.unique(np.round(np.linspace(0, K, n_steps + 1)).astype(int))
    if ks[0] != 0 or ks[-1] != K:
        raise AssertionError("strided plan must span the whole chain")
    ks = ks[::-1]
    return [(int(a), int(b)) for a, b in zip(ks[:-1], ks[1:])]


def sample(predict_noise, shape: tuple[int, ...], schedule: NoiseSchedule,
           n_inference_steps: int, rng: np.random.Generator,
           stochastic: bool | None = None) -> np.ndarray:
    """Draw one latent and denoise it to a clean sample, clipped to [-1, 1].

    predict_noise(x, k) -> array like x. With n_inference_steps == K the
    full stochastic chain runs (unless stochastic=False forces zero noise);
    with fewer steps the deterministic strided chain runs.
    """
    K = schedule.K
    x = rng.standard_normal(shape)
    if stochastic is None:
        stochastic = n_inference_steps == K
    if stochastic and n_inference_steps != K:
        raise ValueError("stochastic sampling requires the full chain")
    if stochastic:
        for k in range(K, 0, -1):
            eps_hat = predict_noise(x, k)
            z = rng.standard_normal(shape) if schedule.sigma[k] > 0.0 else None
            x = reverse_step(x, k, eps_hat, schedule, z)
    else:
        for k_from, k_to in strided_plan(K, n_inference_steps):
            eps_hat = predict_noise(x, k_from)
            x = jump_step(x, k_from, k_to, eps_hat, schedule, eta=0.0)
    return np.clip(x, -1.0, 1.0)


def training_loss(predict_noise_tensor, schedule: NoiseSchedule,
                  x0: np.ndarray, rng: np.random.Generator):
    """Noise-prediction loss over a batch of clean windows.

    Per sample: draw k uniform in {1..K} and fresh standard-normal noise,
    noise the window, and score the model's noise prediction with MSE.
    predict_noise_tensor(noisy, k_array) must return a Tensor (or array)
    shaped like x0. Returns (loss_tensor, k_array).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim < 2 or x0.shape[0] == 0:
        raise ValueError("empty batch")
    batch = x0.shape[0]
    ks = rng.integers(1, schedule.K + 1, size=batch)
    eps = rng.standard_normal(x0.shape)
    x_k = forward_noise(x0, ks, schedule, eps)
    pred = predict_noise_tensor(x_k, ks)
    if not isinstance(pred, T.Tensor):
        pred = T.Tensor(pred)
    if pred.data.shape != x0.shape:
        raise ValueError(f"denoiser output shape {pred.data.shape} != {x0.shape}")
    return T.mse(pred, eps), ks
