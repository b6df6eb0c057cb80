"""Diffusion noise schedules.

Constants are indexed by diffusion step k = 1..K (index 0 is the clean
sample; alpha_bar[0] = 1). Besides the cumulative product used for forward
noising, the per-step sampling constants are stored in the reverse-update
form: x_{k-1} = alpha_coef[k] * (x_k - gamma[k] * eps_hat) + sigma[k] * z.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

BETA_MIN = 1e-8
BETA_MAX = 0.999
COSINE_OFFSET = 0.008


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    K: int
    beta: np.ndarray        # (K+1,), beta[0] unused
    alpha_bar: np.ndarray   # (K+1,), alpha_bar[0] = 1
    alpha_coef: np.ndarray  # (K+1,), 1/sqrt(1 - beta_k)
    gamma: np.ndarray       # (K+1,), beta_k / sqrt(1 - alpha_bar_k)
    sigma: np.ndarray       # (K+1,), posterior std; sigma[1] = 0

    def sqrt_alpha_bar(self, k):
        return np.sqrt(self.alpha_bar[k])

    def sqrt_one_minus_alpha_bar(self, k):
        return np.sqrt(1.0 - self.alpha_bar[k])


def make_schedule(K: int, kind: str = "cosine") -> NoiseSchedule:
    if K < 1:
        raise ValueError(f"need at least one diffusion step, got K={K}")
    if kind == "cosine":
        ks = np.arange(K + 1, dtype=np.float64)
        f = np.cos(((ks / K) + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * math.pi / 2.0) ** 2
        bar = f / f[0]
        beta_core = 1.0 - bar[1:] / bar[:-1]
    elif kind == "linear":
        beta_core = np.linspace(0.05 / K, 15.0 / K, K)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    beta_core = np.clip(beta_core, BETA_MIN, BETA_MAX)

    beta = np.concatenate([[0.0], beta_core])
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - beta_core)])
    alpha_coef = np.concatenate([[1.0], 1.0 / np.sqrt(1.0 - beta_core)])
    gamma = np.concatenate([[0.0], beta_core / np.sqrt(1.0 - alpha_bar[1:])])
    # posterior variance beta_k * (1 - abar_{k-1}) / (1 - abar_k); zero at k=1
    sigma2 = beta_core * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:])
    sigma = np.concatenate([[0.0], np.sqrt(sigma2)])
    sigma[1] = 0.0
    return NoiseSchedule(kind=kind, K=K, beta=beta, alpha_bar=alpha_bar,
                         alpha_coef=alpha_coef, gamma=gamma, sigma=sigma)


def validate_schedule(s: NoiseSchedule) -> None:
    """Monotonicity and endpoint bounds; raises AssertionError on violation."""
    assert s.alpha_bar[0] == 1.0
    assert np.all(np.diff(s.alpha_bar) < 0), "alpha_bar must strictly decrease"
    assert s.alpha_bar[s.K] <= 1e-3, f"alpha_bar[K]={s.alpha_bar[s.K]:.3e} too large"
    if s.K >= 50:
        assert s.alpha_bar[1] >= 0.999, f"alpha_bar[1]={s.alpha_bar[1]:.6f} too small"
    for arr in (s.beta[1:], s.alpha_coef[1:], s.gamma[1:], s.sigma[1:]):
        assert np.all(np.isfinite(arr))
        assert np.all(arr >= 0.0)


def dump_schedule_csv(path, s: NoiseSchedule) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", "beta", "alpha_bar", "alpha_coef", "gamma", "sigma"])
        for k in range(1, s.K + 1):
            w.writerow([k, repr(float(s.beta[k])), repr(float(s.alpha_bar[k])),
                        repr(float(s.alpha_coef[k])), repr(float(s.gamma[k])),
                        repr(float(s.sigma[k]))])
