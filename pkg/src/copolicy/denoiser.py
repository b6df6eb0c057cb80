"""Transformer-decoder noise predictor over joint-action windows.

Token layout per sample: one diffusion-step token (sinusoidal embedding of
k, linearly projected), then the conditioning tokens (one per past
observation, optionally concatenated with the past partner action before
projection), then the noisy action tokens. Action token i may attend to the
step token, every conditioning token, and action tokens <= i; conditioning
tokens attend within the prefix only. Padded history rows are masked out of
attention entirely.

The partner-conditioned variant ("codp_h") projects [obs, partner action]
per conditioning step; the ablation ("codp") projects the observation
alone, so its outputs are exactly invariant to the partner-action buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .obs import ACTION_DIM, HUMAN_ACTION_DIM, OBS_DIM
from .optim import ParamStore
from .tensor import Tensor

NEG_INF = -np.inf


@dataclass
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    d_ff: int = 512
    dropout: float = 0.1
    t_obs: int = 4
    t_pred: int = 16
    diffusion_steps: int = 100
    condition_on_human: bool = True
    obs_dim: int = OBS_DIM
    action_dim: int = ACTION_DIM
    human_action_dim: int = HUMAN_ACTION_DIM

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for the sinusoidal step embedding")

    @property
    def seq_len(self) -> int:
        return 1 + self.t_obs + self.t_pred

    @property
    def cond_in_dim(self) -> int:
        return self.obs_dim + (self.human_action_dim if self.condition_on_human else 0)

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers, "n_heads": self.n_heads,
            "d_model": self.d_model, "d_ff": self.d_ff, "dropout": self.dropout,
            "t_obs": self.t_obs, "t_pred": self.t_pred,
            "diffusion_steps": self.diffusion_steps,
            "condition_on_human": self.condition_on_human,
            "obs_dim": self.obs_dim, "action_dim": self.action_dim,
            "human_action_dim": self.human_action_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ConditioningWindow:
    """Model inputs for one plan step: normalized observation history and
    partner-action history, most recent entries last. `valid` is False on
    rows that are episode-start padding."""

    obs: np.ndarray     # (t_obs, obs_dim)
    human: np.ndarray   # (t_obs, human_action_dim)
    valid: np.ndarray   # (t_obs,) bool

    def batched(self):
        return self.obs[None], self.human[None], self.valid[None]


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """(..., in) @ (in, out) + (out,), flattened to one GEMM."""
    lead = x.shape[:-1]
    flat = T.reshape(x, (-1, x.shape[-1])) if x.ndim != 2 else x
    out = T.matmul(flat, w) + b
    if x.ndim != 2:
        out = T.reshape(out, (*lead, w.shape[-1]))
    return out


def sinusoidal_embedding(ks: np.ndarray, dim: int) -> np.ndarray:
    """Classic fixed embedding of the diffusion step index: (B, dim)."""
    ks = np.asarray(ks, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = ks[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class Denoiser:
    """The noise-prediction network plus its parameter store."""

    def __init__(self, config: ModelConfig, seed: int = 0,
                 store: ParamStore | None = None):
        self.config = config
        if store is not None:
            self.store = store
        else:
            self.store = ParamStore()
            self._init_params(np.random.default_rng(seed))
        self._base_mask = self._build_base_mask()

    # -- parameters ---------------------------------------------------------

    def _init_params(self, rng) -> None:
        c = self.config
        d = c.d_model
        w = lambda *shape: rng.normal(0.0, 0.02, size=shape)
        add = self.store.add
        add("embed.cond.w", w(c.cond_in_dim, d))
        add("embed.cond.b", np.zeros(d), decay=False)
        add("embed.act.w", w(c.action_dim, d))
        add("embed.act.b", np.zeros(d), decay=False)
        add("embed.step.w", w(d, d))
        add("embed.step.b", np.zeros(d), decay=False)
        add("pos.cond", w(c.t_obs, d))
        add("pos.act", w(c.t_pred, d))
        for i in range(c.n_layers):
            p = f"layer{i}."
            add(p + "ln1.g", np.ones(d), decay=False)
            add(p + "ln1.b", np.zeros(d), decay=False)
            add(p + "attn.qkv.w", w(d, 3 * d))
            add(p + "attn.qkv.b", np.zeros(3 * d), decay=False)
            add(p + "attn.out.w", w(d, d))
            add(p + "attn.out.b", np.zeros(d), decay=False)
            add(p + "ln2.g", np.ones(d), decay=False)
            add(p + "ln2.b", np.zeros(d), decay=False)
            add(p + "mlp.w1", w(d, c.d_ff))
            add(p + "mlp.b1", np.zeros(c.d_ff), decay=False)
            add(p + "mlp.w2", w(c.d_ff, d))
            add(p + "mlp.b2", np.zeros(d), decay=False)
        add("ln_f.g", np.ones(d), decay=False)
        add("ln_f.b", np.zeros(d), decay=False)
        # zero-init head: the untrained model predicts zero noise
        add("head.w", np.zeros((d, c.action_dim)))
        add("head.b", np.zeros(c.action_dim), decay=False)

    # -- attention mask -----------------------------------------------------

    def _build_base_mask(self) -> np.ndarray:
        c = self.config
        s = c.seq_len
        n_prefix = 1 + c.t_obs
        m = np.full((s, s), NEG_INF)
        m[:n_prefix, :n_prefix] = 0.0                    # prefix sees prefix
        m[n_prefix:, :n_prefix] = 0.0                    # actions see prefix
        act = np.arange(c.t_pred)
        rows = n_prefix + act
        for i in act:                                    # causal among actions
            m[rows[i], n_prefix:n_prefix + i + 1] = 0.0
        return m

    def _mask_for(self, valid: np.ndarray) -> np.ndarray:
        """(B, 1, S, S) additive mask; padded conditioning rows are removed
        as attention keys for every query."""
        b = valid.shape[0]
        m = np.broadcast_to(self._base_mask, (b, 1, *self._base_mask.shape)).copy()
        pad = ~valid.astype(bool)
        if pad.any():
            cols = 1 + np.arange(self.config.t_obs)
            for bi in range(b):
                m[bi, 0, :, cols[pad[bi]]] = NEG_INF
        return m

    # -- forward ------------------------------------------------------------

    def forward(self, obs: np.ndarray, human: np.ndarray, valid: np.ndarray,
                noisy: np.ndarray, ks: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        """(B, t_obs, obs_dim) x (B, t_obs, 2) x (B, t_obs) x (B, t_pred, 4)
        x (B,) -> Tensor (B, t_pred, 4)."""
        c = self.config
        p = self.store
        b = obs.shape[0]
        if obs.shape != (b, c.t_obs, c.obs_dim):
            raise T.ShapeError(f"obs shape {obs.shape} != {(b, c.t_obs, c.obs_dim)}")
        if noisy.shape != (b, c.t_pred, c.action_dim):
            raise T.ShapeError(f"noisy action shape {noisy.shape} != {(b, c.t_pred, c.action_dim)}")
        if training and c.dropout > 0.0 and rng is None:
            raise ValueError("training mode with dropout needs an rng")

        if c.condition_on_human:
            cond_in = np.concatenate([obs, human], axis=2)
        else:
            cond_in = obs  # the partner-action buffer never enters the graph
        cond_tok = linear(Tensor(cond_in), p["embed.cond.w"], p["embed.cond.b"])
        cond_tok = cond_tok + p["pos.cond"]

        act_tok = linear(Tensor(noisy), p["embed.act.w"], p["embed.act.b"])
        act_tok = act_tok + p["pos.act"]

        k_emb = Tensor(sinusoidal_embedding(ks, c.d_model))
        k_tok = linear(k_emb, p["embed.step.w"], p["embed.step.b"])
        k_tok = T.reshape(k_tok, (b, 1, c.d_model))

        x = T.concat([k_tok, cond_tok, act_tok], axis=1)
        mask = self._mask_for(valid)

        for i in range(c.n_layers):
            x = x + self._attend(f"layer{i}.", x, mask, training, rng)
            x = x + self._mlp(f"layer{i}.", x, training, rng)

        n_prefix = 1 + c.t_obs
        x = T.slice_axis(x, 1, n_prefix, c.t_pred)
        x = T.layernorm(x, p["ln_f.g"], p["ln_f.b"])
        return linear(x, p["head.w"], p["head.b"])

    def _attend(self, pre: str, x: Tensor, mask: np.ndarray,
                training: bool, rng) -> Tensor:
        c = self.config
        p = self.store
        b, s, d = x.shape
        h, dh = c.n_heads, d // c.n_heads
        xn = T.layernorm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
        qkv = linear(xn, p[pre + "attn.qkv.w"], p[pre + "attn.qkv.b"])
        q = T.transpose(T.reshape(T.slice_axis(qkv, 2, 0, d), (b, s, h, dh)), 1, 2)
        kk = T.transpose(T.reshape(T.slice_axis(qkv, 2, d, d), (b, s, h, dh)), 1, 2)
        v = T.transpose(T.reshape(T.slice_axis(qkv, 2, 2 * d, d), (b, s, h, dh)), 1, 2)
        scores = T.scale(T.matmul(q, T.transpose(kk, 2, 3)), 1.0 / math.sqrt(dh))
        att = T.softmax_lastdim(scores, additive_mask=mask)
        out = T.transpose(T.matmul(att, v), 1, 2)
        out = linear(T.reshape(out, (b, s, d)), p[pre + "attn.out.w"], p[pre + "attn.out.b"])
        return T.dropout(out, c.dropout, rng, training)

    def _mlp(self, pre: str, x: Tensor, training: bool, rng) -> Tensor:
        c = self.config
        p = self.store
        xn = T.layernorm(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
        hmid = T.gelu(linear(xn, p[pre + "mlp.w1"], p[pre + "mlp.b1"]))
        out = linear(hmid, p[pre + "mlp.w2"], p[pre + "mlp.b2"])
        return T.dropout(out, c.dropout, rng, training)

    # -- inference ----------------------------------------------------------

    def predict_noise(self, cond: ConditioningWindow, noisy: np.ndarray, k: int) -> np.ndarray:
        """Single-window inference: (t_pred, 4) noisy actions at step k."""
        obs, human, valid = cond.batched()
        out = self.predict_noise_batch(obs, human, valid, noisy[None],
                                       np.array([k], dtype=np.int64))
        return out[0]

    def predict_noise_batch(self, obs, human, valid, noisy, ks) -> np.ndarray:
        with T.no_grad():
            return self.forward(obs, human, valid, noisy, ks, training=False).data


class BCBaseline:
    """Behavior-cloning comparison head: a feedforward regressor from the
    flattened conditioning window straight to the next joint action."""

    HIDDEN = 256

    def __init__(self, config: ModelConfig, seed: int = 0,
                 store: ParamStore | None = None):
        self.config = config
        in_dim = config.t_obs * (config.obs_dim + config.human_action_dim)
        if store is not None:
            self.store = store
        else:
            rng = np.random.default_rng(seed)
            self.store = ParamStore()
            h = self.HIDDEN
            scale = lambda fan_in: 1.0 / math.sqrt(fan_in)
            self.store.add("fc1.w", rng.normal(0, scale(in_dim), (in_dim, h)))
            self.store.add("fc1.b", np.zeros(h), decay=False)
            self.store.add("fc2.w", rng.normal(0, scale(h), (h, h)))
            self.store.add("fc2.b", np.zeros(h), decay=False)
            self.store.add("out.w", rng.normal(0, scale(h), (h, config.action_dim)))
            self.store.add("out.b", np.zeros(config.action_dim), decay=False)

    def forward(self, obs: np.ndarray, human: np.ndarray) -> Tensor:
        b = obs.shape[0]
        flat = np.concatenate([obs.reshape(b, -1), human.reshape(b, -1)], axis=1)
        p = self.store
        x = T.gelu(linear(Tensor(flat), p["fc1.w"], p["fc1.b"]))
        x = T.gelu(linear(x, p["fc2.w"], p["fc2.b"]))
        return linear(x, p["out.w"], p["out.b"])

    def predict(self, cond: ConditioningWindow) -> np.ndarray:
        """Next joint action, shape (4,), normalized units."""
        with T.no_grad():
            out = self.forward(cond.obs[None], cond.human[None])
        return out.data[0]

    def predict_batch(self, obs: np.ndarray, human: np.ndarray) -> np.ndarray:
        with T.no_grad():
            return self.forward(obs, human).data
