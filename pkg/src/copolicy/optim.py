"""Parameter store, Adam with decoupled weight decay, and checkpoint files.

Checkpoint layout: magic "CODP", format version, a JSON config blob, then
one record per parameter (name, decay flag, dims, raw little-endian float64
payload). Loading reproduces forward outputs bit-identically.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .tensor import Tensor

CHECKPOINT_MAGIC = b"CODP"
CHECKPOINT_VERSION = 1


class MissingGradError(RuntimeError):
    pass


class ParamStore:
    """Ordered name -> parameter map with Adam moment buffers and an
    optional exponential moving average of the weights for inference."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.decay: dict[str, bool] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._ema: dict[str, np.ndarray] | None = None
        self.step_count = 0

    def add(self, name: str, data: np.ndarray, decay: bool = True) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.decay[name] = decay
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def names(self) -> list[str]:
        return list(self.params.keys())

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def zero_grads(self) -> None:
        """Reset all grads to zero buffers so unused parameters read as zero."""
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)

    def grad_norm(self) -> float:
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float((p.grad * p.grad).sum())
        return total**0.5

    def clip_grad_norm(self, max_norm: float) -> float:
        norm = self.grad_norm()
        if norm > max_norm:
            scale = max_norm / norm
            for p in self.params.values():
                if p.grad is not None:
                    p.grad *= scale
        return norm

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8, weight_decay: float = 0.0) -> None:
        """One Adam update with bias correction; weight decay is decoupled
        and applied only to parameters flagged decay=True."""
        for name, p in self.params.items():
            if p.grad is None:
                raise MissingGradError(f"parameter {name!r} has no gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for name, p in self.params.items():
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + eps)
            if weight_decay != 0.0 and self.decay[name]:
                update = update + weight_decay * p.data
            p.data -= lr * update

    def ema_update(self, decay: float) -> None:
        """Fold the current weights into the shadow average."""
        if self._ema is None:
            self._ema = {n: p.data.copy() for n, p in self.params.items()}
            return
        for name, p in self.params.items():
            ema = self._ema[name]
            ema *= decay
            ema += (1.0 - decay) * p.data

    def ema_snapshot(self) -> "ParamStore":
        """A store holding the averaged weights (falls back to the raw
        weights when no average has been accumulated)."""
        out = ParamStore()
        src = self._ema if self._ema is not None else {
            n: p.data for n, p in self.params.items()}
        for name, p in self.params.items():
            out.add(name, src[name].copy(), decay=self.decay[name])
        return out


# ---------------------------------------------------------------------------
# checkpoint files
# ---------------------------------------------------------------------------


def save_checkpoint(path, store: ParamStore, config: dict) -> None:
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(store.params)))
        for name, p in store.params.items():
            nb = name.encode("utf-8")
            f.write(struct.pack("<HBB", len(nb), 1 if store.decay[name] else 0, p.data.ndim))
            f.write(nb)
            f.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file (bad magic {magic!r})")
        version, blob_len = struct.unpack("<II", f.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        config = json.loads(f.read(blob_len).decode("utf-8"))
        (n_params,) = struct.unpack("<I", f.read(4))
        store = ParamStore()
        for _ in range(n_params):
            name_len, decay, ndim = struct.unpack("<HBB", f.read(4))
            name = f.read(name_len).decode("utf-8")
            dims = struct.unpack(f"<{ndim}I", f.read(4 * ndim)) if ndim else ()
            data = np.frombuffer(f.read(8 * int(np.prod(dims, dtype=np.int64))),
                                 dtype="<f8").reshape(dims)
            store.add(name, data.copy(), decay=bool(decay))
    return store, config
