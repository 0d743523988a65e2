"""Dense-network numerical kernel: MLP forward/backward, Adam, gradient
clipping, and checkpoint (de)serialization. float32 parameters throughout."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"QFW1"


class CheckpointError(IOError):
    """Corrupt or mismatched checkpoint file."""


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths, e.g. [192, 256, 256, 5]. ReLU on hidden layers,
    identity on the output layer."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output widths")
        if any(s < 1 for s in sizes):
            raise ValueError("layer widths must be positive")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1


@dataclass
class PolicyWeights:
    spec: MlpSpec
    weights: list[np.ndarray]  # weights[l]: (in, out)
    biases: list[np.ndarray]  # biases[l]: (out,)
    role: str = ""
    step: int = 0

    def copy(self) -> "PolicyWeights":
        return PolicyWeights(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            role=self.role,
            step=self.step,
        )


def init_weights(spec: MlpSpec, rng: np.random.Generator, role: str = "") -> PolicyWeights:
    """He-style uniform fan-in init: W ~ U(+-sqrt(6/fan_in)), b = 0."""
    weights, biases = [], []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return PolicyWeights(spec=spec, weights=weights, biases=biases, role=role)


def forward(params: PolicyWeights, batch: np.ndarray) -> tuple[np.ndarray, list]:
    """Batch-major forward pass. Returns (output, cache); the cache holds the
    post-activation inputs of every layer for the matching backward call."""
    x = np.asarray(batch, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != params.spec.layer_sizes[0]:
        raise ValueError(
            f"batch shape {x.shape} incompatible with input width "
            f"{params.spec.layer_sizes[0]}"
        )
    cache = [x]
    n = params.spec.num_layers
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        x = x @ w + b
        if l < n - 1:
            x = np.maximum(x, 0.0)
        cache.append(x)
    return x, cache


def backward(params: PolicyWeights, cache: list, grad_out: np.ndarray) -> "Gradients":
    """Reverse-mode gradients of forward() w.r.t. every weight and bias."""
    n = params.spec.num_layers
    if len(cache) != n + 1:
        raise ValueError("cache does not match this network's layer count")
    g = np.asarray(grad_out, dtype=np.float32)
    if g.shape != (cache[0].shape[0], params.spec.layer_sizes[-1]):
        raise ValueError(f"upstream gradient shape {g.shape} mismatched")
    d_weights = [None] * n
    d_biases = [None] * n
    for l in range(n - 1, -1, -1):
        if l < n - 1:
            g = g * (cache[l + 1] > 0)  # ReLU mask on hidden activations
        d_weights[l] = cache[l].T @ g
        d_biases[l] = g.sum(axis=0)
        if l > 0:
            g = g @ params.weights[l].T
    return Gradients(d_weights=d_weights, d_biases=d_biases)


@dataclass
class Gradients:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def global_norm(self) -> float:
        total = 0.0
        for g in self.d_weights + self.d_biases:
            total += float(np.sum(np.square(g, dtype=np.float64)))
        return float(np.sqrt(total))

    def scale_inplace(self, factor: float) -> None:
        for g in self.d_weights + self.d_biases:
            g *= np.float32(factor)

    def add_inplace(self, other: "Gradients") -> None:
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.d_weights + self.d_biases)


def clip_grad_norm(grads: Gradients, max_norm: float) -> float:
    """Scale gradients so the global L2 norm is at most max_norm.
    Returns the applied scale in (0, 1]."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = grads.global_norm()
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm
    grads.scale_inplace(scale)
    return scale


@dataclass
class AdamState:
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: PolicyWeights) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in params.weights],
            v_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_biases=[np.zeros_like(b) for b in params.biases],
        )


def adam_step(
    params: PolicyWeights,
    grads: Gradients,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place bias-corrected Adam update."""
    if not grads.is_finite():
        raise FloatingPointError("non-finite gradients; training aborted")
    state.t += 1
    t = state.t
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    groups = (
        (params.weights, grads.d_weights, state.m_weights, state.v_weights),
        (params.biases, grads.d_biases, state.m_biases, state.v_biases),
    )
    for tensors, gs, ms, vs in groups:
        for p, g, m, v in zip(tensors, gs, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * np.square(g)
            m_hat = m / corr1
            v_hat = v / corr2
            p -= np.float32(lr) * m_hat / (np.sqrt(v_hat) + eps)


def save_weights(params: PolicyWeights, path) -> None:
    """QFW1 checkpoint: 4-byte magic, u32-LE manifest length, JSON manifest
    (layer sizes, role, step), then little-endian float32 blobs in layer
    order, each layer's weights before its biases."""
    manifest = json.dumps(
        {
            "layer_sizes": list(params.spec.layer_sizes),
            "role": params.role,
            "step": params.step,
        }
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_weights(path) -> PolicyWeights:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 8:
        raise CheckpointError(f"{path}: truncated header")
    (mlen,) = struct.unpack("<I", blob[4:8])
    try:
        manifest = json.loads(blob[8 : 8 + mlen].decode("utf-8"))
        spec = MlpSpec(tuple(manifest["layer_sizes"]))
        role = manifest.get("role", "")
        step = int(manifest.get("step", 0))
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: bad manifest") from exc
    offset = 8 + mlen
    data = blob[offset:]
    sizes = spec.layer_sizes
    expected = sum(
        (fi * fo + fo) * 4 for fi, fo in zip(sizes[:-1], sizes[1:])
    )
    if len(data) != expected:
        raise CheckpointError(
            f"{path}: payload {len(data)} bytes, manifest implies {expected}"
        )
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        nw = fan_in * fan_out * 4
        weights.append(
            np.frombuffer(data, dtype="<f4", count=fan_in * fan_out, offset=pos)
            .reshape(fan_in, fan_out)
            .copy()
        )
        pos += nw
        biases.append(
            np.frombuffer(data, dtype="<f4", count=fan_out, offset=pos).copy()
        )
        pos += fan_out * 4
    return PolicyWeights(spec=spec, weights=weights, biases=biases, role=role, step=step)
