"""Feedforward cluster-assignment network with hand-written backpropagation.

The network maps each row of a batch to a softmax distribution over
``output_dim`` clusters.  Training is driven by pairwise losses, so the
backward pass starts from a gradient with respect to the *probabilities*
(accumulated over enumerated pairs) rather than from logits.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, PreconditionError, TrainingError

CHECKPOINT_VERSION = 1


class Activation(str, enum.Enum):
    RELU = "relu"
    TANH = "tanh"


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: Activation = Activation.RELU

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"layer dims must be >= 1: {self}")
        if self.output_dim < 2:
            raise ConfigError(f"output_dim (k_out) must be >= 2, got {self.output_dim}")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.output_dim]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "output_dim": self.output_dim,
            "activation": self.activation.value,
        }


@dataclass
class MLPParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """Flat view in (W0, b0, W1, b1, ...) order; arrays are shared, not copied."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def zeros_like(self) -> "MLPParams":
        return MLPParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])


def init_params(spec: LayerSpec, seed: int) -> MLPParams:
    """He-uniform weights (bound sqrt(6 / fan_in)) and zero biases."""
    rng = np.random.default_rng(seed)
    dims = spec.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]  # activations[0] is the input batch
    logits: np.ndarray
    probs: np.ndarray
    activation: Activation = Activation.RELU


def _act(z, kind):
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z, a, kind):
    if kind is Activation.RELU:
        return (z > 0).astype(z.dtype)
    return 1.0 - a * a


def forward(params: MLPParams, batch, activation=Activation.RELU) -> ForwardTrace:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise DimensionError(
            f"batch shape {x.shape} does not match input_dim {params.weights[0].shape[0]}"
        )
    activation = Activation(activation)
    pre, acts = [], [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if i == last:
            logits = z
            break
        pre.append(z)
        h = _act(z, activation)
        acts.append(h)
    return ForwardTrace(x, pre, acts, logits, softmax(logits), activation)


def enumerate_pairs(n_b: int) -> tuple[np.ndarray, np.ndarray]:
    """All unordered in-batch pairs ``i < j`` in row-major order, as index arrays."""
    if n_b < 2:
        raise PreconditionError(f"pair enumeration needs a batch of at least 2, got {n_b}")
    return np.triu_indices(n_b, k=1)


def prob_grad_from_pairs(n_b: int, k: int, pair_grads, pairs) -> np.ndarray:
    """Scatter per-pair ``(grad_p, grad_q)`` into an ``n_b x k`` probability gradient."""
    rows, cols = (np.asarray(a, dtype=np.intp) for a in pairs)
    if len(pair_grads) != rows.size or rows.shape != cols.shape:
        raise DimensionError(f"{len(pair_grads)} pair gradients for {rows.size} pairs")
    G = np.zeros((n_b, k))
    for (i, j), pg in zip(zip(rows, cols), pair_grads):
        gp, gq = (pg.grad_p, pg.grad_q) if hasattr(pg, "grad_p") else pg
        G[i] += gp
        G[j] += gq
    return G


def backward_from_probs(params: MLPParams, trace: ForwardTrace, grad_probs: np.ndarray) -> MLPParams:
    """Backpropagate ``dL/dprobs`` through the softmax and every layer."""
    P = trace.probs
    g = np.asarray(grad_probs, dtype=np.float64)
    if g.shape != P.shape:
        raise DimensionError(f"gradient shape {g.shape} does not match probabilities {P.shape}")
    delta = P * (g - np.sum(P * g, axis=1, keepdims=True))
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        a_in = trace.activations[i]
        gw[i] = a_in.T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            z = trace.pre_activations[i - 1]
            delta = (delta @ params.weights[i].T) * _act_grad(z, a_in, trace.activation)
    return MLPParams(gw, gb)


def backward(params: MLPParams, trace: ForwardTrace, pair_grads, pairs) -> MLPParams:
    n_b, k = trace.probs.shape
    return backward_from_probs(params, trace, prob_grad_from_pairs(n_b, k, pair_grads, pairs))


def predict_clusters(params: MLPParams, data, activation=Activation.RELU, chunk: int = 4096) -> np.ndarray:
    """Argmax cluster per row; ``np.argmax`` picks the lowest index on ties."""
    x = np.asarray(data, dtype=np.float64)
    out = [np.argmax(forward(params, x[s : s + chunk], activation).probs, axis=1) for s in range(0, len(x), chunk)]
    return np.concatenate(out) if out else np.zeros(0, dtype=np.intp)


# --------------------------------------------------------------------------
# optimizers


class OptimizerKind(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    buffers: list[np.ndarray] = field(default_factory=list)
    second: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning rate must be nonnegative, got {self.learning_rate}")


def make_optimizer(kind, params: MLPParams, learning_rate: float, momentum: float = 0.0) -> OptimizerState:
    kind = OptimizerKind(kind)
    state = OptimizerState(kind, learning_rate, momentum=momentum)
    state.buffers = [np.zeros_like(a) for a in params.arrays()]
    if kind is OptimizerKind.ADAM:
        state.second = [np.zeros_like(a) for a in params.arrays()]
    return state


def grad_norm(grads: MLPParams) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays())))


def clip_grads(grads: MLPParams, max_norm: float) -> MLPParams:
    norm = grad_norm(grads)
    if norm <= max_norm or norm == 0:
        return grads
    scale = max_norm / norm
    return MLPParams([w * scale for w in grads.weights], [b * scale for b in grads.biases])


def optimizer_step(params: MLPParams, grads: MLPParams, state: OptimizerState) -> tuple[MLPParams, OptimizerState]:
    """Apply one update in place and return ``(params, state)``."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or any(p.shape != g.shape for p, g in zip(p_arrays, g_arrays)):
        raise DimensionError("gradient shapes do not match parameter shapes")
    if not all(np.all(np.isfinite(g)) for g in g_arrays):
        raise TrainingError("non-finite gradient")
    state.step += 1
    lr = state.learning_rate
    if state.kind is OptimizerKind.SGD:
        for p, g, buf in zip(p_arrays, g_arrays, state.buffers):
            if state.momentum:
                buf *= state.momentum
                buf += g
                p -= lr * buf
            else:
                p -= lr * g
    else:
        b1, b2, t = state.beta1, state.beta2, state.step
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for p, g, m, v in zip(p_arrays, g_arrays, state.buffers, state.second):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def step_decay_lr(base_lr: float, epoch: int, milestones, gamma: float = 0.1) -> float:
    """Learning rate for ``epoch`` (0-based) after multiplying by ``gamma`` at each passed milestone."""
    return base_lr * gamma ** sum(1 for m in milestones if epoch >= m)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, spec: LayerSpec, params: MLPParams, opt: OptimizerState | None, meta: dict | None = None):
    """Write an ``.npz`` holding arrays plus a JSON header with everything else.

    ``meta`` must be JSON-serialisable; the harness stores the run config,
    epoch counter, RNG state and standardisation statistics there.
    """
    arrays = {}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    header = {"version": CHECKPOINT_VERSION, "spec": spec.to_dict(), "meta": meta or {}}
    if opt is not None:
        header["optimizer"] = {
            "kind": opt.kind.value,
            "learning_rate": opt.learning_rate,
            "momentum": opt.momentum,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "step": opt.step,
        }
        for i, buf in enumerate(opt.buffers):
            arrays[f"opt_m{i}"] = buf
        for i, buf in enumerate(opt.second):
            arrays[f"opt_v{i}"] = buf
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[LayerSpec, MLPParams, OptimizerState | None, dict]:
    with open(path, "rb") as fh:
        data = np.load(io.BytesIO(fh.read()), allow_pickle=False)
    header = json.loads(data["header"].tobytes().decode())
    if header.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {header.get('version')}")
    spec = LayerSpec(**header["spec"])
    n_layers = len(spec.dims) - 1
    params = MLPParams([data[f"W{i}"] for i in range(n_layers)], [data[f"b{i}"] for i in range(n_layers)])
    for w, (fi, fo) in zip(params.weights, zip(spec.dims[:-1], spec.dims[1:])):
        if w.shape != (fi, fo):
            raise ConfigError("checkpoint weights do not match stored layer spec")
    opt = None
    if "optimizer" in header:
        o = header["optimizer"]
        opt = OptimizerState(**o)
        n_arrays = 2 * n_layers
        opt.buffers = [data[f"opt_m{i}"] for i in range(n_arrays)]
        if opt.kind is OptimizerKind.ADAM:
            opt.second = [data[f"opt_v{i}"] for i in range(n_arrays)]
    return spec, params, opt, header["meta"]
