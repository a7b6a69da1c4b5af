"""Fully-connected gain predictor: forward pass, backprop, Adam, training
loop and model persistence.

Parameters are 32-bit floats.  Hidden layers use ReLU; the output layer is a
logistic sigmoid rescaled to [gain_floor, 1], so every prediction is a valid
gain by construction.  The training objective is mean squared error (same
minimizer as the reported RMSE).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .wiener import gain_floor

MODEL_MAGIC = b"HADM"
MODEL_VERSION = 1


@dataclass
class NetworkTopology:
    input_dim: int
    hidden_layers: int = 3
    hidden_width: int = 2048
    output_dim: int = 48
    gain_floor: float = gain_floor(14.0)

    def validate(self):
        if min(self.input_dim, self.hidden_layers,
               self.hidden_width, self.output_dim) <= 0:
            raise ConfigError("all topology dimensions must be positive")
        if not 0.0 <= self.gain_floor < 1.0:
            raise ConfigError("gain_floor must lie in [0, 1)")
        return self

    def layer_dims(self):
        dims = [self.input_dim] + [self.hidden_width] * self.hidden_layers
        dims.append(self.output_dim)
        return dims


@dataclass
class NetworkParams:
    topology: NetworkTopology
    weights: list  # weights[l]: (out, in) float32
    biases: list   # biases[l]: (out,) float32


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    epochs: int = 10
    batch_size: int = 128
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        return self


def init_params(topo: NetworkTopology, seed=0):
    """He-style uniform init: limit sqrt(6 / fan_in) per layer."""
    topo.validate()
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    dims = topo.layer_dims()
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit,
                                   (fan_out, fan_in)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return NetworkParams(topology=topo, weights=weights, biases=biases)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(p: NetworkParams, x):
    """x: (batch, input_dim) float32. Returns (gains, cache)."""
    acts = [x]
    h = x
    for w, b in zip(p.weights[:-1], p.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    z = h @ p.weights[-1].T + p.biases[-1]
    sig = _sigmoid(z)
    floor = p.topology.gain_floor
    gains = floor + (1.0 - floor) * sig
    return gains, (acts, sig)


def forward(p: NetworkParams, x):
    """Predict gains for a feature vector or a batch of them."""
    x = np.asarray(x, dtype=np.float32)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != p.topology.input_dim:
        raise ConfigError(
            f"input dim {x.shape[1]} does not match model "
            f"({p.topology.input_dim}); check tau and band settings")
    gains, _ = _forward_cached(p, x)
    return gains[0] if single else gains


def rmse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigError("prediction/target shape mismatch")
    if pred.size == 0:
        raise DataError("empty batch")
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def backward(p: NetworkParams, x, target):
    """Gradients of mean squared error over the batch w.r.t. all params.

    Returns (grad_weights, grad_biases) matching the param lists.
    """
    x = np.asarray(x, dtype=np.float32)
    target = np.asarray(target, dtype=np.float32)
    if x.ndim == 1:
        x = x[None, :]
        target = target[None, :]
    gains, (acts, sig) = _forward_cached(p, x)
    floor = p.topology.gain_floor
    n_el = gains.size
    # d MSE / d gains, then through the rescaled sigmoid
    delta = (2.0 / n_el) * (gains - target)
    delta = delta * (1.0 - floor) * sig * (1.0 - sig)
    gw = [None] * len(p.weights)
    gb = [None] * len(p.biases)
    for l in range(len(p.weights) - 1, -1, -1):
        gw[l] = (delta.T @ acts[l]).astype(np.float32)
        gb[l] = delta.sum(axis=0).astype(np.float32)
        if l > 0:
            delta = (delta @ p.weights[l]) * (acts[l] > 0)
    return gw, gb


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0

    @classmethod
    def zeros_like(cls, p: NetworkParams):
        return cls(m_w=[np.zeros_like(w) for w in p.weights],
                   v_w=[np.zeros_like(w) for w in p.weights],
                   m_b=[np.zeros_like(b) for b in p.biases],
                   v_b=[np.zeros_like(b) for b in p.biases])


def adam_step(p: NetworkParams, grads, state: AdamState, cfg: TrainConfig):
    """Standard Adam update with bias correction; updates p and state in
    place and returns them."""
    gw, gb = grads
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for params, grad, m, v in ((p.weights, gw, state.m_w, state.v_w),
                               (p.biases, gb, state.m_b, state.v_b)):
        for i in range(len(params)):
            m[i] *= b1
            m[i] += (1.0 - b1) * grad[i]
            v[i] *= b2
            v[i] += (1.0 - b2) * grad[i] ** 2
            mhat = m[i] / corr1
            vhat = v[i] / corr2
            params[i] -= (cfg.learning_rate * mhat /
                          (np.sqrt(vhat) + cfg.adam_eps)).astype(np.float32)
    return p, state


def train(train_data, cfg: TrainConfig, topo: NetworkTopology, val_data=None,
          log=None):
    """Train on (X, Y) arrays; returns (params, history).

    history is a list of dicts with epoch, train_rmse, val_rmse.  Training
    is single-threaded and deterministic for a fixed rng_seed.
    """
    cfg.validate()
    X, Y = train_data
    X = np.ascontiguousarray(X, dtype=np.float32)
    Y = np.ascontiguousarray(Y, dtype=np.float32)
    if len(X) == 0:
        raise DataError("empty training set")
    if X.shape[1] != topo.input_dim or Y.shape[1] != topo.output_dim:
        raise ConfigError(
            f"dataset dims {X.shape[1]}/{Y.shape[1]} do not match topology "
            f"{topo.input_dim}/{topo.output_dim}")
    p = init_params(topo, seed=cfg.rng_seed)
    state = AdamState.zeros_like(p)
    rng = np.random.default_rng(cfg.rng_seed + 1)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(X))
        sq_sum, n_el = 0.0, 0
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = X[idx], Y[idx]
            pred, _ = _forward_cached(p, xb)
            sq_sum += float(np.sum((pred.astype(np.float64) - yb) ** 2))
            n_el += pred.size
            grads = backward(p, xb, yb)
            adam_step(p, grads, state, cfg)
        train_rmse = float(np.sqrt(sq_sum / n_el))
        if not np.isfinite(train_rmse):
            raise NumericError(
                f"training loss became non-finite at epoch {epoch} "
                f"(lr={cfg.learning_rate}, batch={cfg.batch_size})")
        row = {"epoch": epoch, "train_rmse": train_rmse, "val_rmse": None}
        if val_data is not None:
            row["val_rmse"] = evaluate_rmse(p, val_data)
        history.append(row)
        if log is not None:
            log(row)
    return p, history


def evaluate_rmse(p: NetworkParams, data, batch_size=4096):
    X, Y = data
    sq_sum, n_el = 0.0, 0
    for start in range(0, len(X), batch_size):
        xb = np.asarray(X[start:start + batch_size], dtype=np.float32)
        yb = np.asarray(Y[start:start + batch_size], dtype=np.float64)
        pred, _ = _forward_cached(p, xb)
        sq_sum += float(np.sum((pred.astype(np.float64) - yb) ** 2))
        n_el += pred.size
    if n_el == 0:
        raise DataError("empty evaluation set")
    return float(np.sqrt(sq_sum / n_el))


def save_model(p: NetworkParams, path):
    """Model file: magic, version, topology (u32s), gain floor (f32), then
    per-layer weights (row-major) and biases as little-endian float32."""
    topo = p.topology
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<5I", MODEL_VERSION, topo.input_dim,
                             topo.hidden_layers, topo.hidden_width,
                             topo.output_dim))
        fh.write(struct.pack("<d", topo.gain_floor))
        for w, b in zip(p.weights, p.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    version, in_dim, n_hidden, width, out_dim = struct.unpack_from("<5I", blob, 4)
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    (floor,) = struct.unpack_from("<d", blob, 24)
    topo = NetworkTopology(input_dim=in_dim, hidden_layers=n_hidden,
                           hidden_width=width, output_dim=out_dim,
                           gain_floor=floor).validate()
    dims = topo.layer_dims()
    need = sum(di * do + do for di, do in zip(dims[:-1], dims[1:]))
    body = blob[32:]
    if len(body) != 4 * need:
        raise DataError(f"{path}: truncated model file "
                        f"({len(body)} bytes, expected {4 * need})")
    flat = np.frombuffer(body, dtype="<f4")
    weights, biases, off = [], [], 0
    for di, do in zip(dims[:-1], dims[1:]):
        weights.append(flat[off:off + di * do].reshape(do, di).copy())
        off += di * do
        biases.append(flat[off:off + do].copy())
        off += do
    return NetworkParams(topology=topo, weights=weights, biases=biases)
