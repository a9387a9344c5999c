from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..core import ConfigError, RngStream
from .layers import Conv2D, Dense, Flatten, Grads, LSTMCell, Relu, Sequential

FP_DTYPES = {32: np.float32, 64: np.float64}


def dtype_for(fp: int):
    if fp not in FP_DTYPES:
        raise ConfigError(f"floating point width {fp} must be 32 or 64", key="learn.fp")
    return FP_DTYPES[fp]


class QFunction:
    params: Dict[str, np.ndarray]
    n_actions: int
    dtype = np.float64

    def q_values(self, x) -> np.ndarray:
        return self.batch_q(np.asarray(x)[None])[0]

    def batch_q(self, X) -> np.ndarray:
        raise NotImplementedError

    def loss_gradients(self, X, actions, targets) -> Tuple[np.ndarray, Grads]:
        """Gradients of the batch-mean semi-gradient loss 0.5 * (target - q(x, a))^2."""
        raise NotImplementedError


def _error_signal(q: np.ndarray, actions, targets) -> np.ndarray:
    batch = q.shape[0]
    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = (q[np.arange(batch), actions] - targets) / batch
    return dq


class LinearQ(QFunction):
    def __init__(self, n_features: int, n_actions: int, dtype=np.float64):
        self.n_actions = n_actions
        self.dtype = dtype
        self.params = {"theta": np.zeros((n_actions, n_features), dtype=dtype)}

    @property
    def theta(self) -> np.ndarray:
        return self.params["theta"]

    def batch_q(self, X):
        return np.asarray(X, dtype=self.dtype) @ self.params["theta"].T

    def loss_gradients(self, X, actions, targets):
        X = np.asarray(X, dtype=self.dtype)
        q = self.batch_q(X)
        dq = _error_signal(q, np.asarray(actions), np.asarray(targets, dtype=self.dtype))
        return q, {"theta": dq.T @ X}


class SequentialQ(QFunction):
    def __init__(self, body: Sequential, n_actions: int, input_shape: Optional[Tuple[int, ...]] = None,
                 dtype=np.float64):
        self.body = body
        self.n_actions = n_actions
        self.input_shape = input_shape
        self.dtype = dtype
        self.params = body.params

    def _shape(self, X):
        X = np.asarray(X, dtype=self.dtype)
        if self.input_shape is not None:
            X = X.reshape((X.shape[0],) + self.input_shape)
        return X

    def batch_q(self, X):
        q, _ = self.body.forward(self._shape(X))
        return q

    def loss_gradients(self, X, actions, targets):
        q, caches = self.body.forward(self._shape(X))
        dq = _error_signal(q, np.asarray(actions), np.asarray(targets, dtype=self.dtype))
        _, grads = self.body.backward(dq, caches)
        return q, grads


def mlp_q(n_features: int, n_actions: int, hidden: int, rng: RngStream, dtype=np.float64) -> SequentialQ:
    body = Sequential([Dense(n_features, hidden, rng, dtype), Relu(), Dense(hidden, n_actions, rng, dtype)])
    return SequentialQ(body, n_actions, dtype=dtype)


def conv_body(map_size: int, channels: int, hidden: int, rng: RngStream, dtype=np.float64):
    k1, k2 = 10, 7
    if map_size - k1 + 1 - k2 + 1 < 1:
        raise ConfigError(f"map of size {map_size} is too small for the convolution stack")
    out = map_size - k1 - k2 + 2
    layers = [
        Conv2D(channels, 32, k1, rng, dtype), Relu(),
        Conv2D(32, hidden, k2, rng, dtype), Relu(),
        Conv2D(hidden, hidden, 1, rng, dtype), Flatten(),
    ]
    return layers, out * out * hidden


def conv_q(map_size: int, channels: int, n_actions: int, hidden: int, rng: RngStream,
           dtype=np.float64) -> SequentialQ:
    layers, flat = conv_body(map_size, channels, hidden, rng, dtype)
    body = Sequential(layers + [Dense(flat, n_actions, rng, dtype)])
    return SequentialQ(body, n_actions, input_shape=(map_size, map_size, channels), dtype=dtype)


def mlp_forward_backward(net: QFunction, x, a: int, target: float) -> Tuple[np.ndarray, Grads]:
    q, grads = net.loss_gradients(np.asarray(x)[None], [a], [target])
    return q[0], grads


def pool_map(x, map_size: int, channels: int, factor: int) -> np.ndarray:
    """Average-pools a flattened (map, map, channels) tensor by factor, edge-padding with zeros."""
    grid = np.asarray(x).reshape(map_size, map_size, channels)
    cells = -(-map_size // factor)
    padded = np.zeros((cells * factor, cells * factor, channels))
    padded[:map_size, :map_size] = grid
    return padded.reshape(cells, factor, cells, factor, channels).mean(axis=(1, 3)).ravel()


@dataclass
class WindowBatch:
    inputs: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    actions: np.ndarray
    next_actions: np.ndarray
    rewards: np.ndarray
    terminals: np.ndarray
    mask: np.ndarray


class RecurrentQ:
    def __init__(self, n_inputs: int, n_actions: int, hidden: int, rng: RngStream, dtype=np.float64,
                 encoder: Optional[Sequential] = None, encoded_dim: Optional[int] = None,
                 input_shape: Optional[Tuple[int, ...]] = None):
        self.n_actions = n_actions
        self.hidden = hidden
        self.dtype = dtype
        self.encoder = encoder
        self.input_shape = input_shape
        width = encoded_dim if encoder is not None else n_inputs
        self.projection = Sequential([Dense(width, hidden, rng, dtype)], prefix="proj.")
        self.cell = LSTMCell(hidden, hidden, rng, dtype)
        self.head = Sequential([Dense(hidden, n_actions, rng, dtype)], prefix="head.")
        self.params: Dict[str, np.ndarray] = {}
        if encoder is not None:
            self.params.update(encoder.params)
        self.params.update(self.projection.params)
        self.params.update(self.cell.params)
        self.params.update(self.head.params)

    def initial_hidden(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.hidden, dtype=self.dtype), np.zeros(self.hidden, dtype=self.dtype)

    def _encode(self, X):
        X = np.asarray(X, dtype=self.dtype)
        lead = X.shape[:-1]
        flat = X.reshape(-1, X.shape[-1])
        caches = None
        if self.encoder is not None:
            shaped = flat.reshape((flat.shape[0],) + self.input_shape) if self.input_shape else flat
            flat, caches = self.encoder.forward(shaped)
        projected, proj_cache = self.projection.forward(flat)
        return projected.reshape(lead + (self.hidden,)), (caches, proj_cache, lead)

    def step(self, x, hidden: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        z, _ = self._encode(np.asarray(x)[None])
        h, c, _ = self.cell.forward(z, hidden[0][None], hidden[1][None])
        q, _ = self.head.forward(h)
        return q[0], (h[0], c[0])

    def window_gradients(self, batch: WindowBatch, gamma: float,
                         targets: Optional[np.ndarray] = None) -> Tuple[float, Grads, np.ndarray]:
        steps = batch.actions.shape[0]
        n_windows = batch.actions.shape[1]
        Z, encode_cache = self._encode(batch.inputs)
        h, c = batch.h0.astype(self.dtype), batch.c0.astype(self.dtype)
        cell_caches, head_caches, qs = [], [], []
        for t in range(steps + 1):
            h, c, cache = self.cell.forward(Z[t], h, c)
            q, head_cache = self.head.forward(h)
            cell_caches.append(cache)
            head_caches.append(head_cache)
            qs.append(q)
        cols = np.arange(n_windows)
        if targets is None:
            targets = np.empty((steps, n_windows))
            for t in range(steps):
                bootstrap = qs[t + 1][cols, batch.next_actions[t]]
                targets[t] = batch.rewards[t] + gamma * (1.0 - batch.terminals[t]) * bootstrap
        loss = 0.0
        grads: Grads = {name: np.zeros_like(value) for name, value in self.params.items()}
        dZ = np.zeros_like(Z)
        dh = np.zeros((n_windows, self.hidden), dtype=self.dtype)
        dc = np.zeros_like(dh)
        for t in range(steps, -1, -1):
            if t < steps:
                q_taken = qs[t][cols, batch.actions[t]]
                error = (q_taken - targets[t]) * batch.mask[t]
                loss += 0.5 * float(np.sum(error ** 2)) / n_windows
                dq = np.zeros_like(qs[t])
                dq[cols, batch.actions[t]] = error / n_windows
                dh_head, head_grads = self.head.backward(dq, head_caches[t])
                dh = dh + dh_head
                for name, value in head_grads.items():
                    grads[name] += value
            dz, dh, dc, cell_grads = self.cell.backward(dh, dc, cell_caches[t])
            dZ[t] = dz
            for name, value in cell_grads.items():
                grads[name] += value
        caches, proj_cache, lead = encode_cache
        d_flat, proj_grads = self.projection.backward(dZ.reshape(-1, self.hidden), proj_cache)
        for name, value in proj_grads.items():
            grads[name] += value
        if self.encoder is not None:
            _, enc_grads = self.encoder.backward(d_flat, caches)
            for name, value in enc_grads.items():
                grads[name] += value
        return loss, grads, targets


def stack_windows(windows: Sequence[Sequence], length: int, dtype=np.float64) -> WindowBatch:
    """Pads variable-length transition windows into time-major arrays with a validity mask."""
    n = len(windows)
    dim = np.asarray(windows[0][0].x).size
    hidden = windows[0][0].hidden[0].size
    inputs = np.zeros((length + 1, n, dim), dtype=dtype)
    actions = np.zeros((length, n), dtype=np.int64)
    next_actions = np.zeros((length, n), dtype=np.int64)
    rewards = np.zeros((length, n))
    terminals = np.zeros((length, n))
    mask = np.zeros((length, n))
    h0 = np.zeros((n, hidden), dtype=dtype)
    c0 = np.zeros((n, hidden), dtype=dtype)
    for b, window in enumerate(windows):
        if len(window) > length:
            raise ConfigError(f"window of {len(window)} steps exceeds truncation {length}",
                              key="learn.truncation")
        h0[b], c0[b] = window[0].hidden
        for t, record in enumerate(window):
            inputs[t, b] = record.x
            actions[t, b] = record.a
            next_actions[t, b] = record.a_next
            rewards[t, b] = record.r
            terminals[t, b] = float(record.terminal)
            mask[t, b] = 1.0
        inputs[len(window), b] = window[-1].x_next
    return WindowBatch(inputs, h0, c0, actions, next_actions, rewards, terminals, mask)
