from typing import Dict, List, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core import RngStream

Grads = Dict[str, np.ndarray]


def _uniform(rng: RngStream, fan_in: int, shape, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    params: Dict[str, np.ndarray]

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache) -> Tuple[np.ndarray, Grads]:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: RngStream, dtype=np.float64, zero: bool = False):
        weights = np.zeros((n_in, n_out), dtype=dtype) if zero else _uniform(rng, n_in, (n_in, n_out), dtype)
        self.params = {"W": weights, "b": np.zeros(n_out, dtype=dtype)}

    def forward(self, x):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, dy, cache):
        x = cache
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads


class Relu(Layer):
    def __init__(self):
        self.params = {}

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache):
        return dy * cache, {}


class Flatten(Layer):
    def __init__(self):
        self.params = {}

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}


class Conv2D(Layer):
    """Valid, stride-1 convolution over (batch, height, width, channels) inputs."""

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: RngStream, dtype=np.float64):
        fan_in = c_in * kernel * kernel
        self.kernel = kernel
        self.params = {
            "K": _uniform(rng, fan_in, (kernel, kernel, c_in, c_out), dtype),
            "b": np.zeros(c_out, dtype=dtype),
        }

    def forward(self, x):
        windows = sliding_window_view(x, (self.kernel, self.kernel), axis=(1, 2))
        y = np.einsum("bhwcij,ijco->bhwo", windows, self.params["K"], optimize=True) + self.params["b"]
        return y, x

    def backward(self, dy, cache):
        x = cache
        k = self.kernel
        windows = sliding_window_view(x, (k, k), axis=(1, 2))
        grads = {
            "K": np.einsum("bhwcij,bhwo->ijco", windows, dy, optimize=True),
            "b": dy.sum(axis=(0, 1, 2)),
        }
        padded = np.pad(dy, ((0, 0), (k - 1, k - 1), (k - 1, k - 1), (0, 0)))
        dy_windows = sliding_window_view(padded, (k, k), axis=(1, 2))
        flipped = self.params["K"][::-1, ::-1]
        dx = np.einsum("bhwoij,ijco->bhwc", dy_windows, flipped, optimize=True)
        return dx, grads


class Sequential:
    def __init__(self, layers: List[Layer], prefix: str = ""):
        self.layers = layers
        self.prefix = prefix

    @property
    def params(self) -> Dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                out[f"{self.prefix}{i}.{name}"] = value
        return out

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, dy, caches) -> Tuple[np.ndarray, Grads]:
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[i].backward(dy, caches[i])
            for name, value in layer_grads.items():
                grads[f"{self.prefix}{i}.{name}"] = value
        return dy, grads


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LSTMCell:
    def __init__(self, n_in: int, hidden: int, rng: RngStream, dtype=np.float64, prefix: str = "lstm."):
        self.hidden = hidden
        self.prefix = prefix
        self.params = {
            f"{prefix}Wx": _uniform(rng, n_in, (n_in, 4 * hidden), dtype),
            f"{prefix}Wh": _uniform(rng, hidden, (hidden, 4 * hidden), dtype),
            f"{prefix}b": np.zeros(4 * hidden, dtype=dtype),
        }

    def forward(self, x, h, c):
        p = self.prefix
        z = x @ self.params[f"{p}Wx"] + h @ self.params[f"{p}Wh"] + self.params[f"{p}b"]
        H = self.hidden
        i, f, o = _sigmoid(z[:, :H]), _sigmoid(z[:, H:2 * H]), _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_next = f * c + i * g
        tanh_c = np.tanh(c_next)
        h_next = o * tanh_c
        return h_next, c_next, (x, h, c, i, f, o, g, tanh_c)

    def backward(self, dh, dc, cache):
        x, h, c, i, f, o, g, tanh_c = cache
        p = self.prefix
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c * f * (1.0 - f),
                dh * tanh_c * o * (1.0 - o),
                dc * i * (1.0 - g ** 2),
            ],
            axis=1,
        )
        grads = {f"{p}Wx": x.T @ dz, f"{p}Wh": h.T @ dz, f"{p}b": dz.sum(axis=0)}
        dx = dz @ self.params[f"{p}Wx"].T
        dh_prev = dz @ self.params[f"{p}Wh"].T
        return dx, dh_prev, dc * f, grads
