"""Small fully connected networks with hand-written backpropagation.

The actor and critic are tiny (two hidden layers of width 128 by default)
and are trained on CPU one mini-batch at a time, so plain numpy is fast
enough.  Networks default to float64, which keeps gradients checkable by
finite differences; float32 roughly halves the training cost.
"""
from __future__ import annotations

import numpy as np

__all__ = ["MLP", "Adam", "soft_update"]


def _act(name):
    if name == "tanh":
        return np.tanh, lambda y: 1.0 - y * y
    if name == "relu":
        return (lambda x: np.maximum(x, 0.0)), (lambda y: (y > 0).astype(y.dtype))
    raise ValueError(f"unknown activation {name!r}")


class MLP:
    """Dense network with identical hidden activations and a linear output.

    ``params`` is the list ``[W0, b0, W1, b1, ...]`` with ``W_k`` of shape
    ``(fan_in, fan_out)``; all of them are views into the vector ``flat``.
    """

    def __init__(self, sizes, rng: np.random.Generator, activation: str = "tanh",
                 final_scale: float = 1e-3, dtype=np.float64):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = [int(s) for s in sizes]
        self.activation = activation
        self._f, self._df = _act(activation)
        shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            shapes += [(a, b), (b,)]
        self._bind(np.zeros(sum(int(np.prod(sh)) for sh in shapes), dtype=dtype), shapes)
        n_layers = len(self.sizes) - 1
        for k, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(a)
            if k == n_layers - 1:
                bound = final_scale
            self.params[2 * k][...] = rng.uniform(-bound, bound, size=(a, b))
            if k < n_layers - 1:
                self.params[2 * k + 1][...] = rng.uniform(-bound, bound, size=b)

    def _bind(self, flat, shapes):
        """Point ``params`` at consecutive slices of one contiguous buffer."""
        self.flat = flat
        self.params = []
        i = 0
        for sh in shapes:
            n = int(np.prod(sh))
            self.params.append(flat[i:i + n].reshape(sh))
            i += n

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x):
        """Return output and the activations needed by :meth:`backward`."""
        x = np.asarray(x, dtype=self.flat.dtype)
        acts = [x]
        h = x
        for k in range(self.n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            h = self._f(z) if k < self.n_layers - 1 else z
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, acts, dout, param_grads: bool = True, input_grad: bool = True):
        """Gradients of ``sum(dout * output)`` w.r.t. the flat parameters and the input.

        Either part can be skipped; a skipped part is returned as ``None``.
        """
        grad = np.empty_like(self.flat) if param_grads else None
        views = self._views(grad) if param_grads else None
        delta = np.asarray(dout, dtype=self.flat.dtype)
        for k in reversed(range(self.n_layers)):
            if param_grads:
                np.matmul(acts[k].T, delta, out=views[2 * k])
                np.sum(delta, axis=0, out=views[2 * k + 1])
            if k == 0 and not input_grad:
                return grad, None
            delta = delta @ self.params[2 * k].T
            if k > 0:
                delta *= self._df(acts[k])
        return grad, delta

    def _views(self, flat):
        out, i = [], 0
        for p in self.params:
            out.append(flat[i:i + p.size].reshape(p.shape))
            i += p.size
        return out

    def unflatten(self, flat):
        """Split a flat vector into arrays shaped like ``params``."""
        return self._views(np.asarray(flat))

    def copy(self) -> "MLP":
        out = MLP.__new__(MLP)
        out.sizes = list(self.sizes)
        out.activation = self.activation
        out._f, out._df = self._f, self._df
        out._bind(self.flat.copy(), [p.shape for p in self.params])
        return out

    def get_flat(self) -> np.ndarray:
        return self.flat.copy()

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=self.flat.dtype)
        if flat.shape != self.flat.shape:
            raise ValueError(f"expected {self.flat.size} parameters, got {flat.size}")
        self.flat[...] = flat


class Adam:
    """Adam descent on a flat parameter vector, updated in place."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 dtype=np.float64):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size, dtype=dtype)
        self.v = np.zeros(size, dtype=dtype)
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray) -> None:
        if self.lr == 0:
            return
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        buf = np.empty_like(flat)
        self.m *= b1
        np.multiply(grad, 1 - b1, out=buf)
        self.m += buf
        self.v *= b2
        np.multiply(grad, grad, out=buf)
        buf *= 1 - b2
        self.v += buf
        # bias corrections folded into the step size and epsilon
        c1, c2 = 1.0 - b1**self.t, 1.0 - b2**self.t
        np.sqrt(self.v, out=buf)
        buf += self.eps * np.sqrt(c2)
        np.divide(self.m, buf, out=buf)
        buf *= self.lr * np.sqrt(c2) / c1
        flat -= buf

    def load_state(self, t, m, v) -> None:
        self.t = int(t)
        self.m = np.array(m, dtype=self.m.dtype)
        self.v = np.array(v, dtype=self.v.dtype)


def soft_update(online, target, tau_soft: float) -> None:
    """``target <- tau * online + (1 - tau) * target`` for matching arrays, in place."""
    if not 0.0 <= tau_soft <= 1.0:
        raise ValueError(f"tau_soft must lie in [0, 1], got {tau_soft}")
    if online.shape != target.shape:
        raise ValueError(f"shape mismatch {online.shape} vs {target.shape}")
    target *= 1.0 - tau_soft
    target += tau_soft * online
