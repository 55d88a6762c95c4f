"""Trainable models over flat parameter vectors.

Three testbeds: a quadratic bowl with a prescribed spectrum (exact
strong-convexity and smoothness constants for bound validation), softmax
regression, and a from-scratch leaky-ReLU MLP with manual backprop. All
expose loss_and_grad(w, X, y) on a flat float64 vector so the federated
loop can treat parameters as opaque arrays.
"""

from __future__ import annotations

import numpy as np


def model_size_bits(n_params: int, bits_per_param: int = 32) -> int:
    """Upload payload for one model copy."""
    return n_params * bits_per_param


class QuadraticModel:
    """F(w) = 0.5 (w - w_opt)^T H (w - w_opt) with SPD curvature H.

    mu and L_smooth are the extreme eigenvalues of H, computed exactly.
    Data arguments are accepted and ignored so the training loop stays
    uniform across models.
    """

    def __init__(self, H: np.ndarray, w_opt: np.ndarray):
        self.H = np.asarray(H, dtype=np.float64)
        self.w_opt = np.asarray(w_opt, dtype=np.float64)
        eig = np.linalg.eigvalsh(self.H)
        if eig[0] <= 0:
            raise ValueError("H must be positive definite")
        self.mu = float(eig[0])
        self.L_smooth = float(eig[-1])
        self.n_params = len(self.w_opt)

    @classmethod
    def with_spectrum(cls, dim: int, mu: float, L: float,
                      rng: np.random.Generator) -> "QuadraticModel":
        """Random rotation of a diagonal spanning [mu, L] exactly."""
        lam = np.linspace(mu, L, dim)
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        H = (Q * lam) @ Q.T
        H = (H + H.T) / 2.0
        return cls(H, w_opt=rng.standard_normal(dim))

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return self.w_opt + rng.standard_normal(self.n_params)

    def loss(self, w, X=None, y=None) -> float:
        d = w - self.w_opt
        return 0.5 * float(d @ self.H @ d)

    def loss_and_grad(self, w, X=None, y=None):
        d = w - self.w_opt
        g = self.H @ d
        return 0.5 * float(d @ g), g


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + 1e-12)))


class SoftmaxRegression:
    """Multinomial logistic regression with optional L2 penalty."""

    def __init__(self, feature_dim: int, num_classes: int, l2: float = 0.0):
        self.d = feature_dim
        self.c = num_classes
        self.l2 = l2
        self.n_params = feature_dim * num_classes + num_classes

    def _unpack(self, w):
        W = w[: self.d * self.c].reshape(self.d, self.c)
        b = w[self.d * self.c:]
        return W, b

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.n_params)

    def loss(self, w, X, y) -> float:
        W, b = self._unpack(w)
        probs = _softmax(X @ W + b)
        return _cross_entropy(probs, y) + 0.5 * self.l2 * float(np.sum(W * W))

    def loss_and_grad(self, w, X, y):
        W, b = self._unpack(w)
        probs = _softmax(X @ W + b)
        delta = probs.copy()
        delta[np.arange(len(y)), y] -= 1.0
        delta /= len(y)
        gW = X.T @ delta + self.l2 * W
        gb = delta.sum(axis=0)
        loss = _cross_entropy(probs, y) + 0.5 * self.l2 * float(np.sum(W * W))
        return loss, np.concatenate([gW.ravel(), gb])

    def predict(self, w, X) -> np.ndarray:
        W, b = self._unpack(w)
        return np.argmax(X @ W + b, axis=1)


class MLP:
    """Fully connected net with LeakyReLU hiddens and softmax output.

    Manual forward/backward on flat parameters; gradients are checked
    against central finite differences in the test suite.
    """

    def __init__(self, feature_dim: int, hidden: tuple[int, ...] = (256, 256),
                 num_classes: int = 10, slope: float = 0.01):
        self.sizes = (feature_dim, *hidden, num_classes)
        self.slope = slope
        self.shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.shapes.append((a, b))
        self.n_params = sum(a * b + b for a, b in self.shapes)

    def _unpack(self, w):
        Ws, bs, off = [], [], 0
        for a, b in self.shapes:
            Ws.append(w[off:off + a * b].reshape(a, b))
            off += a * b
            bs.append(w[off:off + b])
            off += b
        return Ws, bs

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        chunks = []
        for a, b in self.shapes:
            # He-style scale adjusted for the leaky slope
            std = np.sqrt(2.0 / (a * (1.0 + self.slope ** 2)))
            chunks.append(rng.normal(0.0, std, size=a * b))
            chunks.append(np.zeros(b))
        return np.concatenate(chunks)

    def _forward(self, w, X):
        Ws, bs = self._unpack(w)
        acts = [X]
        for W, b in zip(Ws[:-1], bs[:-1]):
            z = acts[-1] @ W + b
            acts.append(np.where(z > 0, z, self.slope * z))
        logits = acts[-1] @ Ws[-1] + bs[-1]
        return Ws, acts, logits

    def loss(self, w, X, y) -> float:
        _, _, logits = self._forward(w, X)
        return _cross_entropy(_softmax(logits), y)

    def loss_and_grad(self, w, X, y):
        Ws, acts, logits = self._forward(w, X)
        probs = _softmax(logits)
        loss = _cross_entropy(probs, y)
        delta = probs.copy()
        delta[np.arange(len(y)), y] -= 1.0
        delta /= len(y)
        gWs = [None] * len(Ws)
        gbs = [None] * len(Ws)
        for layer in range(len(Ws) - 1, -1, -1):
            gWs[layer] = acts[layer].T @ delta
            gbs[layer] = delta.sum(axis=0)
            if layer > 0:
                upstream = delta @ Ws[layer].T
                a = acts[layer]
                delta = upstream * np.where(a > 0, 1.0, self.slope)
        flat = []
        for gW, gb in zip(gWs, gbs):
            flat.append(gW.ravel())
            flat.append(gb)
        return loss, np.concatenate(flat)

    def predict(self, w, X) -> np.ndarray:
        _, _, logits = self._forward(w, X)
        return np.argmax(logits, axis=1)


def build_model(name: str, feature_dim: int, num_classes: int,
                hidden: tuple[int, ...] = (256, 256), slope: float = 0.01,
                l2: float = 0.0):
    """Model factory used by scenario configs."""
    if name == "mlp":
        return MLP(feature_dim, hidden=tuple(hidden), num_classes=num_classes, slope=slope)
    if name == "logistic":
        return SoftmaxRegression(feature_dim, num_classes, l2=l2)
    raise ValueError(f"unknown model {name!r}")
