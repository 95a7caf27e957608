"""Fully-connected regressor with five output heads and analytic gradients.

A shared trunk feeds five linear heads: the predicted location, the three
per-component prior hyperparameters (each K wide), and the component
responsibilities.  Activations enforce the parameter domains: softplus
plus a small floor for nu and beta, softplus plus one for alpha, identity
for the location, row softmax for responsibilities.

The backward pass is hand-written reverse mode for exactly this
architecture family; tests hold it to central finite differences.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from .core import (ALPHA_FLOOR, BETA_FLOOR, NU_FLOOR, Responsibilities,
                   nll_component_kernel)
from .exceptions import DataError, DimensionError, DomainError, NumericError

CHECKPOINT_FORMAT_VERSION = 1

HEAD_NAMES = ("gamma", "nu", "alpha", "beta", "responsibilities")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: trunk sizes, activation, component count."""

    input_dim: int
    hidden_layers: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    n_components: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        if self.input_dim < 1:
            raise DomainError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden_layers or any(h < 1 for h in self.hidden_layers):
            raise DomainError(f"invalid hidden_layers {self.hidden_layers}")
        if self.activation not in ("relu", "tanh"):
            raise DomainError(f"activation must be relu or tanh, "
                              f"got {self.activation!r}")
        if self.n_components < 1:
            raise DomainError(f"n_components must be >= 1, "
                              f"got {self.n_components}")

    def head_widths(self) -> dict[str, int]:
        k = self.n_components
        return {"gamma": 1, "nu": k, "alpha": k, "beta": k,
                "responsibilities": k}

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim,
                "hidden_layers": list(self.hidden_layers),
                "activation": self.activation,
                "n_components": self.n_components}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(input_dim=d["input_dim"],
                   hidden_layers=tuple(d["hidden_layers"]),
                   activation=d["activation"],
                   n_components=d["n_components"])


@dataclass
class NetworkWeights:
    """Trunk and head parameters.

    ``trunk`` is a list of (W, b) pairs; ``heads`` maps each head name to
    its (W, b) pair.  Array order is fixed by :meth:`arrays`, which is the
    contract both the optimizer and the checkpoint format rely on.
    """

    spec: NetworkSpec
    trunk: list = field(default_factory=list)
    heads: dict = field(default_factory=dict)

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in declared order (trunk first, then heads)."""
        out = []
        for w, b in self.trunk:
            out.extend([w, b])
        for name in HEAD_NAMES:
            w, b = self.heads[name]
            out.extend([w, b])
        return out

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            spec=self.spec,
            trunk=[(w.copy(), b.copy()) for w, b in self.trunk],
            heads={k: (w.copy(), b.copy()) for k, (w, b) in self.heads.items()},
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vec: np.ndarray) -> "NetworkWeights":
        """New weights with the same shapes, values taken from ``vec``."""
        out = self.copy()
        pos = 0
        for a in out.arrays():
            a[...] = vec[pos:pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != vec.size:
            raise DimensionError(
                f"vector length {vec.size} != parameter count {pos}")
        return out

    def check_finite(self):
        for a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise NumericError("network weights contain non-finite entries")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_weights(spec: NetworkSpec, seed: int) -> NetworkWeights:
    """Glorot-uniform initialization with zero biases, reproducible by seed."""
    rng = np.random.default_rng(seed)
    trunk = []
    fan_in = spec.input_dim
    for width in spec.hidden_layers:
        trunk.append((_glorot(rng, fan_in, width), np.zeros(width)))
        fan_in = width
    heads = {}
    for name, width in spec.head_widths().items():
        heads[name] = (_glorot(rng, fan_in, width), np.zeros(width))
    return NetworkWeights(spec=spec, trunk=trunk, heads=heads)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def _softplus(x):
    # overflow-safe: log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _softmax(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _trunk_forward(w: NetworkWeights, x: np.ndarray):
    act = np.tanh if w.spec.activation == "tanh" else lambda z: np.maximum(z, 0.0)
    pre, post = [], [x]
    h = x
    for wt, b in w.trunk:
        z = h @ wt + b
        pre.append(z)
        h = act(z)
        post.append(h)
    return pre, post


class ForwardCache:
    """Intermediate values retained for the backward pass."""

    __slots__ = ("x", "pre", "post", "raw", "gamma", "nu", "alpha", "beta", "p")

    def __init__(self, x, pre, post, raw, gamma, nu, alpha, beta, p):
        self.x = x
        self.pre = pre
        self.post = post
        self.raw = raw
        self.gamma = gamma
        self.nu = nu
        self.alpha = alpha
        self.beta = beta
        self.p = p


def _forward_cached(w: NetworkWeights, x: np.ndarray) -> ForwardCache:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != w.spec.input_dim:
        raise DimensionError(
            f"x must have shape (N, {w.spec.input_dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("input features contain non-finite values")
    pre, post = _trunk_forward(w, x)
    h = post[-1]
    raw = {name: h @ wt + b for name, (wt, b) in w.heads.items()}
    gamma = raw["gamma"][:, 0]
    nu = _softplus(raw["nu"]) + NU_FLOOR
    alpha = _softplus(raw["alpha"]) + ALPHA_FLOOR
    beta = _softplus(raw["beta"]) + BETA_FLOOR
    p = _softmax(raw["responsibilities"])
    return ForwardCache(x, pre, post, raw, gamma, nu, alpha, beta, p)


def forward(w: NetworkWeights, x) -> tuple:
    """Evaluate the network on a batch.

    Returns
    -------
    (gamma, nu, alpha, beta, p)
        ``gamma`` has shape (N,); ``nu``, ``alpha``, ``beta`` have shape
        (N, K) and satisfy the evidential domain constraints by
        construction; ``p`` is a validated :class:`Responsibilities`.
    """
    c = _forward_cached(w, x)
    return c.gamma, c.nu, c.alpha, c.beta, Responsibilities(c.p)


# ---------------------------------------------------------------------------
# Loss and analytic gradient
# ---------------------------------------------------------------------------

def _check_head_finite(cache: ForwardCache):
    for name, value in (("gamma", cache.gamma), ("nu", cache.nu),
                        ("alpha", cache.alpha), ("beta", cache.beta),
                        ("responsibilities", cache.p)):
        if not np.all(np.isfinite(value)):
            raise NumericError(f"non-finite values in the {name} head output")


def loss_and_grad(w: NetworkWeights, x, y, lam: float,
                  freeze_responsibilities: bool = False,
                  loss_bias: float = 0.0):
    """Training loss and its exact gradient with respect to all weights.

    The loss is the responsibility-weighted per-component negative log
    marginal plus ``lam`` times the evidence penalty, averaged over the
    batch.  Gradients flow through all five heads; with
    ``freeze_responsibilities`` the responsibility matrix is treated as a
    constant (no gradient reaches its head).

    ``loss_bias`` adds a constant to every per-component loss term.  It
    exists for fault-injection in the verification suite and must stay 0
    in real training.

    Returns
    -------
    (loss, grad) : (float, NetworkWeights)
    """
    y = np.asarray(y, dtype=float)
    cache = _forward_cached(w, x)
    n, k = cache.nu.shape
    if y.shape != (n,):
        raise DimensionError(f"y must have shape ({n},), got {y.shape}")

    gamma, nu, alpha, beta, p = (cache.gamma, cache.nu, cache.alpha,
                                 cache.beta, cache.p)
    resid = y[:, None] - gamma[:, None]
    omega = 2.0 * beta * (1.0 + nu)
    v = resid ** 2 * nu + omega

    nll = nll_component_kernel(y[:, None], gamma[:, None], nu, alpha, beta)
    nll = nll + loss_bias
    pen = np.abs(resid) * (2.0 * nu + alpha)
    loss = float(np.mean(np.sum(p * (nll + lam * pen), axis=1)))
    if not np.isfinite(loss):
        _check_head_finite(cache)
        raise NumericError("loss is non-finite despite finite head outputs")

    # d(loss)/d(term) for each per-sample, per-component term
    dnll = p / n
    dpen = lam * p / n

    # partials of the expanded NLL
    d_gamma_terms = dnll * (alpha + 0.5) * (-2.0 * resid * nu) / v
    d_nu = dnll * (-0.5 / nu - alpha * (2.0 * beta) / omega
                   + (alpha + 0.5) * (resid ** 2 + 2.0 * beta) / v)
    d_alpha = dnll * (np.log(v) - np.log(omega)
                      + digamma(alpha) - digamma(alpha + 0.5))
    d_beta = dnll * 2.0 * (1.0 + nu) * (-alpha / omega + (alpha + 0.5) / v)

    # partials of the penalty (subgradient 0 exactly at y == gamma)
    sgn = np.sign(resid)
    d_gamma_terms = d_gamma_terms + dpen * (-sgn) * (2.0 * nu + alpha)
    d_nu = d_nu + dpen * 2.0 * np.abs(resid)
    d_alpha = d_alpha + dpen * np.abs(resid)

    d_gamma = d_gamma_terms.sum(axis=1)

    # gradient reaching the responsibility head (softmax backward)
    if freeze_responsibilities:
        d_raw_p = np.zeros_like(p)
    else:
        dp = (nll + lam * pen) / n
        d_raw_p = p * (dp - np.sum(dp * p, axis=1, keepdims=True))

    # activation backward: softplus' = sigmoid(raw)
    d_raw = {
        "gamma": d_gamma[:, None],
        "nu": d_nu * _sigmoid(cache.raw["nu"]),
        "alpha": d_alpha * _sigmoid(cache.raw["alpha"]),
        "beta": d_beta * _sigmoid(cache.raw["beta"]),
        "responsibilities": d_raw_p,
    }

    grad = NetworkWeights(spec=w.spec, trunk=[], heads={})
    h = cache.post[-1]
    dh = np.zeros_like(h)
    for name in HEAD_NAMES:
        wt, _ = w.heads[name]
        g = d_raw[name]
        grad.heads[name] = (h.T @ g, g.sum(axis=0))
        dh += g @ wt.T

    # trunk backward
    grads_trunk = [None] * len(w.trunk)
    for i in range(len(w.trunk) - 1, -1, -1):
        z = cache.pre[i]
        if w.spec.activation == "tanh":
            dz = dh * (1.0 - np.tanh(z) ** 2)
        else:
            dz = dh * (z > 0)
        grads_trunk[i] = (cache.post[i].T @ dz, dz.sum(axis=0))
        wt, _ = w.trunk[i]
        dh = dz @ wt.T
    grad.trunk = grads_trunk
    return loss, grad


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

def save_checkpoint(path, weights: NetworkWeights, extra: dict | None = None):
    """Write spec, parameter arrays (in declared order) and optional metadata.

    The container is a single ``.npz`` with a JSON header entry; float64
    arrays round-trip losslessly.
    """
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "spec": weights.spec.to_dict(),
        "extra": extra or {},
    }
    arrays = {f"arr_{i:03d}": a for i, a in enumerate(weights.arrays())}
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[NetworkWeights, dict]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns the weights and the ``extra`` metadata dict.
    """
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise DataError(
                f"unsupported checkpoint format {header.get('format_version')}")
        spec = NetworkSpec.from_dict(header["spec"])
        weights = init_weights(spec, seed=0)
        arrays = weights.arrays()
        for i, a in enumerate(arrays):
            stored = data[f"arr_{i:03d}"]
            if stored.shape != a.shape:
                raise DimensionError(
                    f"checkpoint array {i} has shape {stored.shape}, "
                    f"expected {a.shape}")
            a[...] = stored
    return weights, header["extra"]
