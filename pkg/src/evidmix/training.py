"""Alternating expectation/maximization training driven by gradient steps.

Each minibatch step is one EM round: the forward pass evaluates the
responsibility head (expectation) together with the prior-hyperparameter
heads, and a single adaptive gradient step on the combined loss updates
every weight (maximization).  Early stopping watches the validation loss;
the returned weights are the best seen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import core
from .data import TRAIN, VAL, RegressionDataset
from .exceptions import DivergenceError, DomainError
from .network import NetworkSpec, NetworkWeights, forward, init_weights, loss_and_grad


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    ``lam`` weighs the evidence penalty against the NLL term.  With
    ``freeze_responsibilities`` the responsibility head receives no
    gradient, which reproduces classic per-step maximization with the
    component assignment held fixed.
    """

    n_components: int = 1
    lam: float = 0.01
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    freeze_responsibilities: bool = False

    def __post_init__(self):
        if self.n_components < 1:
            raise DomainError(f"n_components must be >= 1, "
                              f"got {self.n_components}")
        if self.lam < 0:
            raise DomainError(f"lam must be >= 0, got {self.lam}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate must be > 0, "
                              f"got {self.learning_rate}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, "
                              f"got {self.batch_size}")
        if self.max_epochs < 1:
            raise DomainError(f"max_epochs must be >= 1, "
                              f"got {self.max_epochs}")
        if self.patience < 1:
            raise DomainError(f"patience must be >= 1, got {self.patience}")


@dataclass
class TrainReport:
    """Per-epoch curves plus the final mixing estimate."""

    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0
    early_stopped: bool = False
    mixing: np.ndarray | None = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class UncertaintyReport:
    """Per-sample predictions and uncertainty decomposition.

    ``aleatoric`` holds the expected noise variance of every component;
    ``aleatoric_mean`` weighs those by the responsibilities, as does
    ``epistemic`` for the variance of the mean.  ``mixing`` is the
    batch-level mixing estimate (mean responsibility per component).
    """

    prediction: np.ndarray
    aleatoric: np.ndarray
    aleatoric_mean: np.ndarray
    epistemic: np.ndarray
    responsibilities: np.ndarray
    mixing: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def n_components(self) -> int:
        return self.aleatoric.shape[1]


class _Adam:
    """Adam on a list of arrays (decay 0.9/0.999, epsilon 1e-8)."""

    def __init__(self, arrays, lr):
        self.lr = lr
        self.b1, self.b2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def _epoch_batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def evaluate_loss(w: NetworkWeights, x, y, lam: float) -> float:
    """Full-batch training objective at fixed weights."""
    gamma, nu, alpha, beta, p = forward(w, x)
    return core.total_loss(y, gamma, nu, alpha, beta, p.matrix, lam)


def train(spec: NetworkSpec, data: RegressionDataset, cfg: TrainConfig,
          epoch_callback=None) -> tuple[NetworkWeights, TrainReport]:
    """Fit the network to the train split, early-stopping on the val split.

    ``epoch_callback(epoch, weights, train_loss, val_loss)`` is invoked
    after every epoch with the current (not best) weights; useful for
    logging.

    Returns the weights at the best validation loss and the report.
    Raises :class:`DivergenceError` if an entire epoch produces no finite
    batch loss; the report's ``mixing`` is the mixing estimate over the
    train split at the returned weights.
    """
    if spec.n_components != cfg.n_components:
        raise DomainError(
            f"spec has {spec.n_components} components but config asks for "
            f"{cfg.n_components}")
    x_train, y_train = data.subset(TRAIN)
    x_val, y_val = data.subset(VAL)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise DomainError("train and validation splits must be nonempty")

    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(spec, seed=cfg.seed)
    opt = _Adam(weights.arrays(), cfg.learning_rate)
    report = TrainReport()
    best_val = np.inf
    best_weights = weights.copy()
    since_best = 0
    last_finite = (weights.copy(), -1)

    for epoch in range(cfg.max_epochs):
        epoch_losses = []
        for idx in _epoch_batches(x_train.shape[0], cfg.batch_size, rng):
            loss, grad = loss_and_grad(
                weights, x_train[idx], y_train[idx], cfg.lam,
                freeze_responsibilities=cfg.freeze_responsibilities)
            if not np.isfinite(loss):
                continue
            opt.step(weights.arrays(), grad.arrays())
            epoch_losses.append(loss)
        if not epoch_losses:
            raise DivergenceError(
                f"no finite batch loss in epoch {epoch}",
                last_state=last_finite)
        last_finite = (weights.copy(), epoch)

        train_loss = float(np.mean(epoch_losses))
        val_loss = evaluate_loss(weights, x_val, y_val, cfg.lam)
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        report.epochs_run = epoch + 1
        if epoch_callback is not None:
            epoch_callback(epoch, weights, train_loss, val_loss)

        if np.isfinite(val_loss) and val_loss < best_val:
            best_val = val_loss
            best_weights = weights.copy()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                report.early_stopped = True
                break

    _, _, _, _, p = forward(best_weights, x_train)
    report.mixing = core.mixing_estimate(p)
    report.wall_time = time.perf_counter() - start
    return best_weights, report


def predict_with_uncertainty(w: NetworkWeights, x) -> UncertaintyReport:
    """Closed-form prediction and uncertainty for a batch.

    The prediction is the location head; aleatoric variance per component
    is ``beta / (alpha - 1)``; the epistemic variance weighs each
    component's ``beta / (nu (alpha - 1))`` by that sample's
    responsibilities.
    """
    gamma, nu, alpha, beta, p = forward(w, x)
    pm = p.matrix
    aleatoric = beta / (alpha - 1.0)
    epi = np.sum(pm * beta / (nu * (alpha - 1.0)), axis=1)
    return UncertaintyReport(
        prediction=gamma,
        aleatoric=aleatoric,
        aleatoric_mean=np.sum(pm * aleatoric, axis=1),
        epistemic=epi,
        responsibilities=pm,
        mixing=core.mixing_estimate(pm),
        nu=nu,
        alpha=alpha,
        beta=beta,
    )
