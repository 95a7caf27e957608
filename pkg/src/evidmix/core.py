"""Closed-form math of the mixture evidential model.

A scalar target is modelled hierarchically: a Gaussian mixture likelihood
whose components share one unknown mean but carry separate unknown
variances, with a normal-inverse-gamma (NIG) prior per component,

    y ~ sum_k w_k * N(mu, sigma_k^2),      (mu, sigma_k^2) ~ NIG(gamma, nu_k, alpha_k, beta_k).

Integrating out (mu, sigma_k^2) turns each component into a Student-t, so
the marginal of y is a Student-t mixture.  Everything in this module is a
pure, deterministic function of its inputs: densities, the per-component
training loss and its responsibility-weighted batch forms, the evidence
regularizer, and the closed-form prediction / uncertainty moments.

Two algebraically equivalent but independently coded routes to the
per-component negative log marginal exist on purpose:

* ``student_t_logpdf`` + ``component_marginal`` evaluate the Student-t
  density directly;
* ``nll_component`` evaluates the expanded log-gamma form used as the
  training loss.

Tests pin the two routes against each other and against a brute-force
quadrature oracle; do not merge them.

Conventions: the Student-t ``scale`` field is the *squared* scale (the
density uses its square root), batch losses use a mean reduction over
samples, and log-sum-exp is max-shifted for stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DimensionError, DomainError

# Floors applied by the network activations; re-exported here because they
# define the smallest parameter values any core function must survive.
NU_FLOOR = 1e-6
BETA_FLOOR = 1e-6
ALPHA_FLOOR = 1.0 + 1e-6

WEIGHT_SUM_TOL = 1e-9


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NIGComponent:
    """Hyperparameters of one component's normal-inverse-gamma prior.

    Parameters
    ----------
    nu : float
        Virtual-observation count for the mean; strictly positive.
    alpha : float
        Inverse-gamma shape; strictly greater than 1 so the noise variance
        has a finite expectation.
    beta : float
        Inverse-gamma rate; strictly positive.
    """

    nu: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("nu", "alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.nu <= 0:
            raise DomainError(f"nu must be > 0, got {self.nu}")
        if self.beta <= 0:
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if self.alpha <= 1:
            raise DomainError(f"alpha must be > 1, got {self.alpha}")


@dataclass(frozen=True)
class StudentTParams:
    """Location / squared-scale / degrees-of-freedom triple of a Student-t.

    ``scale`` is the squared scale: the density divides the residual by
    ``sqrt(scale)``.  This is the parameterization under which the NIG
    marginalization identity holds exactly.
    """

    location: float
    scale: float
    dof: float

    def __post_init__(self):
        if not (np.isfinite(self.location) and np.isfinite(self.scale)
                and np.isfinite(self.dof)):
            raise DomainError("Student-t parameters must be finite")
        if self.scale <= 0:
            raise DomainError(f"scale must be > 0, got {self.scale}")
        if self.dof <= 0:
            raise DomainError(f"dof must be > 0, got {self.dof}")


@dataclass(frozen=True, eq=False)
class MixtureEvidentialParams:
    """Full hyperparameter set of the evidential mixture for one sample.

    One scalar ``gamma`` is shared by all components (the mixture varies
    only in its variance priors); ``weights`` are the mixing coefficients.
    """

    gamma: float
    components: tuple[NIGComponent, ...]
    weights: np.ndarray

    def __init__(self, gamma, components, weights):
        components = tuple(components)
        weights = np.asarray(weights, dtype=float)
        if not np.isfinite(gamma):
            raise DomainError(f"gamma must be finite, got {gamma!r}")
        if len(components) < 1:
            raise DomainError("need at least one component")
        if weights.shape != (len(components),):
            raise DimensionError(
                f"weights shape {weights.shape} does not match "
                f"{len(components)} components")
        if np.any(weights < 0):
            raise DomainError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL}, "
                f"got sum {weights.sum()!r}")
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "weights", weights)

    @property
    def n_components(self) -> int:
        return len(self.components)

    def nu_array(self) -> np.ndarray:
        return np.array([c.nu for c in self.components])

    def alpha_array(self) -> np.ndarray:
        return np.array([c.alpha for c in self.components])

    def beta_array(self) -> np.ndarray:
        return np.array([c.beta for c in self.components])


@dataclass(frozen=True, eq=False)
class Responsibilities:
    """Row-stochastic N x K matrix of per-sample component probabilities."""

    matrix: np.ndarray

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError(
                f"responsibilities must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise DimensionError("responsibilities must be nonempty")
        if np.any(matrix < 0) or np.any(matrix > 1):
            raise DomainError("responsibilities must lie in [0, 1]")
        row_sums = matrix.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > WEIGHT_SUM_TOL):
            worst = np.abs(row_sums - 1.0).max()
            raise DomainError(
                f"responsibility rows must sum to 1 within {WEIGHT_SUM_TOL} "
                f"(worst deviation {worst:.3e})")
        object.__setattr__(self, "matrix", matrix)

    @property
    def shape(self):
        return self.matrix.shape


def _as_resp_matrix(p) -> np.ndarray:
    """Accept a Responsibilities object or a raw array."""
    if isinstance(p, Responsibilities):
        return p.matrix
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# Elementwise kernels (broadcast over arrays; used by the batch losses and
# by the network's backward pass)
# ---------------------------------------------------------------------------

def student_t_logpdf_kernel(y, location, scale, dof):
    """Log density of a location / squared-scale / dof Student-t.

    Broadcasts over array inputs.  No domain validation; callers that
    accept user input go through :func:`student_t_logpdf`.
    """
    y = np.asarray(y, dtype=float)
    z2 = (y - location) ** 2 / scale
    return (gammaln((dof + 1.0) / 2.0) - gammaln(dof / 2.0)
            - 0.5 * np.log(dof * np.pi * scale)
            - (dof + 1.0) / 2.0 * np.log1p(z2 / dof))


def nll_component_kernel(y, gamma, nu, alpha, beta):
    """Expanded per-component negative log marginal (the training loss).

    Elementwise in all arguments.  Equals ``-student_t_logpdf`` of the
    mapped Student-t; kept as a separate code path so the identity can be
    tested rather than assumed.
    """
    omega = 2.0 * beta * (1.0 + nu)
    resid2 = (np.asarray(y, dtype=float) - gamma) ** 2
    return (0.5 * np.log(np.pi / nu)
            - alpha * np.log(omega)
            + (alpha + 0.5) * np.log(resid2 * nu + omega)
            + gammaln(alpha) - gammaln(alpha + 0.5))


def marginal_scale_dof(nu, alpha, beta):
    """Map NIG hyperparameters to the marginal Student-t (squared scale, dof)."""
    return beta * (1.0 + nu) / (nu * alpha), 2.0 * alpha


def mixture_loglik_kernel(y, gamma, nu, alpha, beta, weights):
    """Log density of the Student-t mixture for a batch.

    Parameters
    ----------
    y, gamma : ndarray, shape (N,)
    nu, alpha, beta, weights : ndarray, shape (N, K)
        Per-sample component parameters and mixing weights (rows sum to 1).

    Returns
    -------
    ndarray, shape (N,)
    """
    y = np.asarray(y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    scale, dof = marginal_scale_dof(nu, alpha, beta)
    logp = student_t_logpdf_kernel(y[:, None], gamma[:, None], scale, dof)
    return logsumexp(logp, axis=1, b=weights)


# ---------------------------------------------------------------------------
# Scalar operations on the domain types
# ---------------------------------------------------------------------------

def student_t_logpdf(y: float, p: StudentTParams) -> float:
    """Log density of ``p`` at ``y``.  Finite for all finite ``y``."""
    if not np.isfinite(y):
        raise DomainError(f"y must be finite, got {y!r}")
    return float(student_t_logpdf_kernel(y, p.location, p.scale, p.dof))


def component_marginal(c: NIGComponent, gamma: float) -> StudentTParams:
    """Student-t marginal of a single NIG component.

    Integrating the Gaussian likelihood against the component's prior gives
    a Student-t located at ``gamma`` with squared scale
    ``beta (1 + nu) / (nu alpha)`` and ``2 alpha`` degrees of freedom.
    """
    if not np.isfinite(gamma):
        raise DomainError(f"gamma must be finite, got {gamma!r}")
    scale, dof = marginal_scale_dof(c.nu, c.alpha, c.beta)
    return StudentTParams(location=gamma, scale=float(scale), dof=float(dof))


def marginal_loglik(y: float, m: MixtureEvidentialParams) -> float:
    """Log of the mixture marginal density at ``y`` (max-shift stabilized)."""
    if not np.isfinite(y):
        raise DomainError(f"y must be finite, got {y!r}")
    logps = np.array([
        student_t_logpdf(y, component_marginal(c, m.gamma))
        for c in m.components
    ])
    return float(logsumexp(logps, b=m.weights))


def predict(m: MixtureEvidentialParams) -> float:
    """Posterior-mean prediction: exactly ``gamma``, for any components."""
    return m.gamma


def aleatoric_per_component(c: NIGComponent) -> float:
    """Expected noise variance of one component, ``beta / (alpha - 1)``."""
    return c.beta / (c.alpha - 1.0)


def epistemic(m: MixtureEvidentialParams) -> float:
    """Variance of the unknown mean under the weighted prior.

    ``sum_k w_k beta_k / (nu_k (alpha_k - 1))``; strictly positive for
    valid parameters.
    """
    total = 0.0
    for w, c in zip(m.weights, m.components):
        total += w * c.beta / (c.nu * (c.alpha - 1.0))
    return float(total)


def nll_component(y: float, gamma: float, c: NIGComponent) -> float:
    """Per-component negative log marginal in its expanded log-gamma form."""
    if not (np.isfinite(y) and np.isfinite(gamma)):
        raise DomainError("y and gamma must be finite")
    return float(nll_component_kernel(y, gamma, c.nu, c.alpha, c.beta))


# ---------------------------------------------------------------------------
# Batch losses
# ---------------------------------------------------------------------------

def _check_batch_shapes(y, gamma, nu, alpha, beta, p):
    y = np.asarray(y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    nu = np.asarray(nu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if y.ndim != 1:
        raise DimensionError(f"y must be 1-D, got shape {y.shape}")
    n = y.shape[0]
    if gamma.shape != (n,):
        raise DimensionError(f"gamma shape {gamma.shape} != ({n},)")
    if nu.ndim != 2 or nu.shape[0] != n:
        raise DimensionError(f"nu shape {nu.shape} incompatible with N={n}")
    k = nu.shape[1]
    for name, arr in (("alpha", alpha), ("beta", beta), ("p", p)):
        if arr.shape != (n, k):
            raise DimensionError(f"{name} shape {arr.shape} != ({n}, {k})")
    return y, gamma, nu, alpha, beta


def weighted_nll(y, gamma, nu, alpha, beta, p) -> float:
    """Responsibility-weighted negative log marginal, averaged over samples.

    Parameters
    ----------
    y, gamma : array_like, shape (N,)
        Targets and per-sample predicted locations.
    nu, alpha, beta : array_like, shape (N, K)
        Per-sample, per-component prior hyperparameters.
    p : Responsibilities or array_like, shape (N, K)
        Weights applied to each component's loss.

    Returns
    -------
    float
        ``mean_i sum_k p_ik * nll_component(y_i, gamma_i, c_ik)``.
    """
    pm = _as_resp_matrix(p)
    y, gamma, nu, alpha, beta = _check_batch_shapes(y, gamma, nu, alpha, beta, pm)
    terms = nll_component_kernel(y[:, None], gamma[:, None], nu, alpha, beta)
    return float(np.mean(np.sum(pm * terms, axis=1)))


def evidence_penalty(y, gamma, nu, alpha, p) -> float:
    """Mean evidence-weighted absolute residual.

    Each component contributes ``p_ik * |y_i - gamma_i| * (2 nu_ik + alpha_ik)``;
    the factor ``2 nu + alpha`` is the prior's total virtual-observation
    count, so confident priors pay more for being wrong.
    """
    pm = _as_resp_matrix(p)
    y, gamma, nu, alpha, _ = _check_batch_shapes(y, gamma, nu, alpha, alpha, pm)
    resid = np.abs(y - gamma)[:, None]
    return float(np.mean(np.sum(pm * resid * (2.0 * nu + alpha), axis=1)))


def total_loss(y, gamma, nu, alpha, beta, p, lam: float) -> float:
    """Training objective: weighted NLL plus ``lam`` times the evidence penalty."""
    if lam < 0:
        raise DomainError(f"lam must be >= 0, got {lam}")
    loss = weighted_nll(y, gamma, nu, alpha, beta, p)
    if lam != 0.0:
        loss += lam * evidence_penalty(y, gamma, nu, alpha, p)
    return loss


def mixing_estimate(p) -> np.ndarray:
    """Mixing-coefficient estimate: column means of the responsibilities."""
    pm = _as_resp_matrix(p)
    if pm.ndim != 2 or pm.size == 0:
        raise DomainError("responsibilities must be a nonempty 2-D matrix")
    return pm.mean(axis=0)
