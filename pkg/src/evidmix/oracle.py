"""Brute-force numerical verification of the closed-form results.

Everything the model computes analytically (the Student-t marginal, the
prediction, both uncertainty moments) is recomputed here the slow way:
two-dimensional quadrature of likelihood times prior on a grid, and plain
Monte-Carlo sampling of the hierarchical model.  Densities come from
``scipy.stats``, so no formula is shared with :mod:`evidmix.core`.

Used only by tests and the ``verify`` CLI command.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.stats import invgamma, norm

from .core import MixtureEvidentialParams
from .exceptions import CoverageError, DomainError

MIN_PRIOR_MASS = 0.9999
# Box quantiles much tighter than the coverage requirement: truncated tail
# mass shows up directly as relative error when the density is evaluated
# away from the bulk, so the box must cut far less than the tolerances.
_QUANTILE_TAIL = 1e-9


@dataclass(frozen=True)
class QuadratureSpec:
    """Integration box and grid resolution for the double integral.

    The mean axis is linearly spaced; the variance axis is log spaced,
    since the inverse-gamma prior spans orders of magnitude.
    """

    mu_range: tuple[float, float]
    sigma2_range: tuple[float, float]
    mu_points: int = 801
    sigma2_points: int = 513

    def __post_init__(self):
        if self.mu_range[0] >= self.mu_range[1]:
            raise DomainError(f"empty mu_range {self.mu_range}")
        if not (0 < self.sigma2_range[0] < self.sigma2_range[1]):
            raise DomainError(f"invalid sigma2_range {self.sigma2_range}")
        if self.mu_points < 64 or self.sigma2_points < 64:
            raise DomainError("point counts must be >= 64")

    def sigma2_grid(self) -> np.ndarray:
        return np.geomspace(self.sigma2_range[0], self.sigma2_range[1],
                            self.sigma2_points)


def adaptive_spec(m: MixtureEvidentialParams, mu_points: int = 801,
                  sigma2_points: int = 513) -> QuadratureSpec:
    """Build a box that captures essentially all prior mass of ``m``.

    The variance range spans the extreme inverse-gamma quantiles over all
    components; the mean range is ``gamma`` plus/minus 12 conditional
    standard deviations at the largest variance.
    """
    nu = m.nu_array()
    alpha = m.alpha_array()
    beta = m.beta_array()
    s2_lo = float(np.min(invgamma.ppf(_QUANTILE_TAIL, alpha, scale=beta)))
    s2_hi = float(np.max(invgamma.ppf(1.0 - _QUANTILE_TAIL, alpha, scale=beta)))
    half_width = 12.0 * float(np.sqrt(np.max(
        invgamma.ppf(1.0 - _QUANTILE_TAIL, alpha, scale=beta) / nu)))
    return QuadratureSpec(
        mu_range=(m.gamma - half_width, m.gamma + half_width),
        sigma2_range=(s2_lo, s2_hi),
        mu_points=mu_points,
        sigma2_points=sigma2_points,
    )


def _slice_mu_nodes(q: QuadratureSpec, nu: float, s2: np.ndarray,
                    centers: tuple[float, ...]) -> np.ndarray:
    """Per-variance-slice mu nodes, clipped to the declared box.

    A single linear grid over the whole box cannot resolve the conditional
    density at the smallest variances (its width scales with sqrt(s2)), so
    each slice gets its own nodes spanning every center of interest plus a
    12-standard-deviation margin at that slice's scale.  Outside that span
    the integrand is negligible, so clipping to it still integrates the box.
    """
    margin = 12.0 * np.sqrt(s2) * max(1.0, 1.0 / np.sqrt(nu))
    lo = np.maximum(min(centers) - margin, q.mu_range[0])
    hi = np.minimum(max(centers) + margin, q.mu_range[1])
    t = np.linspace(0.0, 1.0, q.mu_points)
    return lo[:, None] + t[None, :] * (hi - lo)[:, None]


def _component_quad(y: float | None, gamma: float, nu: float, alpha: float,
                    beta: float, q: QuadratureSpec) -> float:
    """Double integral of [N(y | mu, s2) *] N(mu | gamma, s2/nu) * InvGamma(s2).

    With ``y=None`` integrates the prior alone (a mass check).
    """
    s2 = q.sigma2_grid()
    centers = (gamma,) if y is None else (gamma, y)
    mu = _slice_mu_nodes(q, nu, s2, centers)  # (sigma2_points, mu_points)
    vals = norm.pdf(mu, loc=gamma, scale=np.sqrt(s2 / nu)[:, None])
    if y is not None:
        vals = vals * norm.pdf(y, loc=mu, scale=np.sqrt(s2)[:, None])
    inner = simpson(vals, x=mu, axis=1)
    return float(simpson(inner * invgamma.pdf(s2, alpha, scale=beta), x=s2))


def prior_mass(m: MixtureEvidentialParams, q: QuadratureSpec) -> float:
    """Weighted prior mass captured by the box (should be ~1)."""
    return float(sum(
        w * _component_quad(None, m.gamma, c.nu, c.alpha, c.beta, q)
        for w, c in zip(m.weights, m.components)))


def quad_marginal(y: float, m: MixtureEvidentialParams,
                  q: QuadratureSpec) -> float:
    """Marginal density of ``y`` by double quadrature of likelihood x prior.

    Raises
    ------
    CoverageError
        If the box holds less than 99.99% of the prior mass.
    """
    if not np.isfinite(y):
        raise DomainError(f"y must be finite, got {y!r}")
    mass = prior_mass(m, q)
    if mass < MIN_PRIOR_MASS:
        raise CoverageError(
            f"quadrature box captures only {mass:.6f} of the prior mass "
            f"(need >= {MIN_PRIOR_MASS})", mass=mass)
    return float(sum(
        w * _component_quad(y, m.gamma, c.nu, c.alpha, c.beta, q)
        for w, c in zip(m.weights, m.components)))


@dataclass(frozen=True)
class MonteCarloMoments:
    """Sample moments of the hierarchical model with standard errors."""

    mean_mu: float
    var_mu: float
    mean_sigma2: np.ndarray
    se_mean_mu: float
    se_var_mu: float
    se_mean_sigma2: np.ndarray
    n_samples: int


def mc_moments(m: MixtureEvidentialParams, n_samples: int,
               seed: int) -> MonteCarloMoments:
    """Monte-Carlo estimates of E(mu), Var(mu) and per-component E(sigma^2).

    Sampling follows the generative story: pick a component by weight,
    draw the variance from its inverse-gamma (via a gamma draw and a
    reciprocal), then draw the mean from N(gamma, sigma^2 / nu_k).
    Deterministic for a fixed seed.
    """
    if n_samples < 100_000:
        raise DomainError(f"n_samples must be >= 1e5, got {n_samples}")
    rng = np.random.default_rng(seed)
    k = m.n_components
    labels = rng.choice(k, size=n_samples, p=m.weights)
    nu = m.nu_array()[labels]
    alpha = m.alpha_array()[labels]
    beta = m.beta_array()[labels]
    sigma2 = 1.0 / rng.gamma(shape=alpha, scale=1.0 / beta)
    mu = m.gamma + rng.standard_normal(n_samples) * np.sqrt(sigma2 / nu)

    mean_mu = float(mu.mean())
    centered = mu - mean_mu
    m2 = float(np.mean(centered ** 2))
    m4 = float(np.mean(centered ** 4))
    var_mu = m2
    se_mean_mu = float(np.sqrt(m2 / n_samples))
    se_var_mu = float(np.sqrt(max(m4 - m2 ** 2, 0.0) / n_samples))

    mean_s2 = np.full(k, np.nan)
    se_s2 = np.full(k, np.nan)
    for j in range(k):
        draws = sigma2[labels == j]
        if draws.size >= 2:
            mean_s2[j] = draws.mean()
            se_s2[j] = draws.std(ddof=1) / np.sqrt(draws.size)
    return MonteCarloMoments(mean_mu=mean_mu, var_mu=var_mu,
                             mean_sigma2=mean_s2, se_mean_mu=se_mean_mu,
                             se_var_mu=se_var_mu, se_mean_sigma2=se_s2,
                             n_samples=n_samples)
