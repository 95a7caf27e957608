"""Classic single-Gaussian evidential regression, kept as a reference.

Self-contained formulas for the K=1 model: one Gaussian likelihood with a
single normal-inverse-gamma prior.  The mixture model must reduce to these
exactly when K=1, and the test suite holds it to that.  Nothing here
imports from :mod:`evidmix.core`; the point is an independent code path.

All functions broadcast over numpy arrays.
"""

import numpy as np
from scipy.special import gammaln


def nig_nll(y, gamma, nu, alpha, beta):
    """Negative log marginal likelihood of y under the NIG prior."""
    two_beta_lam = 2.0 * beta * (1.0 + nu)
    return (0.5 * np.log(np.pi / nu)
            - alpha * np.log(two_beta_lam)
            + (alpha + 0.5) * np.log(nu * (y - gamma) ** 2 + two_beta_lam)
            + gammaln(alpha) - gammaln(alpha + 0.5))


def nig_penalty(y, gamma, nu, alpha):
    """Evidence-scaled absolute error, |y - gamma| * (2 nu + alpha)."""
    return np.abs(y - gamma) * (2.0 * nu + alpha)


def nig_loss(y, gamma, nu, alpha, beta, lam):
    """Mean NLL plus lam times the mean penalty."""
    return float(np.mean(nig_nll(y, gamma, nu, alpha, beta))
                 + lam * np.mean(nig_penalty(y, gamma, nu, alpha)))


def nig_marginal_logpdf(y, gamma, nu, alpha, beta):
    """Log marginal density written in its gamma-ratio form.

    A third algebraic arrangement (besides the expanded NLL and the
    generic Student-t density) used to cross-check both.
    """
    omega = 2.0 * beta * (1.0 + nu)
    return (gammaln(alpha + 0.5) - gammaln(alpha)
            + 0.5 * np.log(nu / np.pi) + alpha * np.log(omega)
            - (alpha + 0.5) * np.log(nu * (y - gamma) ** 2 + omega))


def nig_prediction(gamma):
    """Point prediction: the prior location itself."""
    return gamma


def nig_aleatoric(alpha, beta):
    """Expected noise variance beta / (alpha - 1)."""
    return beta / (alpha - 1.0)


def nig_epistemic(nu, alpha, beta):
    """Variance of the unknown mean, beta / (nu (alpha - 1))."""
    return beta / (nu * (alpha - 1.0))
