"""User-activity mixture: lognormally distributed Poisson voting rates.

The number of votes a user casts in the observation window is Poisson with a
per-user rate drawn from a lognormal; observed voters are the zero-truncated
part of that mixture, and the zero class calibrates how many active users the
site has beyond the ones we ever see vote.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import minimize
from scipy.special import gammaln, logsumexp

from .params import ActivityFit

_GH_NODES, _GH_WEIGHTS = hermgauss(96)
_LOG_GH_WEIGHTS = np.log(_GH_WEIGHTS)


def _exponent(u, k, mu, sigma):
    """log integrand (up to constants): k*u - e^u - (u-mu)^2/(2 sigma^2)."""
    return k * u - np.exp(u) - (u - mu) ** 2 / (2 * sigma ** 2)


def _mode(k, mu, sigma):
    """Root of k - e^u - (u-mu)/sigma^2 (the exponent is strictly concave)."""
    k = np.asarray(k, dtype=float)
    lo = np.full_like(k, min(mu - 45 * sigma, -45.0))
    hi = np.maximum(np.log(k + 1.0) + 5.0, mu + 45 * sigma)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        pos = k - np.exp(mid) - (mid - mu) / sigma ** 2 > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def log_pmf(k, mu, sigma):
    """log P(K = k) for the Poisson-lognormal mixture, vectorized over k.

    The defining integral int_0^inf rho^(k-1) e^(-(log rho - mu)^2/(2 sigma^2) - rho) drho
    is evaluated on the log-rate axis by Gauss-Hermite quadrature centered at
    the mode of the (strictly concave) exponent.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scalar = np.ndim(k) == 0
    k = np.atleast_1d(np.asarray(k))
    if np.any(k < 0) or np.any(k != np.floor(k)):
        raise ValueError("k must be non-negative integers")
    kf = k.astype(float)
    u_star = _mode(kf, mu, sigma)
    g_star = _exponent(u_star, kf, mu, sigma)
    h = 1.0 / np.sqrt(np.exp(u_star) + 1.0 / sigma ** 2)  # 1/sqrt(-g'')
    u = u_star[:, None] + np.sqrt(2.0) * h[:, None] * _GH_NODES[None, :]
    body = (_exponent(u, kf[:, None], mu, sigma) - g_star[:, None]
            + _GH_NODES[None, :] ** 2 + _LOG_GH_WEIGHTS[None, :])
    log_integral = g_star + np.log(np.sqrt(2.0) * h) + logsumexp(body, axis=1)
    out = log_integral - gammaln(kf + 1) - 0.5 * np.log(2 * np.pi) - np.log(sigma)
    return float(out[0]) if scalar else out


def pmf(k, mu, sigma):
    return np.exp(log_pmf(k, mu, sigma))


def zero_truncated_loglik(counts, weights, mu, sigma):
    """Log-likelihood of observed per-user vote counts (all >= 1).

    ``counts``/``weights`` are the histogram of distinct counts; the zero
    class is unobservable, hence the truncation term.
    """
    lp = log_pmf(counts, mu, sigma)
    p0 = np.exp(log_pmf(np.array([0]), mu, sigma))[0]
    if p0 >= 1.0:
        return -np.inf
    return float(np.dot(weights, lp) - weights.sum() * np.log1p(-p0))


def fit_activity_mixture(votes_per_user) -> ActivityFit:
    """Fit (mu, sigma) of the activity lognormal to observed voter counts.

    ``votes_per_user``: one count >= 1 per observed voter.  Returns the fit
    plus the implied zero-class probability ``p_zero``.
    """
    counts = np.asarray(votes_per_user)
    if counts.size == 0:
        raise ValueError("no voters supplied")
    if np.any(counts < 1):
        raise ValueError("observed voters must have at least one vote")
    uniq, mult = np.unique(counts.astype(np.int64), return_counts=True)
    mult = mult.astype(float)

    logk = np.log(counts.astype(float))
    x0 = np.array([np.median(logk), np.log(logk.std() + 0.75)])

    def nll(th):
        mu, sigma = th[0], np.exp(th[1])
        if not (1e-4 < sigma < 50):
            return 1e15
        return -zero_truncated_loglik(uniq, mult, mu, sigma)

    res = minimize(nll, x0, method="Nelder-Mead",
                   options={"maxiter": 2000, "xatol": 1e-8, "fatol": 1e-10})
    mu, sigma = float(res.x[0]), float(np.exp(res.x[1]))
    p_zero = float(np.exp(log_pmf(np.array([0]), mu, sigma))[0])
    return ActivityFit(mu=mu, sigma=sigma, p_zero=p_zero, loglik=float(-res.fun))


def estimate_active_users(n_observed_voters: float, p_zero: float) -> float:
    """Scale the observed voter count up by the invisible zero-vote class."""
    if not (0.0 <= p_zero < 1.0):
        raise ValueError("p_zero must lie in [0, 1)")
    if n_observed_voters < 0:
        raise ValueError("voter count must be non-negative")
    return n_observed_voters / (1.0 - p_zero)
