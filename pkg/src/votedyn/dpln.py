"""Double-Pareto lognormal distribution (power-law tails, lognormal body).

If X is dPlN(a, b, nu, sigma) then W = log X is the sum of a Normal(nu,
sigma^2) and an asymmetric Laplace with upper rate ``a`` and lower rate ``b``
(the normal-Laplace distribution), so the upper tail of X falls off like
x^-a and the lower tail grows like x^b.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import erfc, erfcx, log_ndtr, ndtr

_SQRT2 = np.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


def _log_erfcx(x):
    """log(erfcx(x)), valid for all x (erfcx overflows below about -26)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < -25.0
    with np.errstate(over="ignore"):
        out[~small] = np.log(erfcx(x[~small]))
    out[small] = x[small] ** 2 + np.log(2.0)
    return out


def _log_mills(z):
    """log of the Mills ratio  Phi_c(z)/phi(z) = sqrt(pi/2)*erfcx(z/sqrt(2))."""
    return 0.5 * np.log(np.pi / 2) + _log_erfcx(np.asarray(z, float) / _SQRT2)


def _phi_mills(q, z):
    """phi(q) * Mills(z), computed without overflow for any (q, z)."""
    return 0.5 * np.exp(-0.5 * q * q + _log_erfcx(z / _SQRT2))


def nl_cdf(w, a, b, nu, sigma):
    """CDF of the normal-Laplace distribution (log of a dPlN variate)."""
    q = (np.asarray(w, dtype=float) - nu) / sigma
    t1 = _phi_mills(q, a * sigma - q)
    t2 = _phi_mills(q, b * sigma + q)
    out = ndtr(q) - (b * t1 - a * t2) / (a + b)
    out = np.clip(out, 0.0, 1.0)
    return out if out.shape else float(out)


def nl_logpdf(w, a, b, nu, sigma):
    q = (np.asarray(w, dtype=float) - nu) / sigma
    lm1 = _log_mills(a * sigma - q)
    lm2 = _log_mills(b * sigma + q)
    peak = np.maximum(lm1, lm2)
    mix = peak + np.log(np.exp(lm1 - peak) + np.exp(lm2 - peak))
    # ab/(a+b) carries the scale; the Mills-ratio mixture absorbs the
    # 1/sigma that a location-scale density would otherwise need
    out = (np.log(a) + np.log(b) - np.log(a + b)
           - 0.5 * q * q - _LOG_SQRT_2PI + mix)
    return out if out.shape else float(out)


def dpln_cdf(x, a, b, nu, sigma):
    """P(X <= x) for X ~ dPlN(a, b, nu, sigma); x must be positive."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("dpln support is x > 0")
    return nl_cdf(np.log(x), a, b, nu, sigma)


def dpln_logpdf(x, a, b, nu, sigma):
    x = np.asarray(x, dtype=float)
    return nl_logpdf(np.log(x), a, b, nu, sigma) - np.log(x)


def nl_sample(n, a, b, nu, sigma, rng: np.random.Generator):
    """Draw normal-Laplace variates via the convolution representation."""
    return (rng.normal(nu, sigma, size=n)
            + rng.exponential(1.0 / a, size=n)
            - rng.exponential(1.0 / b, size=n))


def dpln_sample(n, a, b, nu, sigma, rng: np.random.Generator):
    return np.exp(nl_sample(n, a, b, nu, sigma, rng))


def nl_fit(w, x0=None):
    """Maximum-likelihood fit of the normal-Laplace parameters to samples.

    Returns (a, b, nu, sigma).  Raises RuntimeError when the simplex search
    fails to converge (callers doing bootstrap refits treat that as a
    discarded replicate).
    """
    w = np.asarray(w, dtype=float)
    if w.size < 8:
        raise ValueError("need at least 8 samples to fit four parameters")
    m, s = w.mean(), w.std()
    if s <= 1e-9 * max(1.0, abs(m)):
        raise RuntimeError("degenerate sample (zero variance)")
    if x0 is None:
        # moments heuristic: split the variance between body and tails
        x0 = (np.log(2.0 / s), np.log(2.0 / s), m, np.log(0.7 * s))

    def nll(th):
        a, b, sig = np.exp(th[0]), np.exp(th[1]), np.exp(th[3])
        if not (1e-8 < a < 1e4 and 1e-8 < b < 1e4 and 1e-8 < sig < 1e4):
            return 1e12
        return -np.sum(nl_logpdf(w, a, b, th[2], sig))

    best = None
    for scale in (1.0, 0.3):
        start = np.asarray(x0, float) * np.array([scale, scale, 1.0, 1.0])
        res = minimize(nll, start, method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-7, "fatol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise RuntimeError("normal-Laplace fit failed to produce a finite likelihood")
    a, b, sig = np.exp(best.x[0]), np.exp(best.x[1]), np.exp(best.x[3])
    return float(a), float(b), float(best.x[2]), float(sig)


def dpln_fit(x):
    """MLE of dPlN parameters for positive samples ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("dpln support is x > 0")
    return nl_fit(np.log(x))
