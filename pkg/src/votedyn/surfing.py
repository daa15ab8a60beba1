"""Law of surfing: how deep into a paginated list users browse."""
from __future__ import annotations

import numpy as np
from scipy.special import erfc, erfcx

from .params import SurfingParams


def stopping_pdf(m, sp: SurfingParams):
    """Inverse-Gaussian density of the number of pages a user views.

    Mean ``sp.mu``, variance ``sp.mu**3 / sp.lam``.  Supports array ``m``.
    """
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    pos = m > 0
    mp = m[pos]
    out[pos] = np.sqrt(sp.lam / (2 * np.pi * mp ** 3)) * np.exp(
        -sp.lam * (mp - sp.mu) ** 2 / (2 * mp * sp.mu ** 2))
    return out if out.shape else float(out)


def fraction_to_page(m, sp: SurfingParams):
    """Fraction of list visitors who get at least as far as page ``m``.

    Reaching page m means browsing past the first m-1 pages, so this is the
    inverse-Gaussian survival function evaluated at m-1; it equals 1 exactly
    at m = 1 and is non-increasing in m.  Fractional m is allowed (a story
    partway down a page is reached by everyone who reaches that page).

    Computed as 0.5*(erfc(x1) - erfcx(x2)*exp(-x1^2)) with
    x1 = sqrt(lam/(2a))*(a-mu)/mu, x2 = sqrt(lam/(2a))*(a+mu)/mu, a = m-1;
    the erfcx form never overflows (x2^2 - 2*lam/mu = x1^2).
    """
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise ValueError("page index m must be >= 1")
    out = np.ones_like(m)
    past = m > 1
    a = m[past] - 1.0
    root = np.sqrt(sp.lam / (2 * a))
    x1 = root * (a - sp.mu) / sp.mu
    x2 = root * (a + sp.mu) / sp.mu
    out[past] = 0.5 * (erfc(x1) - erfcx(x2) * np.exp(-x1 * x1))
    # clip away any -1e-17 style round-off
    out = np.clip(out, 0.0, 1.0)
    return out if out.shape else float(out)
