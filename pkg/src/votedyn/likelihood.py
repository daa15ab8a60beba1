"""Inhomogeneous-Poisson log-likelihood of observed vote times."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import quad


def poisson_loglik(times, rate, window, *, integral=None, points=None,
                   quad_limit=400):
    """log P(events at ``times`` | intensity ``rate``) over ``window``.

    -\\int_window rate dt + sum_i log rate(t_i).

    ``rate`` is a callable of time.  When the integral of the rate over the
    window is already known (for example the model's cumulative vote count at
    the window ends), pass it as ``integral`` to skip the quadrature;
    ``points`` marks breakpoints (phase changes) for the adaptive quadrature.
    Events where the intensity vanishes make the likelihood -inf (warned, not
    raised: optimizer objectives must stay evaluable).
    """
    t0, t1 = window
    if t1 < t0:
        raise ValueError("window must be ordered")
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < t0 or times.max() > t1):
        raise ValueError("event outside the likelihood window")

    if integral is None:
        if t1 == t0:
            integral = 0.0
        else:
            pts = None
            if points is not None:
                pts = [p for p in points if t0 < p < t1] or None
            integral, _ = quad(rate, t0, t1, points=pts, limit=quad_limit)

    if times.size == 0:
        return -float(integral)

    vals = np.asarray([rate(t) for t in times], dtype=float)
    if np.any(vals < 0):
        raise ValueError("negative intensity at an event time")
    if np.any(vals == 0):
        warnings.warn("event at a time of zero intensity: log-likelihood is -inf")
        return -np.inf
    return -float(integral) + float(np.log(vals).sum())
