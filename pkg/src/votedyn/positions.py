"""Where a story sits on the chronological and popularity list views."""
from __future__ import annotations

import numpy as np

from .dpln import dpln_cdf
from .params import (STORIES_PER_PAGE, GlobalParams, PopularityFitFront,
                     PopularityFitUpcoming)


def recency_page(t, t_promotion, gp: GlobalParams):
    """Page on the chronological list at time ``t`` (Digg hours since submission).

    New stories start at page 1 and drift down as later submissions push them;
    promotion moves the story to page 1 of the (slower-moving) front page.
    Pages are fractional: position within a page is kept, not rounded.
    """
    t = np.asarray(t, dtype=float)
    if t_promotion is None:
        out = gp.k_upcoming * t + 1.0
    else:
        out = np.where(t < t_promotion,
                       gp.k_upcoming * t + 1.0,
                       gp.k_front * (t - t_promotion) + 1.0)
    return out if out.shape else float(out)


def popularity_rank_front(v, fit: PopularityFitFront):
    """Number of stories promoted in the last 24 h with more votes than ``v``."""
    return fit.s_daily * (1.0 - dpln_cdf(np.maximum(v, 1.0), fit.a, fit.b,
                                         fit.nu, fit.sigma))


def popularity_page_front(v, fit: PopularityFitFront):
    """Front popularity-view page for a story with ``v`` votes (v >= 1)."""
    return 1.0 + popularity_rank_front(v, fit) / STORIES_PER_PAGE


def popularity_rank_upcoming(v, fit: PopularityFitUpcoming):
    """Upcoming stories (submitted in the last 24 h) with more votes than ``v``."""
    return np.exp(fit.c - fit.d * np.maximum(np.asarray(v, float), 1.0))


def popularity_page_upcoming(v, fit: PopularityFitUpcoming):
    return 1.0 + popularity_rank_upcoming(v, fit) / STORIES_PER_PAGE
