"""Probability that a visiting user encounters a story.

Fans see a story through the friends interface; everyone else has to find it
by browsing the chronological or popularity list views (or through residual
routes like search, captured by ``p_other``).
"""
from __future__ import annotations

import numpy as np

from .params import GlobalParams, PopularityFits
from .positions import (popularity_page_front, popularity_page_upcoming,
                        recency_page)
from .records import Phase, VoterClass
from .surfing import fraction_to_page


def phase_at(t, t_promotion) -> Phase:
    """Which list the story is on at time ``t`` (promotion instant is FRONT)."""
    if t_promotion is None or t < t_promotion:
        return Phase.UPCOMING
    return Phase.FRONT


def visibility_fan(phase: Phase, cls: VoterClass, gp: GlobalParams) -> float:
    """Visibility through the friends interface for a fan class.

    Front-page stories are fully visible to fans; upcoming stories are diluted
    by how much attention each fan class pays to the friends interface.
    """
    if cls == VoterClass.NON_FAN:
        raise ValueError("non-fans do not use the friends interface")
    if phase == Phase.FRONT:
        return 1.0
    if cls == VoterClass.SUBMITTER_FAN:
        return gp.c_submitter_fan
    return gp.c_other_fan


def visibility_browsing(t, v, t_promotion, gp: GlobalParams, fits: PopularityFits):
    """P(a browsing user encounters the story) at time t with v total votes.

    One minus the chance of missing it on the recency view, the popularity
    view, and every residual route, all treated as independent:
        1 - (1 - F(p_time)) * (1 - F(p_pop)) * (1 - p_other).
    """
    p_time = recency_page(t, t_promotion, gp)
    if phase_at(t, t_promotion) == Phase.FRONT:
        p_pop = popularity_page_front(v, fits.front)
    else:
        p_pop = popularity_page_upcoming(v, fits.upcoming)
    miss = ((1.0 - fraction_to_page(p_time, gp.surfing))
            * (1.0 - fraction_to_page(p_pop, gp.surfing))
            * (1.0 - gp.p_other))
    return 1.0 - miss


def visibility_nonfan(t, v, t_promotion, gp: GlobalParams, fits: PopularityFits):
    """Visibility to users who are fans of nobody involved.

    While the story waits in the upcoming queue only a fraction ``c_nonfan``
    of non-fans browse that queue at all.
    """
    pv = visibility_browsing(t, v, t_promotion, gp, fits)
    if phase_at(t, t_promotion) == Phase.UPCOMING:
        return gp.c_nonfan * pv
    return pv


def class_visibility(cls: VoterClass, t, v, t_promotion, gp, fits):
    """Dispatch: per-class visibility at (t, v)."""
    if cls == VoterClass.NON_FAN:
        return visibility_nonfan(t, v, t_promotion, gp, fits)
    return visibility_fan(phase_at(t, t_promotion), cls, gp)
