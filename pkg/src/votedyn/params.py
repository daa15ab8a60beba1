"""Parameter containers and the calibrated defaults for the June 2009 Digg site."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .records import VoterClass

#: stories shown per list page
STORIES_PER_PAGE = 15


@dataclass(frozen=True)
class SurfingParams:
    """Inverse-Gaussian page-stopping law: mean ``mu``, shape ``lam``.

    A user browsing a list views ``m`` pages with probability density
    sqrt(lam/(2 pi m^3)) * exp(-lam (m - mu)^2 / (2 m mu^2));
    the variance is mu^3/lam.
    """

    mu: float = 0.92
    lam: float = 0.9

    def __post_init__(self):
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError(f"surfing params must be positive, got {self}")


@dataclass(frozen=True)
class PopularityFitFront:
    """Front-page popularity-rank curve: rank(v) = s_daily * (1 - dpln_cdf(v)).

    (a, b, nu, sigma) are the double-Pareto lognormal parameters of the vote
    distribution of recently promoted stories; ``s_daily`` is the mean number
    of stories promoted per 24 Digg hours.
    """

    a: float = 1.90
    b: float = 2.50
    nu: float = 5.88
    sigma: float = 0.16
    s_daily: float = 129.0


@dataclass(frozen=True)
class PopularityFitUpcoming:
    """Upcoming popularity-rank curve: rank(v) = exp(c - d * v)."""

    c: float = 5.3
    d: float = 0.029


@dataclass(frozen=True)
class PopularityFits:
    front: PopularityFitFront = field(default_factory=PopularityFitFront)
    upcoming: PopularityFitUpcoming = field(default_factory=PopularityFitUpcoming)


@dataclass(frozen=True)
class GlobalParams:
    """Site-wide parameters shared by every story."""

    omega: float = 0.16          # user visit rate, 1/Digg-hour
    users: float = 248_000.0     # active user count U
    surfing: SurfingParams = field(default_factory=SurfingParams)
    p_other: float = 0.05        # visibility through other routes (search, ...)
    rho: float = 1.7e-5          # link density: P(random user is a fan of a random voter)
    k_upcoming: float = 59.8     # upcoming-list recency drift, pages/Digg-hour
    k_front: float = 0.31        # front-page recency drift, pages/Digg-hour
    c_submitter_fan: float = 0.57  # friends-interface factor for submitter fans (upcoming)
    c_other_fan: float = 0.10      # friends-interface factor for other fans (upcoming)
    c_nonfan: float = 0.11         # browsing-attention factor for non-fans (upcoming)

    def __post_init__(self):
        if self.users <= 1:
            raise ValueError("users must exceed 1")
        if not (0.0 <= self.p_other <= 1.0):
            raise ValueError("p_other must lie in [0, 1]")
        for name in ("c_submitter_fan", "c_other_fan", "c_nonfan"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class StoryParams:
    """Story-specific parameters: per-class interestingness r and initial pools."""

    r_submitter_fan: float
    r_other_fan: float
    r_nonfan: float
    s0: float                    # submitter's fan count at submission
    t_promotion: float | None = None  # Digg hours since submission, None = never

    def r(self, cls: VoterClass) -> float:
        return {
            VoterClass.SUBMITTER_FAN: self.r_submitter_fan,
            VoterClass.OTHER_FAN: self.r_other_fan,
            VoterClass.NON_FAN: self.r_nonfan,
        }[cls]

    def __post_init__(self):
        for name in ("r_submitter_fan", "r_other_fan", "r_nonfan"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.s0 < 0:
            raise ValueError("s0 must be non-negative")


@dataclass(frozen=True)
class LognormalPrior:
    """Prior on an interestingness value r: log r ~ Normal(mu, sigma)."""

    mu: float
    sigma: float

    def logpdf(self, log_r: float) -> float:
        z = (log_r - self.mu) / self.sigma
        return -0.5 * z * z - np.log(self.sigma) - 0.5 * np.log(2 * np.pi)

    def sample(self, rng: np.random.Generator, size=None):
        return np.exp(rng.normal(self.mu, self.sigma, size=size))


def default_priors() -> dict[VoterClass, LognormalPrior]:
    """Interestingness priors fitted on the 2009 calibration corpus."""
    return {
        VoterClass.SUBMITTER_FAN: LognormalPrior(-3.5, 0.8),
        VoterClass.OTHER_FAN: LognormalPrior(-2.3, 0.3),
        VoterClass.NON_FAN: LognormalPrior(-6.3, 0.6),
    }


@dataclass(frozen=True)
class ActivityFit:
    """Fitted lognormal user-activity mixture and its zero-class mass."""

    mu: float
    sigma: float
    p_zero: float
    loglik: float


def digg2009_globals() -> GlobalParams:
    """Site parameters calibrated on the June 2009 dataset."""
    return GlobalParams()


def digg2009_fits() -> PopularityFits:
    return PopularityFits()


__all__ = [
    "STORIES_PER_PAGE",
    "SurfingParams",
    "PopularityFitFront",
    "PopularityFitUpcoming",
    "PopularityFits",
    "GlobalParams",
    "StoryParams",
    "LognormalPrior",
    "ActivityFit",
    "default_priors",
    "digg2009_globals",
    "digg2009_fits",
    "replace",
]
