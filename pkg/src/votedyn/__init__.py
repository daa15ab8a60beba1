"""Stochastic modeling of story vote dynamics on a social news site.

The package follows votes from a story's submission through its promotion to
the front page: visibility laws (position decay and a law of surfing), coupled
rate equations for three voter classes, per-story interestingness estimation,
vote-count forecasting with posterior intervals, and an event-level simulator
for end-to-end validation.
"""
from .activity import estimate_active_users, fit_activity_mixture
from .dataio import (CorpusSummary, DiggClock, FanGraph, RawVote, adapt_digg2009,
                     corpus_stats, ingest, label_votes, read_dataset,
                     read_params_file, read_priors_file, write_dataset,
                     write_params_file, write_priors_file)
from .dpln import dpln_cdf, dpln_fit, dpln_logpdf, dpln_sample
from .dynamics import StateVector, solve_trajectory
from .estimation import (FanVisibilityFit, SiteVisibilityFit, StoryFit,
                         estimate_cfan, estimate_cnonfan, estimate_rho,
                         fit_fan_visibility, fit_popularity_curves,
                         fit_site_visibility, fit_story_interest,
                         mean_fans_per_user)
from .gof import ks_bootstrap
from .likelihood import poisson_loglik
from .params import (ActivityFit, GlobalParams, LognormalPrior,
                     PopularityFitFront, PopularityFits, PopularityFitUpcoming,
                     StoryParams, SurfingParams)
from .prediction import (CorpusMetrics, Forecast, LaplaceError, MetricRow,
                         Reconstruction, confidence_interval, evaluate_corpus,
                         predict, reconstruct_state)
from .records import Phase, StoryRecord, VoteEvent, VoterClass, VoteStream
from .simulator import SimConfig, SimDataset, simulate_corpus, simulate_story
from .surfing import fraction_to_page, stopping_pdf
from .visibility import (class_visibility, visibility_browsing, visibility_fan,
                         visibility_nonfan)

__version__ = "0.1.0"

__all__ = [
    "ActivityFit", "CorpusMetrics", "CorpusSummary", "DiggClock", "FanGraph",
    "FanVisibilityFit", "Forecast", "GlobalParams", "LaplaceError",
    "LognormalPrior", "MetricRow", "Phase", "PopularityFitFront",
    "PopularityFitUpcoming", "PopularityFits", "RawVote", "Reconstruction",
    "SimConfig", "SimDataset", "SiteVisibilityFit", "StateVector", "StoryFit",
    "StoryParams", "StoryRecord", "SurfingParams", "VoteEvent", "VoteStream",
    "VoterClass", "adapt_digg2009", "class_visibility", "confidence_interval",
    "corpus_stats", "dpln_cdf", "dpln_fit", "dpln_logpdf", "dpln_sample",
    "estimate_active_users", "estimate_cfan", "estimate_cnonfan",
    "estimate_rho", "evaluate_corpus", "fit_activity_mixture",
    "fit_fan_visibility", "fit_popularity_curves", "fit_site_visibility",
    "fit_story_interest", "fraction_to_page", "ingest", "ks_bootstrap",
    "label_votes", "mean_fans_per_user", "poisson_loglik", "predict",
    "read_dataset", "read_params_file", "read_priors_file",
    "reconstruct_state", "simulate_corpus", "simulate_story",
    "solve_trajectory", "stopping_pdf", "visibility_browsing",
    "visibility_fan", "visibility_nonfan", "write_dataset",
    "write_params_file", "write_priors_file",
]
