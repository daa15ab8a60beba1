"""Stochastic vote-stream generation: the ground-truth oracle for estimators."""
from __future__ import annotations

import typing
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _nbcore as nb
from .params import (GlobalParams, LognormalPrior, PopularityFits, StoryParams,
                     default_priors, digg2009_fits)
from .records import StoryRecord, VoteEvent, VoterClass

_CODE2CLASS = {code: cls for cls, code in nb.CLASS_CODE.items()}
_NO_COUNTS = np.empty(0, dtype=np.int64)

#: seconds of wall clock per Digg hour in simulated datasets (a site running
#: exactly at the reference pace, so the Digg clock is the identity map)
WALL_SECONDS_PER_DIGG_HOUR = 3600.0


@dataclass
class SimConfig:
    """Corpus-level simulation settings.

    Exactly one promotion rule may be active: ``promote_threshold`` promotes
    at a vote count, ``promote_delay`` at a fixed Digg-hour offset; both None
    leaves stories in the upcoming queue forever.  ``fan_counts`` switches the
    per-vote fan batch from the constant-mean model to draws from an empirical
    fan-count sample (which then also supplies each submitter's s0).
    """

    gp: GlobalParams
    n_stories: int
    story_priors: dict[VoterClass, LognormalPrior] = field(
        default_factory=default_priors)
    fits: PopularityFits = field(default_factory=digg2009_fits)
    promote_threshold: float | None = None
    promote_delay: float | None = None
    fan_counts: np.ndarray | None = None
    s0: int | typing.Sequence[int] = 100
    t_end: float = 48.0
    mode: str = "agent"
    seed: int = 0
    max_events: int = 500_000

    def __post_init__(self):
        if self.n_stories < 1:
            raise ValueError("n_stories must be at least 1")
        if self.promote_threshold is not None and self.promote_delay is not None:
            raise ValueError("choose one promotion rule, not both")
        if self.promote_threshold is not None and self.promote_threshold < 1:
            raise ValueError("promotion threshold must be at least 1 vote")
        if self.mode not in ("agent", "mean_field"):
            raise ValueError(f"unknown simulation mode {self.mode!r}")
        if not np.isscalar(self.s0) and len(self.s0) != self.n_stories:
            raise ValueError("per-story s0 must have one value per story")


@dataclass
class SimDataset:
    """A simulated corpus plus the ground truth that generated it."""

    stories: list[StoryRecord]
    truth: dict[str, StoryParams]
    gp: GlobalParams
    priors: dict[VoterClass, LognormalPrior]
    fan_summary: dict


def simulate_story(sp: StoryParams, gp: GlobalParams, *, mode: str = "agent",
                   seed: int = 0, fits: PopularityFits | None = None,
                   t_end: float = 24.0, threshold: float | None = None,
                   fan_counts: np.ndarray | None = None,
                   max_events: int = 500_000,
                   story_id: str = "sim") -> StoryRecord:
    """Simulate one story's labeled vote stream.

    ``sp.t_promotion`` (if set) acts as a fixed promotion time; otherwise
    ``threshold`` (if set) promotes at that total vote count; otherwise the
    story never leaves the upcoming queue.  Agent mode draws every user's
    visit/see/vote chain (aggregated exactly over exchangeable pools);
    mean_field mode thins vote events from the rate equations with
    deterministic pool depletion between events.
    """
    if sp.t_promotion is not None and threshold is not None:
        raise ValueError("fixed promotion time and vote threshold both set")
    fits = fits if fits is not None else digg2009_fits()
    theta = nb.pack_theta(sp, gp, fits)
    counts = (_NO_COUNTS if fan_counts is None
              else np.ascontiguousarray(fan_counts, dtype=np.int64))
    out_t = np.empty(max_events)
    out_c = np.empty(max_events, dtype=np.int64)
    kernel = nb.sim_agent if mode == "agent" else nb.sim_meanfield
    if mode not in ("agent", "mean_field"):
        raise ValueError(f"unknown simulation mode {mode!r}")
    thr = -1.0 if threshold is None else float(threshold)
    n_ev, tp = kernel(theta, float(t_end), int(seed), thr, counts, out_t, out_c)
    if n_ev >= max_events:
        warnings.warn(f"story {story_id}: event buffer full at {max_events}; "
                      "stream truncated")

    submitter = f"{story_id}.sub"
    votes = [VoteEvent(voter_id=submitter, wall_time=0.0, t=0.0,
                       voter_class=VoterClass.NON_FAN)]
    for i in range(n_ev):
        t = float(out_t[i])
        votes.append(VoteEvent(voter_id=f"{story_id}.v{i + 1}",
                               wall_time=t * WALL_SECONDS_PER_DIGG_HOUR,
                               t=t, voter_class=_CODE2CLASS[int(out_c[i])]))
    t_promo = float(tp) if tp >= 0.0 else None
    return StoryRecord(
        story_id=story_id, submitter_id=submitter, votes=votes,
        t_promotion=t_promo,
        promotion_wall_time=(None if t_promo is None
                             else t_promo * WALL_SECONDS_PER_DIGG_HOUR),
        s0=int(sp.s0))


def simulate_corpus(cfg: SimConfig) -> SimDataset:
    """Simulate ``cfg.n_stories`` independent stories with drawn parameters.

    Each story's interestingness triple is drawn from the configured priors
    (clipped to 1); all randomness descends from ``cfg.seed`` through a seed
    tree, so identical configs give bit-identical datasets.
    """
    master = np.random.SeedSequence(cfg.seed)
    draw_key, *story_keys = master.spawn(cfg.n_stories + 1)
    rng = np.random.default_rng(draw_key)

    width = max(4, len(str(cfg.n_stories - 1)))
    stories: list[StoryRecord] = []
    truth: dict[str, StoryParams] = {}
    for i in range(cfg.n_stories):
        if cfg.fan_counts is not None:
            s0 = int(rng.choice(cfg.fan_counts))
        elif np.isscalar(cfg.s0):
            s0 = int(cfg.s0)
        else:
            s0 = int(cfg.s0[i])
        r = {c: float(min(p.sample(rng), 1.0))
             for c, p in cfg.story_priors.items()}
        sp = StoryParams(r[VoterClass.SUBMITTER_FAN], r[VoterClass.OTHER_FAN],
                         r[VoterClass.NON_FAN], s0=s0,
                         t_promotion=cfg.promote_delay)
        sid = f"story_{i:0{width}d}"
        seed = int(story_keys[i].generate_state(1, dtype=np.uint32)[0])
        rec = simulate_story(sp, cfg.gp, mode=cfg.mode, seed=seed,
                             fits=cfg.fits, t_end=cfg.t_end,
                             threshold=cfg.promote_threshold,
                             fan_counts=cfg.fan_counts,
                             max_events=cfg.max_events, story_id=sid)
        stories.append(rec)
        truth[sid] = sp

    if cfg.fan_counts is not None:
        fan_summary = {"model": "empirical", "users": cfg.gp.users,
                       "mean_fans": float(np.mean(cfg.fan_counts)),
                       "sample_size": int(np.asarray(cfg.fan_counts).size)}
    else:
        fan_summary = {"model": "constant-mean", "users": cfg.gp.users,
                       "mean_fans": cfg.gp.rho * (cfg.gp.users - 1.0)}
    return SimDataset(stories=stories, truth=truth, gp=cfg.gp,
                      priors=dict(cfg.story_priors), fan_summary=fan_summary)
