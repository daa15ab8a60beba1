"""Shared fixtures: small simulated corpora and a raw-CSV dataset builder."""
import numpy as np
import pytest
from collections import defaultdict

from votedyn.dataio import (FRIENDS_HEADER, PROMOTIONS_HEADER, VOTES_HEADER,
                            _write_rows)
from votedyn.params import (GlobalParams, LognormalPrior, PopularityFitFront,
                            PopularityFits)
from votedyn.records import VoterClass
from votedyn.simulator import SimConfig, simulate_corpus


def small_sim_config(n_stories=6, seed=3, **overrides):
    gp = GlobalParams(users=20000.0, rho=1.0 / 20000)
    priors = {VoterClass.SUBMITTER_FAN: LognormalPrior(np.log(0.3), 0.4),
              VoterClass.OTHER_FAN: LognormalPrior(np.log(0.1), 0.3),
              VoterClass.NON_FAN: LognormalPrior(np.log(0.005), 0.4)}
    kw = dict(gp=gp, n_stories=n_stories, story_priors=priors,
              fits=PopularityFits(front=PopularityFitFront(nu=7.5)),
              promote_delay=8.0, s0=150, t_end=26.0, mode="agent", seed=seed)
    kw.update(overrides)
    return SimConfig(**kw)


@pytest.fixture(scope="session")
def small_cfg():
    return small_sim_config()


@pytest.fixture(scope="session")
def small_corpus(small_cfg):
    """Six simulated stories, promoted at 8 Digg hours, ~600 votes."""
    return simulate_corpus(small_cfg)


def synthesize_raw_dataset(outdir, n_stories=6, seed=0, pool_size=4000,
                           stagger_hours=6.0, cfg=None):
    """Dress a simulated corpus up as raw CSVs plus a fan graph whose
    ingest-labeling reproduces the simulated vote classes.

    Submitter-fan votes add an edge voter -> submitter (class precedence
    makes extra edges harmless).  Other-fan votes add an edge to the latest
    earlier non-submitter voter, checked against retroactively breaking any
    non-fan label already assigned.  Non-fan votes reject candidates that
    follow the submitter or any earlier voter.  Filler fans pad each
    submitter to the simulated s0, and user ids are drawn from a
    lognormal-weighted pool so the activity histogram is not degenerate.
    """
    if cfg is None:
        cfg = small_sim_config(n_stories=n_stories, seed=seed)
    ds = simulate_corpus(cfg)
    rng = np.random.default_rng(seed + 1)
    users = np.array([f"u{i:05d}" for i in range(pool_size)])
    weights = rng.lognormal(0.0, 1.5, size=pool_size)
    weights /= weights.sum()

    follows = defaultdict(set)
    edges = []
    n_votes_of = defaultdict(list)   # user -> [(story idx, vote idx)]
    story_voter_order = []

    def add_edge(fan, followee):
        if followee not in follows[fan]:
            follows[fan].add(followee)
            edges.append((fan, followee))

    def draw_user(exclude, forbid_followees):
        while True:
            u = str(rng.choice(users, p=weights))
            if u in exclude or follows[u] & forbid_followees:
                continue
            return u

    def edge_safe(fan, followee):
        # would fan -> followee retro-break one of fan's non-fan labels?
        for (k, i) in n_votes_of.get(fan, ()):
            if followee in story_voter_order[k][:i]:
                return False
        return True

    base_wall = 1_600_000_000.0
    votes_rows, promo_rows = [], []
    for k, story in enumerate(ds.stories):
        sub = f"sub{k:03d}"
        submit_wall = base_wall + k * stagger_hours * 3600.0
        used = {sub}
        order = [sub]
        votes_rows.append((story.story_id, sub, submit_wall))
        for i, ev in enumerate(story.votes[1:], start=1):
            earlier = set(order)
            if ev.voter_class is VoterClass.SUBMITTER_FAN:
                u = draw_user(used, frozenset())
                add_edge(u, sub)
            elif ev.voter_class is VoterClass.OTHER_FAN:
                anchors = order[1:]
                u = None
                if anchors:
                    for _ in range(200):
                        cand = draw_user(used, frozenset({sub}))
                        if follows[cand] & set(anchors):
                            u = cand
                            break
                        anchor = next((x for x in reversed(anchors)
                                       if edge_safe(cand, x)), None)
                        if anchor is not None:
                            u = cand
                            add_edge(u, anchor)
                            break
                if u is None:
                    # fan vote with no usable anchor (right after
                    # submission): park it as a submitter fan
                    u = draw_user(used, frozenset())
                    add_edge(u, sub)
            else:
                u = draw_user(used, frozenset({sub}) | earlier)
                n_votes_of[u].append((k, i))
            used.add(u)
            order.append(u)
            votes_rows.append((story.story_id, u,
                               submit_wall + ev.t * 3600.0))
        story_voter_order.append(order)
        promo_rows.append((story.story_id,
                           submit_wall + story.t_promotion * 3600.0))
        n_s_fans = sum(1 for _f, t in edges if t == sub)
        for _ in range(int(story.s0) - n_s_fans):
            u = draw_user(used, frozenset())
            add_edge(u, sub)
            used.add(u)

    outdir.mkdir(parents=True, exist_ok=True)
    _write_rows(outdir / "votes.csv", VOTES_HEADER,
                ((s, u, repr(float(w))) for s, u, w in votes_rows))
    _write_rows(outdir / "friends.csv", FRIENDS_HEADER, sorted(edges))
    _write_rows(outdir / "promotions.csv", PROMOTIONS_HEADER,
                ((s, repr(float(w))) for s, w in promo_rows))
    return ds


@pytest.fixture(scope="session")
def raw_dataset(tmp_path_factory):
    """Raw-CSV dataset (votes/friends/promotions) with simulated truth."""
    out = tmp_path_factory.mktemp("raw")
    ds = synthesize_raw_dataset(out, n_stories=6, seed=5)
    return out, ds
