"""Calibration: site-wide parameter fits and per-story interestingness fits."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _nbcore as nb
from .dpln import dpln_cdf
from .params import (GlobalParams, LognormalPrior, PopularityFitFront,
                     PopularityFitUpcoming, PopularityFits, StoryParams,
                     SurfingParams)
from .records import VoterClass, VoteStream
from .surfing import fraction_to_page

# 8-point Gauss-Legendre on [0, 1]; integrates visibility over the smooth
# spans between consecutive votes (the observed vote count is constant there).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def mean_fans_per_user(total_fan_links, users_with_fans, fraction_zero_fans):
    """Average fan count over *all* users, observed and fan-less alike.

    The links table only covers users with at least one fan; the zero-fan
    fraction (measured on voters) scales the denominator up accordingly.
    """
    if users_with_fans <= 0:
        raise ValueError("users_with_fans must be positive")
    if not (0.0 <= fraction_zero_fans < 1.0):
        raise ValueError("fraction_zero_fans must lie in [0, 1)")
    return total_fan_links / (users_with_fans * (1.0 + fraction_zero_fans))


def estimate_rho(total_fan_links, users_with_fans, fraction_zero_fans,
                 active_users) -> float:
    """Link density: probability a random user is a fan of a random voter."""
    if active_users <= 0:
        raise ValueError("active_users must be positive")
    return mean_fans_per_user(total_fan_links, users_with_fans,
                              fraction_zero_fans) / active_users


# --------------------------------------------------------------------------
# popularity-curve fits
# --------------------------------------------------------------------------

def fit_popularity_curves(front_samples, upcoming_samples, *, s_daily=None,
                          upcoming_vote_floor=100.0) -> PopularityFits:
    """Least-squares fits of both popularity-list rank curves.

    ``front_samples``/``upcoming_samples``: (votes, rank) pairs observed on
    the respective list views.  Front ranks follow s_daily*(1 - dpln_cdf(v));
    upcoming ranks follow exp(c - d v), fitted only where v exceeds
    ``upcoming_vote_floor`` (below that the exponential form breaks down).
    Both fits act on log rank.  Pass ``s_daily`` to pin the promoted-stories
    scale instead of fitting it.
    """
    fv, fr = (np.asarray(a, dtype=float) for a in front_samples)
    if fv.size < 8:
        raise ValueError("need at least 8 front samples")
    if np.any(fr <= 0) or np.any(fv <= 0):
        raise ValueError("votes and ranks must be positive")
    log_r = np.log(fr)

    fit_scale = s_daily is None
    s_fixed = None if fit_scale else float(s_daily)

    def front_sse(th):
        a, b, sig = np.exp(th[0]), np.exp(th[1]), np.exp(th[3])
        s = np.exp(th[4]) if fit_scale else s_fixed
        if not (0.05 < a < 50 and 0.05 < b < 50 and 1e-3 < sig < 20):
            return 1e15
        tail = 1.0 - dpln_cdf(fv, a, b, th[2], sig)
        if np.any(tail <= 0):
            return 1e15
        resid = log_r - (np.log(s) + np.log(tail))
        return float(resid @ resid)

    x0 = np.array([np.log(2.0), np.log(2.5), np.log(np.median(fv) + 1.0),
                   np.log(0.5), np.log(fr.max() + 1.0)])
    if not fit_scale:
        x0 = x0[:4]
    res = minimize(front_sse, x0, method="Nelder-Mead",
                   options={"maxiter": 8000, "xatol": 1e-9, "fatol": 1e-13})
    a, b, sig = np.exp(res.x[0]), np.exp(res.x[1]), np.exp(res.x[3])
    s = np.exp(res.x[4]) if fit_scale else s_fixed
    front = PopularityFitFront(a=float(a), b=float(b), nu=float(res.x[2]),
                               sigma=float(sig), s_daily=float(s))

    uv, ur = (np.asarray(a, dtype=float) for a in upcoming_samples)
    keep = uv > upcoming_vote_floor
    if keep.sum() < 2:
        raise ValueError("not enough upcoming samples above the vote floor")
    # log rank = c - d v is linear: plain least squares
    slope, intercept = np.polyfit(uv[keep], np.log(ur[keep]), 1)
    upcoming = PopularityFitUpcoming(c=float(intercept), d=float(-slope))
    return PopularityFits(front=front, upcoming=upcoming)


# --------------------------------------------------------------------------
# submitter-fan subsystem: joint (omega, c_submitter_fan) likelihood
# --------------------------------------------------------------------------

@dataclass
class FanVisibilityFit:
    omega: float
    c_submitter_fan: float
    r_submitter_fan: dict[str, float]
    loglik: float
    trace: list[float] = field(default_factory=list)


def fit_fan_visibility(streams: list[VoteStream], *, x0=(0.16, 0.5),
                       max_window: float = 24.0) -> FanVisibilityFit:
    """Joint MLE of the visit rate omega and the upcoming fan factor.

    The submitter-fan pool has a closed-form trajectory (s0*exp(-omega*c*t)
    before promotion, exp(-omega*(t-tp)) decay after), so each story's
    likelihood is analytic and its interestingness profiles out as
    n / (s0 - S(T)).  The two shared parameters ride on different phases,
    which is what separates them (a ridge remains when one phase is sparse).
    """
    prepped = []
    for st in streams:
        times = st.times[VoterClass.SUBMITTER_FAN]
        tp = st.t_promotion
        t_end = min(st.t_end, (tp + max_window) if tp is not None else max_window)
        times = times[times <= t_end]
        if st.s0 <= 0 or times.size == 0:
            continue
        pre = times[times < tp] if tp is not None else times
        post = times[times >= tp] if tp is not None else times[:0]
        prepped.append((float(st.s0), tp, t_end, pre, post, times.size))
    if not prepped:
        raise ValueError("no stories with submitter-fan votes")

    trace: list[float] = []

    def nll(x):
        omega, c = np.exp(x[0]), np.exp(x[1])
        if not (1e-4 < omega < 100.0) or c > 1.0:
            return 1e15
        ll = 0.0
        for s0, tp, t_end, pre, post, n in prepped:
            if tp is None or t_end <= tp:
                s_end = s0 * np.exp(-omega * c * t_end)
            else:
                s_end = s0 * np.exp(-omega * c * tp - omega * (t_end - tp))
            seen = s0 - s_end
            if seen <= 0:
                return 1e15
            ll += -n + n * np.log(n) - n * np.log(seen)
            if pre.size:
                # log rate at an upcoming event: log(omega*c) + log S(t)
                ll += pre.size * (np.log(omega * c) + np.log(s0)) \
                    - omega * c * pre.sum()
            if post.size:
                log_s_tp = np.log(s0) - omega * c * tp
                ll += post.size * (np.log(omega) + log_s_tp) \
                    - omega * (post - tp).sum()
        if not trace or -ll < trace[-1]:
            trace.append(-ll)
        return -ll

    res = minimize(nll, np.log(np.asarray(x0, dtype=float)), method="Nelder-Mead",
                   options={"maxiter": 4000, "xatol": 1e-9, "fatol": 1e-11})
    omega, c = float(np.exp(res.x[0])), float(min(np.exp(res.x[1]), 1.0))

    r_hat: dict[str, float] = {}
    for st in streams:
        times = st.times[VoterClass.SUBMITTER_FAN]
        tp = st.t_promotion
        t_end = min(st.t_end, (tp + max_window) if tp is not None else max_window)
        n = int((times <= t_end).sum())
        if st.s0 <= 0:
            r_hat[st.story_id] = 0.0
            continue
        if tp is None or t_end <= tp:
            s_end = st.s0 * np.exp(-omega * c * t_end)
        else:
            s_end = st.s0 * np.exp(-omega * c * tp - omega * (t_end - tp))
        seen = st.s0 - s_end
        r_hat[st.story_id] = min(n / seen, 1.0) if seen > 0 else 0.0
    return FanVisibilityFit(omega=omega, c_submitter_fan=c,
                            r_submitter_fan=r_hat, loglik=float(-res.fun),
                            trace=trace)


# --------------------------------------------------------------------------
# site visibility from front-page non-fan votes
# --------------------------------------------------------------------------

@dataclass
class SiteVisibilityFit:
    surfing: SurfingParams
    p_other: float
    r_nonfan: dict[str, float]
    loglik: float
    trace: list[float] = field(default_factory=list)


def _spans_with_counts(st: VoteStream, lo: float, hi: float):
    """Constant-vote-count spans of [lo, hi]: Gauss-Legendre nodes + weights."""
    at = st.all_times
    cuts = np.unique(np.concatenate(([lo], at[(at > lo) & (at < hi)], [hi])))
    v_in_span = 1 + np.searchsorted(at, cuts[:-1], side="right")
    spans = np.diff(cuts)
    nodes_t = (cuts[:-1, None] + spans[:, None] * _GL_X[None, :]).ravel()
    nodes_w = (spans[:, None] * _GL_W[None, :]).ravel()
    nodes_v = np.repeat(np.maximum(v_in_span, 1), _GL_X.size).astype(float)
    return nodes_t, nodes_w, nodes_v


def _front_pop_pages(v, fits: PopularityFits):
    f = fits.front
    return 1.0 + f.s_daily * (1.0 - dpln_cdf(v, f.a, f.b, f.nu, f.sigma)) / 15.0


def _upcoming_pop_pages(v, fits: PopularityFits):
    u = fits.upcoming
    return 1.0 + np.exp(u.c - u.d * np.asarray(v, float)) / 15.0


def _browse(p_time, p_pop, mu, lam, p_other):
    sp = SurfingParams(mu, lam)
    return 1.0 - ((1.0 - fraction_to_page(p_time, sp))
                  * (1.0 - fraction_to_page(p_pop, sp))
                  * (1.0 - p_other))


def fit_site_visibility(streams: list[VoteStream], fits: PopularityFits,
                        gp: GlobalParams, *, window: float = 6.0,
                        x0=(0.92, 0.9, 0.05)) -> SiteVisibilityFit:
    """MLE of the surfing law and residual visibility from front-page votes.

    Non-fan votes on the front page arrive at rate
    omega * U * r_nonfan * P_browse(t, v_observed): early after promotion the
    non-fan pool is still approximately the whole site (N ~ U, hence the
    default 6-Digg-hour window), so the only story-specific unknown is the
    scale r_nonfan, which profiles out in closed form.  The shared shape
    parameters (mu, lam, p_other) are fit by a simplex search; the
    best-so-far trace is recorded for monotonicity checks.
    """
    prepped = []
    for st in streams:
        tp = st.t_promotion
        if tp is None:
            continue
        t_hi = min(st.t_end, tp + window)
        if t_hi <= tp:
            continue
        events = st.times[VoterClass.NON_FAN]
        events = events[(events >= tp) & (events <= t_hi)]
        if events.size == 0:
            continue
        nodes_t, nodes_w, nodes_v = _spans_with_counts(st, tp, t_hi)
        # events see the count just before themselves
        ev_v = np.maximum(st.observed_total(events) - 1, 1).astype(float)
        prepped.append((st.story_id, nodes_t - tp, nodes_w,
                        _front_pop_pages(nodes_v, fits), events - tp,
                        _front_pop_pages(ev_v, fits)))
    if not prepped:
        raise ValueError("no promoted stories with front-page non-fan votes")

    slices = []
    off_n = off_e = 0
    for _, tau_n, w_n, page_n, tau_e, page_e in prepped:
        slices.append((slice(off_n, off_n + tau_n.size),
                       slice(off_e, off_e + tau_e.size)))
        off_n += tau_n.size
        off_e += tau_e.size
    all_tau_n = np.concatenate([p[1] for p in prepped])
    all_w_n = np.concatenate([p[2] for p in prepped])
    all_page_n = np.concatenate([p[3] for p in prepped])
    all_tau_e = np.concatenate([p[4] for p in prepped])
    all_page_e = np.concatenate([p[5] for p in prepped])
    recency_n = gp.k_front * all_tau_n + 1.0
    recency_e = gp.k_front * all_tau_e + 1.0
    counts = np.array([sl_e.stop - sl_e.start for _, sl_e in slices], float)
    trace: list[float] = []

    def nll(x):
        mu, lam, p_other = np.exp(x)
        if not (1e-3 < mu < 100 and 1e-4 < lam < 1000) or p_other > 1.0:
            return 1e15
        g_nodes = _browse(recency_n, all_page_n, mu, lam, p_other)
        g_events = _browse(recency_e, all_page_e, mu, lam, p_other)
        if np.any(g_events <= 0):
            return 1e15
        log_g = np.log(g_events)
        ll = 0.0
        for (sl_n, sl_e), n in zip(slices, counts):
            big_g = float(all_w_n[sl_n] @ g_nodes[sl_n])
            ll += -n + n * np.log(n / big_g) + float(log_g[sl_e].sum())
        if not trace or -ll < trace[-1]:
            trace.append(-ll)
        return -ll

    res = minimize(nll, np.log(np.asarray(x0, dtype=float)), method="Nelder-Mead",
                   options={"maxiter": 4000, "xatol": 1e-9, "fatol": 1e-11})
    mu, lam, p_other = np.exp(res.x)
    p_other = float(min(p_other, 1.0))
    sp = SurfingParams(float(mu), float(lam))

    r_hat: dict[str, float] = {}
    g_nodes = _browse(recency_n, all_page_n, mu, lam, p_other)
    for (sid, *_), (sl_n, sl_e) in zip(prepped, slices):
        big_g = float(all_w_n[sl_n] @ g_nodes[sl_n])
        n = sl_e.stop - sl_e.start
        r_hat[sid] = n / (gp.omega * gp.users * big_g)
    return SiteVisibilityFit(surfing=sp, p_other=p_other, r_nonfan=r_hat,
                             loglik=float(-res.fun), trace=trace)


# --------------------------------------------------------------------------
# friends-interface attention factors
# --------------------------------------------------------------------------

def estimate_cfan(streams: list[VoteStream]) -> float:
    """Other-fan attention factor from the promotion-time rate jump.

    Aggregate other-fan vote rate over the Digg hour before promotion divided
    by the rate over the hour after (unit windows, so rates are counts);
    votes at the promotion instant count as post-promotion.  Clamped to [0,1].
    """
    pre = post = 0
    for st in streams:
        tp = st.t_promotion
        if tp is None:
            continue
        times = st.times[VoterClass.OTHER_FAN]
        pre += int(((times >= tp - 1.0) & (times < tp)).sum())
        post += int(((times >= tp) & (times < tp + 1.0)).sum())
    if post == 0:
        return 1.0 if pre > 0 else 0.0
    return min(pre / post, 1.0)


def estimate_cnonfan(streams: list[VoteStream], fits: PopularityFits,
                     gp: GlobalParams, r_nonfan: dict[str, float]) -> float:
    """Non-fan attention to the upcoming queue, by closed-form MLE.

    Upcoming non-fan votes arrive at c * omega * U * r_nonfan * P_browse;
    with each story's r_nonfan already fixed from its front-page votes, the
    shared factor's MLE is (total votes) / (total expected at c = 1).
    The browse visibility uses gp's surfing law and p_other (i.e. call this
    after fit_site_visibility and fold its result into gp).
    """
    n_total = 0.0
    expected_at_one = 0.0
    for st in streams:
        r = r_nonfan.get(st.story_id)
        if r is None or r <= 0:
            continue
        tp = st.t_promotion if st.t_promotion is not None else st.t_end
        tp = min(tp, st.t_end)
        if tp <= 0:
            continue
        events = st.times[VoterClass.NON_FAN]
        n_total += int((events < tp).sum())
        nodes_t, nodes_w, nodes_v = _spans_with_counts(st, 0.0, tp)
        g = _browse(gp.k_upcoming * nodes_t + 1.0,
                    _upcoming_pop_pages(nodes_v, fits),
                    gp.surfing.mu, gp.surfing.lam, gp.p_other)
        expected_at_one += gp.omega * gp.users * r * float(nodes_w @ g)
    if expected_at_one <= 0:
        raise ValueError("no upcoming exposure to estimate the non-fan factor from")
    return min(n_total / expected_at_one, 1.0)


# --------------------------------------------------------------------------
# per-story interestingness (full coupled model)
# --------------------------------------------------------------------------

@dataclass
class StoryFit:
    story: StoryParams
    log_r: np.ndarray            # fitted point in log-r space
    loglik: float                # data term + prior terms at the optimum
    converged: bool
    at_bound: tuple[bool, bool, bool]
    n_events: int


#: box for log r during fitting; the upper edge is the r <= 1 constraint
LOG_R_BOUNDS = (np.log(1e-8), 0.0)


def _stream_events(stream: VoteStream, upto: float):
    ts, cs = [], []
    for cls, code in nb.CLASS_CODE.items():
        t = stream.times[cls]
        t = t[t <= upto]
        ts.append(t)
        cs.append(np.full(t.size, code, dtype=np.int64))
    times = np.concatenate(ts)
    codes = np.concatenate(cs)
    order = np.argsort(times, kind="stable")
    return times[order], codes[order]


def story_objective(stream: VoteStream, gp: GlobalParams, fits: PopularityFits,
                    upto: float, priors: dict[VoterClass, LognormalPrior] | None,
                    h_max: float = 0.02):
    """Build the (negated) log-posterior over log-r for one story.

    The model trajectory is re-solved inside every call because the vote
    rates feed back through the accumulated votes.
    """
    ev_t, ev_c = _stream_events(stream, upto)
    tp = stream.t_promotion
    if tp is not None and tp > upto:
        tp = None  # promotion outside the fitting window plays no role
    base_sp = StoryParams(0.5, 0.5, 0.5, s0=stream.s0, t_promotion=tp)
    theta0 = nb.pack_theta(base_sp, gp, fits)
    pri = None
    if priors is not None:
        pri = [(priors[VoterClass.SUBMITTER_FAN]),
               (priors[VoterClass.OTHER_FAN]),
               (priors[VoterClass.NON_FAN])]

    def neg_log_post(x):
        th = theta0.copy()
        th[nb.TH_RS:nb.TH_RN + 1] = np.exp(x)
        ll = nb.story_loglik(th, ev_t, ev_c, float(upto), h_max)
        if pri is not None:
            ll += sum(p.logpdf(xi) for p, xi in zip(pri, x))
        return -ll

    return neg_log_post, ev_t.size


def fit_story_interest(stream: VoteStream, gp: GlobalParams,
                       fits: PopularityFits, *, upto: float | None = None,
                       priors: dict[VoterClass, LognormalPrior] | None = None,
                       x0: np.ndarray | None = None,
                       h_max: float = 0.02) -> StoryFit:
    """Fit the three interestingness values of one story.

    Maximum likelihood when ``priors`` is None, otherwise MAP with the priors
    acting as normal densities on log r.  The search runs in log-r space
    (simplex method) inside the box r in [1e-8, 1]; estimates pinned at the
    box edge are flagged in ``at_bound``.
    """
    upto = float(upto if upto is not None else stream.t_end)
    nll, n_events = story_objective(stream, gp, fits, upto, priors, h_max)
    if x0 is None:
        if priors is not None:
            x0 = np.array([priors[VoterClass.SUBMITTER_FAN].mu,
                           priors[VoterClass.OTHER_FAN].mu,
                           priors[VoterClass.NON_FAN].mu])
        else:
            x0 = np.log(np.array([0.03, 0.1, 2e-3]))
    lo, hi = LOG_R_BOUNDS
    x0 = np.clip(x0, lo + 1e-6, hi - 1e-6)
    res = minimize(nll, x0, method="Nelder-Mead",
                   bounds=[(lo, hi)] * 3,
                   options={"maxiter": 3000, "xatol": 1e-7, "fatol": 1e-9})
    x = np.clip(res.x, lo, hi)
    at_bound = tuple(bool(xi <= lo + 1e-9 or xi >= hi - 1e-9) for xi in x)
    if any(at_bound):
        warnings.warn(f"story {stream.story_id}: interestingness pinned at "
                      f"the box edge {at_bound}")
    r = np.exp(x)
    sp = StoryParams(float(r[0]), float(r[1]), float(r[2]), s0=stream.s0,
                     t_promotion=stream.t_promotion)
    return StoryFit(story=sp, log_r=x, loglik=float(-res.fun),
                    converged=bool(res.success), at_bound=at_bound,
                    n_events=n_events)
