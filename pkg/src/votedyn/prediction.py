"""Forward forecasting: state reconstruction, point predictions, Laplace intervals."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _nbcore as nb
from .dynamics import IF, IN, IS, IV_F, IV_N, IV_S, StateVector, _phase_visibilities
from .estimation import StoryFit, fit_story_interest, story_objective
from .params import GlobalParams, LognormalPrior, PopularityFits, StoryParams
from .records import Phase, VoterClass, VoteStream

#: the vote-rate estimate looks back at least 15 minutes of Digg time ...
MIN_RATE_WINDOW = 0.25
#: ... and widens until it covers at least this many votes of the class
MIN_RATE_VOTES = 5

_CLS_ORDER = (VoterClass.SUBMITTER_FAN, VoterClass.OTHER_FAN, VoterClass.NON_FAN)


class LaplaceError(RuntimeError):
    """The curvature matrix at the fitted point is not negative definite."""

    def __init__(self, eigenvalues):
        self.eigenvalues = np.asarray(eigenvalues)
        super().__init__(
            "log-posterior curvature is not negative definite at the optimum "
            f"(eigenvalues {self.eigenvalues}); not a clean interior maximum")


@dataclass
class Reconstruction:
    """Model state inferred from the observed stream at one instant."""

    state: StateVector
    model_fallback: dict[VoterClass, bool]   # True: pool taken from trajectory
    rate_window: dict[VoterClass, float]     # Digg-hours the rate averaged over


@dataclass
class Forecast:
    made_at: float
    horizon: float
    predicted: dict[VoterClass, float]
    r_hat: StoryParams
    fit: StoryFit
    reconstruction: Reconstruction
    level: float | None = None
    interval: dict[VoterClass, tuple[float, float]] | None = None
    interval_total: tuple[float, float] | None = None
    covariance: np.ndarray | None = None

    @property
    def predicted_total(self) -> float:
        return sum(self.predicted.values())


def _class_rate(times: np.ndarray, at: float, phase_start: float):
    """Observed vote rate of one class just before ``at``.

    Averages over the smallest window ending at ``at`` that spans at least
    15 Digg-minutes and contains at least the 5 previous votes, never
    reaching back past ``phase_start`` (rates must not mix the two phases).
    Returns (rate, window); rate 0 signals "no usable votes".
    """
    avail = at - phase_start
    if avail <= 0:
        return 0.0, 0.0
    times = times[(times >= phase_start) & (times <= at)]
    if times.size == 0:
        return 0.0, min(MIN_RATE_WINDOW, avail)
    w = MIN_RATE_WINDOW
    if times.size >= MIN_RATE_VOTES:
        w = max(w, at - times[-MIN_RATE_VOTES])
    else:
        w = avail
    w = min(w, avail)
    n = times.size - np.searchsorted(times, at - w, side="left")
    return n / w, w


def reconstruct_state(stream: VoteStream, at: float, sp: StoryParams,
                      gp: GlobalParams, fits: PopularityFits,
                      h_max: float = 0.02) -> Reconstruction:
    """Infer the full model state at ``at`` from the observed votes.

    Vote counts come straight from the data.  Pools are recovered by
    inverting each class's rate equation, pool = rate / (omega * r * P);
    after promotion only front-page votes enter the rate estimate, and at
    the promotion instant the upcoming-phase rates and visibilities are
    used (the state just being carried across the phase boundary).  A class
    with no usable rate falls back to the model-solved pool, flagged.
    """
    tp = sp.t_promotion
    if at <= 0:
        raise ValueError("reconstruction time must be positive")
    front = tp is not None and at > tp
    phase = Phase.FRONT if front else Phase.UPCOMING
    phase_start = tp if front else 0.0

    # observed cumulative counts (the submitter's own vote rides with v_n)
    counts = {c: float(stream.times[c][stream.times[c] <= at].size)
              for c in _CLS_ORDER}
    v = counts[VoterClass.SUBMITTER_FAN] + counts[VoterClass.OTHER_FAN] \
        + counts[VoterClass.NON_FAN] + 1.0
    p_vis = dict(zip(_CLS_ORDER, _phase_visibilities(at, v, phase, sp, gp, fits)))

    pool_cap = {VoterClass.SUBMITTER_FAN: float(sp.s0),
                VoterClass.OTHER_FAN: gp.users - sp.s0 - 1.0,
                VoterClass.NON_FAN: gp.users - sp.s0 - 1.0}
    pools: dict[VoterClass, float] = {}
    fallback: dict[VoterClass, bool] = {}
    windows: dict[VoterClass, float] = {}
    model_y = None
    for cls in _CLS_ORDER:
        if front:
            use = stream.times[cls][stream.times[cls] >= tp]
        else:
            # at the promotion instant, votes stamped exactly t_promotion
            # are already front-page votes: keep the inversion upcoming-pure
            hi = at if tp is None or at < tp else np.nextafter(tp, 0.0)
            use = stream.times[cls][stream.times[cls] <= hi]
        rate, w = _class_rate(use, at, phase_start)
        windows[cls] = w
        denom = gp.omega * sp.r(cls) * p_vis[cls]
        if rate > 0 and denom > 0:
            pools[cls] = min(rate / denom, pool_cap[cls])
            fallback[cls] = False
        else:
            if model_y is None:
                theta = nb.pack_theta(sp, gp, fits)
                y0 = np.array([0.0, 0.0, 1.0, float(sp.s0), 0.0,
                               gp.users - sp.s0 - 1.0])
                model_y = nb.solve_states(theta, y0, 0.0,
                                          np.array([at]), h_max)[0]
            pools[cls] = float(model_y[{VoterClass.SUBMITTER_FAN: IS,
                                        VoterClass.OTHER_FAN: IF,
                                        VoterClass.NON_FAN: IN}[cls]])
            fallback[cls] = True

    state = StateVector(v_s=counts[VoterClass.SUBMITTER_FAN],
                        v_f=counts[VoterClass.OTHER_FAN],
                        v_n=counts[VoterClass.NON_FAN] + 1.0,
                        s=pools[VoterClass.SUBMITTER_FAN],
                        f=pools[VoterClass.OTHER_FAN],
                        n=pools[VoterClass.NON_FAN])
    return Reconstruction(state=state, model_fallback=fallback,
                          rate_window=windows)


def _forward_counts(theta, y0, made_at: float, horizon: float, h_max: float):
    y = nb.solve_states(theta, y0, float(made_at), np.array([float(horizon)]),
                        h_max)[0]
    return {VoterClass.SUBMITTER_FAN: float(y[IV_S]),
            VoterClass.OTHER_FAN: float(y[IV_F]),
            VoterClass.NON_FAN: float(y[IV_N])}


def predict(stream: VoteStream, made_at: float, horizon: float,
            gp: GlobalParams, fits: PopularityFits,
            priors: dict[VoterClass, LognormalPrior] | None = None, *,
            story_fit: StoryFit | None = None,
            h_max: float = 0.02) -> Forecast:
    """Point forecast of per-class vote counts at ``horizon``.

    Fits the story's interestingness on votes up to ``made_at``, reconstructs
    the pools there, then solves the model forward.  Pass ``story_fit`` to
    reuse a fit (e.g. when predicting at several horizons).
    """
    if horizon < made_at:
        raise ValueError("horizon must not precede made_at")
    if story_fit is None:
        story_fit = fit_story_interest(stream, gp, fits, upto=made_at,
                                       priors=priors, h_max=h_max)
    sp = story_fit.story
    recon = reconstruct_state(stream, made_at, sp, gp, fits, h_max=h_max)
    theta = nb.pack_theta(sp, gp, fits)
    predicted = _forward_counts(theta, recon.state.as_array(), made_at,
                                horizon, h_max)
    return Forecast(made_at=made_at, horizon=horizon, predicted=predicted,
                    r_hat=sp, fit=story_fit, reconstruction=recon)


def _curvature(neg_log_post, x_hat: np.ndarray, step: float) -> np.ndarray:
    """Central-difference second-derivative matrix of the log-posterior."""
    f0 = -neg_log_post(x_hat)
    d = np.zeros((3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = step
        d[i, i] = (-neg_log_post(x_hat + ei) - 2.0 * f0
                   - neg_log_post(x_hat - ei)) / step**2
    for i in range(3):
        for j in range(i + 1, 3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = step
            ej[j] = step
            d[i, j] = d[j, i] = (
                -neg_log_post(x_hat + ei + ej) + neg_log_post(x_hat + ei - ej)
                + neg_log_post(x_hat - ei + ej) - neg_log_post(x_hat - ei - ej)
            ) / (4.0 * step**2)
    return d


def confidence_interval(stream: VoteStream, made_at: float, horizon: float,
                        gp: GlobalParams, fits: PopularityFits,
                        priors: dict[VoterClass, LognormalPrior] | None = None,
                        *, level: float = 0.95, n_samples: int = 1000,
                        seed: int = 0, story_fit: StoryFit | None = None,
                        h_max: float = 0.02) -> Forecast:
    """Forecast with per-class quantile intervals from the Laplace posterior.

    The log-posterior's curvature at the fitted log-r gives a normal
    approximation with covariance -D^-1; each of ``n_samples`` draws (clamped
    to r <= 1) is solved forward from the same reconstructed state and the
    (1 +- level)/2 sample quantiles bound the interval.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    if n_samples < 100:
        raise ValueError("need at least 100 posterior samples")
    fc = predict(stream, made_at, horizon, gp, fits, priors,
                 story_fit=story_fit, h_max=h_max)
    neg_log_post, _ = story_objective(stream, gp, fits, made_at, priors, h_max)

    d = _curvature(neg_log_post, fc.fit.log_r, 1e-3)
    if np.any(np.linalg.eigvalsh(d) >= 0):
        d = _curvature(neg_log_post, fc.fit.log_r, 1e-2)
    eig = np.linalg.eigvalsh(d)
    if np.any(eig >= 0):
        raise LaplaceError(eig)
    cov = np.linalg.inv(-d)
    cov = 0.5 * (cov + cov.T)

    rng = np.random.default_rng(seed)
    draws = rng.multivariate_normal(fc.fit.log_r, cov, size=n_samples)
    draws = np.minimum(draws, 0.0)       # r stays within (0, 1]

    theta = nb.pack_theta(fc.r_hat, gp, fits)
    y0 = fc.reconstruction.state.as_array()
    samples = np.empty((n_samples, 3))
    for k in range(n_samples):
        theta[nb.TH_RS:nb.TH_RN + 1] = np.exp(draws[k])
        y = nb.solve_states(theta, y0, float(made_at),
                            np.array([float(horizon)]), h_max)[0]
        samples[k] = (y[IV_S], y[IV_F], y[IV_N])

    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    interval = {}
    for idx, cls in enumerate(_CLS_ORDER):
        lo, hi = np.quantile(samples[:, idx], [lo_q, hi_q])
        interval[cls] = (float(lo), float(hi))
    lo_t, hi_t = np.quantile(samples.sum(axis=1), [lo_q, hi_q])
    fc.level = level
    fc.interval = interval
    fc.interval_total = (float(lo_t), float(hi_t))
    fc.covariance = cov
    return fc


@dataclass
class MetricRow:
    n: int
    median_abs_error: float
    median_rel_error: float
    spearman: float
    classification_error: float


@dataclass
class CorpusMetrics:
    """Evaluation metrics keyed by (group label, voter class)."""

    rows: dict[tuple, MetricRow]

    def row(self, group, cls: VoterClass) -> MetricRow:
        return self.rows[(group, cls)]


def evaluate_corpus(forecasts: list[Forecast],
                    actuals: list[dict[VoterClass, float]],
                    groups: list | None = None) -> CorpusMetrics:
    """Per-class forecast quality over a corpus.

    ``actuals`` holds each story's realized per-class counts at the forecast
    horizon, aligned with ``forecasts``.  ``groups`` (default: each
    forecast's made_at) partitions the corpus — pass e.g. "hours since
    promotion" labels to pool stories with different promotion times.
    Reports, per group and class: median absolute and relative error,
    Spearman rank correlation (average ranks on ties), and the error rate of
    classifying stories as above/below the group's median actual count.
    """
    if not forecasts:
        raise ValueError("empty forecast corpus")
    if len(actuals) != len(forecasts):
        raise ValueError("forecasts and actuals must align")
    if groups is None:
        groups = [fc.made_at for fc in forecasts]

    rows: dict[tuple, MetricRow] = {}
    for g in sorted(set(groups)):
        idx = [i for i, gi in enumerate(groups) if gi == g]
        for cls in _CLS_ORDER:
            pred = np.array([forecasts[i].predicted[cls] for i in idx])
            act = np.array([float(actuals[i][cls]) for i in idx])
            err = np.abs(pred - act)
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(act > 0, err / act, np.nan)
            rel_valid = rel[~np.isnan(rel)]
            med_rel = float(np.median(rel_valid)) if rel_valid.size else float("nan")
            thr = np.median(act)
            misclass = float(np.mean((pred > thr) != (act > thr)))
            if len(idx) > 1:
                with warnings.catch_warnings():
                    # constant columns have no rank correlation: report nan
                    warnings.simplefilter("ignore", stats.ConstantInputWarning)
                    rho = float(stats.spearmanr(pred, act).statistic)
            else:
                rho = float("nan")
            rows[(g, cls)] = MetricRow(
                n=len(idx),
                median_abs_error=float(np.median(err)),
                median_rel_error=med_rel,
                spearman=rho,
                classification_error=misclass)
    return CorpusMetrics(rows=rows)
