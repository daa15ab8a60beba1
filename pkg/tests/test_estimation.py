"""Calibration fits: link density, popularity curves, shared-parameter MLEs."""
import warnings

import numpy as np
import pytest

from votedyn.dpln import dpln_cdf
from votedyn.estimation import (LOG_R_BOUNDS, estimate_cfan, estimate_cnonfan,
                                estimate_rho, fit_fan_visibility,
                                fit_popularity_curves, fit_site_visibility,
                                fit_story_interest, mean_fans_per_user)
from votedyn.params import LognormalPrior
from votedyn.records import VoteStream, VoterClass

OMEGA, C_SUB = 0.16, 0.5


def _stream(sid, s_times=(), f_times=(), n_times=(), t_end=24.0,
            t_promotion=None, s0=100):
    times = {VoterClass.SUBMITTER_FAN: np.asarray(s_times, dtype=float),
             VoterClass.OTHER_FAN: np.asarray(f_times, dtype=float),
             VoterClass.NON_FAN: np.asarray(n_times, dtype=float)}
    return VoteStream(sid, times, float(t_end), t_promotion, s0)


# --------------------------------------------------------------------------
# fan-link density
# --------------------------------------------------------------------------

def test_mean_fans_per_user_reference_value():
    # sitewide census: 1.73M links over 258k users with fans, 56% of
    # voters have none
    assert mean_fans_per_user(1_731_658, 258_218, 0.56) == pytest.approx(
        4.298837337006636, rel=1e-12)


def test_estimate_rho_reference_value():
    assert estimate_rho(1_731_658, 258_218, 0.56, 248_000) == pytest.approx(
        1.7334021520188047e-05, rel=1e-12)


def test_density_input_validation():
    with pytest.raises(ValueError):
        mean_fans_per_user(10, 0, 0.5)
    with pytest.raises(ValueError):
        mean_fans_per_user(10, 5, 1.0)
    with pytest.raises(ValueError):
        estimate_rho(10, 5, 0.5, 0)


# --------------------------------------------------------------------------
# popularity-list rank curves
# --------------------------------------------------------------------------

FRONT_TRUE = (1.90, 2.50, 5.88, 0.16, 129.0)


def _front_samples(n=48):
    a, b, nu, sig, sd = FRONT_TRUE
    v = np.geomspace(120, 5000, n)
    return v, sd * (1.0 - dpln_cdf(v, a, b, nu, sig))


def _upcoming_samples():
    v = np.linspace(110, 800, 30)
    return v, np.exp(5.3 - 0.029 * v)


def test_popularity_fit_recovers_noiseless_curves():
    fits = fit_popularity_curves(_front_samples(), _upcoming_samples(),
                                 s_daily=129.0)
    f = fits.front
    assert (f.a, f.b, f.nu, f.sigma) == pytest.approx(FRONT_TRUE[:4], rel=1e-4)
    assert f.s_daily == 129.0
    assert fits.upcoming.c == pytest.approx(5.3, rel=1e-10)
    assert fits.upcoming.d == pytest.approx(0.029, rel=1e-10)


def test_popularity_fit_free_scale():
    v, rank = _front_samples()
    fits = fit_popularity_curves((v, rank), _upcoming_samples())
    f = fits.front
    pred = f.s_daily * (1.0 - dpln_cdf(v, f.a, f.b, f.nu, f.sigma))
    assert np.max(np.abs(pred / rank - 1.0)) < 1e-6
    assert f.s_daily == pytest.approx(129.0, rel=1e-3)


def test_upcoming_floor_excludes_low_vote_noise():
    uv, ur = _upcoming_samples()
    noisy_v = np.concatenate([[20.0, 50.0, 80.0], uv])
    noisy_r = np.concatenate([[2.0, 2.0, 2.0], ur])   # off-curve junk
    fits = fit_popularity_curves(_front_samples(), (noisy_v, noisy_r))
    assert fits.upcoming.c == pytest.approx(5.3, rel=1e-10)
    assert fits.upcoming.d == pytest.approx(0.029, rel=1e-10)


def test_popularity_fit_preconditions():
    v, rank = _front_samples(6)
    with pytest.raises(ValueError, match="at least 8 front"):
        fit_popularity_curves((v, rank), _upcoming_samples())
    v, rank = _front_samples()
    with pytest.raises(ValueError, match="above the vote floor"):
        fit_popularity_curves((v, rank), ([30.0, 40.0], [50.0, 40.0]))
    with pytest.raises(ValueError, match="positive"):
        fit_popularity_curves((v, -rank), _upcoming_samples())


# --------------------------------------------------------------------------
# submitter-fan subsystem (omega, c_submitter_fan)
# --------------------------------------------------------------------------

def _quantile_fan_stream(sid, s0, tp, t_end, r):
    """Events at exact quantiles of the closed-form fan-pool intensity."""
    lam = OMEGA * C_SUB
    n_pre = int(round(r * s0 * (1.0 - np.exp(-lam * tp))))
    s_tp = s0 * np.exp(-lam * tp)
    n_post = int(round(r * s_tp * (1.0 - np.exp(-OMEGA * (t_end - tp)))))
    u = (np.arange(n_pre) + 0.5) / n_pre
    pre = -np.log(1.0 - u * (1.0 - np.exp(-lam * tp))) / lam
    u = (np.arange(n_post) + 0.5) / n_post
    post = tp - np.log(1.0 - u * (1.0 - np.exp(-OMEGA * (t_end - tp)))) / OMEGA
    return _stream(sid, s_times=np.sort(np.concatenate([pre, post])),
                   t_end=t_end, t_promotion=float(tp), s0=s0)


def test_fan_visibility_recovers_known_parameters():
    streams = [_quantile_fan_stream("a", 900, 9.0, 24.0, 0.55),
               _quantile_fan_stream("b", 1400, 14.0, 24.0, 0.30),
               _quantile_fan_stream("c", 600, 5.0, 24.0, 0.80)]
    fit = fit_fan_visibility(streams)
    assert fit.omega == pytest.approx(OMEGA, rel=5e-3)
    assert fit.c_submitter_fan == pytest.approx(C_SUB, rel=5e-3)
    assert fit.r_submitter_fan["a"] == pytest.approx(0.55, rel=1e-2)
    assert fit.r_submitter_fan["b"] == pytest.approx(0.30, rel=1e-2)
    assert fit.r_submitter_fan["c"] == pytest.approx(0.80, rel=1e-2)
    assert np.isfinite(fit.loglik)
    assert fit.trace == sorted(fit.trace, reverse=True)


def test_fan_visibility_needs_votes():
    with pytest.raises(ValueError, match="no stories"):
        fit_fan_visibility([_stream("x", t_promotion=4.0)])


# --------------------------------------------------------------------------
# site visibility (loose: sharp recovery is exercised at corpus scale in
# the acceptance suite)
# --------------------------------------------------------------------------

def test_site_visibility_structure(small_corpus, small_cfg):
    streams = [VoteStream.from_record(s, upto=26.0)
               for s in small_corpus.stories]
    fit = fit_site_visibility(streams, small_cfg.fits, small_cfg.gp)
    assert 0.1 < fit.surfing.mu < 5.0
    assert 0.05 < fit.surfing.lam < 20.0
    assert 0.0 <= fit.p_other <= 0.5
    assert set(fit.r_nonfan) == {s.story_id for s in small_corpus.stories}
    assert all(v > 0 for v in fit.r_nonfan.values())
    rel = [abs(fit.r_nonfan[sid] / small_corpus.truth[sid].r_nonfan - 1.0)
           for sid in fit.r_nonfan]
    assert np.median(rel) < 0.6
    assert fit.trace == sorted(fit.trace, reverse=True)


def test_site_visibility_needs_front_votes():
    with pytest.raises(ValueError, match="no promoted stories"):
        fit_site_visibility([_stream("x", n_times=[1.0, 2.0])],
                            None, None)


# --------------------------------------------------------------------------
# friends-interface attention factors
# --------------------------------------------------------------------------

def test_cfan_rate_ratio():
    st = _stream("a", f_times=[3.2, 3.5, 3.9, 4.0, 4.1, 4.2, 4.3, 4.6, 4.9],
                 t_promotion=4.0)
    # pre-hour [3, 4): 3 votes; post-hour [4, 5): 6 (t = tp counts as post)
    assert estimate_cfan([st]) == pytest.approx(0.5)


def test_cfan_edge_cases():
    assert estimate_cfan([_stream("a", f_times=[3.5], t_promotion=4.0)]) == 1.0
    assert estimate_cfan([_stream("a", t_promotion=4.0)]) == 0.0
    # clamp: busier before promotion than after
    st = _stream("a", f_times=[3.1, 3.2, 3.3, 4.5], t_promotion=4.0)
    assert estimate_cfan([st]) == 1.0
    # unpromoted stories are ignored
    st2 = _stream("b", f_times=[1.0, 2.0, 3.0])
    assert estimate_cfan([st2]) == 0.0


def test_cnonfan_scales_inversely_with_r(small_corpus, small_cfg):
    streams = [VoteStream.from_record(s, upto=26.0)
               for s in small_corpus.stories]
    r = {s.story_id: small_corpus.truth[s.story_id].r_nonfan
         for s in small_corpus.stories}
    c1 = estimate_cnonfan(streams, small_cfg.fits, small_cfg.gp, r)
    c2 = estimate_cnonfan(streams, small_cfg.fits, small_cfg.gp,
                          {k: 2.0 * v for k, v in r.items()})
    assert 0.0 < c2 < c1 <= 1.0
    assert c1 == pytest.approx(2.0 * c2, rel=1e-9)


def test_cnonfan_needs_exposure(small_corpus, small_cfg):
    streams = [VoteStream.from_record(s, upto=26.0)
               for s in small_corpus.stories]
    with pytest.raises(ValueError, match="no upcoming exposure"):
        estimate_cnonfan(streams, small_cfg.fits, small_cfg.gp, {})


# --------------------------------------------------------------------------
# per-story interestingness
# --------------------------------------------------------------------------

def test_story_fit_reasonable_on_simulated_story(small_corpus, small_cfg):
    st = VoteStream.from_record(small_corpus.stories[1], upto=26.0)
    truth = small_corpus.truth[st.story_id]
    fit = fit_story_interest(st, small_cfg.gp, small_cfg.fits)
    assert fit.converged
    assert fit.at_bound == (False, False, False)
    assert fit.n_events == sum(len(v) for v in st.times.values())
    for got, want in [(fit.story.r_submitter_fan, truth.r_submitter_fan),
                      (fit.story.r_other_fan, truth.r_other_fan),
                      (fit.story.r_nonfan, truth.r_nonfan)]:
        assert want / 2.5 < got < want * 2.5


def test_story_fit_tight_priors_pin_the_estimate(small_corpus, small_cfg):
    st = VoteStream.from_record(small_corpus.stories[1], upto=26.0)
    tight = {VoterClass.SUBMITTER_FAN: LognormalPrior(np.log(0.22), 1e-3),
             VoterClass.OTHER_FAN: LognormalPrior(np.log(0.07), 1e-3),
             VoterClass.NON_FAN: LognormalPrior(np.log(0.004), 1e-3)}
    fit = fit_story_interest(st, small_cfg.gp, small_cfg.fits,
                             priors=tight)
    assert fit.story.r_submitter_fan == pytest.approx(0.22, rel=1e-2)
    assert fit.story.r_other_fan == pytest.approx(0.07, rel=1e-2)
    assert fit.story.r_nonfan == pytest.approx(0.004, rel=1e-2)


def test_story_fit_flags_box_edge(small_cfg):
    st = _stream("starved", s_times=[0.5, 1.0, 2.0, 3.5], t_end=10.0, s0=80)
    with pytest.warns(UserWarning, match="pinned at the box edge"):
        fit = fit_story_interest(st, small_cfg.gp, small_cfg.fits)
    assert fit.at_bound[1] and fit.at_bound[2]
    assert fit.story.r_other_fan == pytest.approx(np.exp(LOG_R_BOUNDS[0]))


@pytest.mark.filterwarnings("ignore:.*pinned at the box edge.*")
def test_story_fit_upto_truncates_events(small_corpus, small_cfg):
    st = VoteStream.from_record(small_corpus.stories[0], upto=26.0)
    full = fit_story_interest(st, small_cfg.gp, small_cfg.fits)
    half = fit_story_interest(st, small_cfg.gp, small_cfg.fits, upto=6.0)
    assert half.n_events < full.n_events
    assert half.n_events == sum(int((v <= 6.0).sum())
                                for v in st.times.values())
