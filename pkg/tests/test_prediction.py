"""Forecasting: state reconstruction, horizon identity, intervals, metrics."""
import numpy as np
import pytest

from votedyn.params import LognormalPrior, StoryParams
from votedyn.prediction import (Forecast, LaplaceError, confidence_interval,
                                evaluate_corpus, predict, reconstruct_state)
from votedyn.records import VoteStream, VoterClass

S, F, N = (VoterClass.SUBMITTER_FAN, VoterClass.OTHER_FAN, VoterClass.NON_FAN)


@pytest.fixture(scope="module")
def streams(small_corpus):
    return [VoteStream.from_record(rec, upto=26.0)
            for rec in small_corpus.stories]


def _observed(stream, at):
    out = {c: float((stream.times[c] <= at).sum()) for c in VoterClass}
    out[N] += 1.0   # the submitter's own vote rides with the non-fans
    return out


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------

def test_reconstruction_pins_counts_to_data(streams, small_cfg):
    st = streams[0]
    sp = StoryParams(0.3, 0.1, 0.005, s0=st.s0, t_promotion=st.t_promotion)
    recon = reconstruct_state(st, 10.0, sp, small_cfg.gp, small_cfg.fits)
    obs = _observed(st, 10.0)
    assert recon.state.v_s == obs[S]
    assert recon.state.v_f == obs[F]
    assert recon.state.v_n == obs[N]


def test_reconstruction_caps_pools(streams, small_cfg):
    st = streams[0]
    # an absurdly small r turns the rate inversion into a huge pool: capped
    sp = StoryParams(1e-6, 1e-6, 1e-8, s0=st.s0, t_promotion=st.t_promotion)
    recon = reconstruct_state(st, 12.0, sp, small_cfg.gp, small_cfg.fits)
    cap_other = small_cfg.gp.users - st.s0 - 1.0
    assert recon.state.s <= st.s0 + 1e-9
    assert recon.state.f <= cap_other + 1e-9
    assert recon.state.n <= cap_other + 1e-9


def test_reconstruction_flags_model_fallback(small_cfg):
    # no fan votes at all: fan pools cannot be read off the data
    times = {S: np.array([]), F: np.array([]),
             N: np.array([2.0, 4.0, 5.0, 6.0, 7.0])}
    st = VoteStream("quiet", times, 12.0, 8.0, 50)
    sp = StoryParams(0.3, 0.1, 0.005, s0=50, t_promotion=8.0)
    recon = reconstruct_state(st, 7.5, sp, small_cfg.gp, small_cfg.fits)
    assert recon.model_fallback[S] and recon.model_fallback[F]
    assert not recon.model_fallback[N]
    assert recon.state.s > 0 and recon.state.f >= 0


def test_reconstruction_rejects_nonpositive_time(streams, small_cfg):
    sp = StoryParams(0.3, 0.1, 0.005, s0=150, t_promotion=8.0)
    with pytest.raises(ValueError, match="must be positive"):
        reconstruct_state(streams[0], 0.0, sp, small_cfg.gp, small_cfg.fits)


# --------------------------------------------------------------------------
# point forecasts
# --------------------------------------------------------------------------

def test_zero_lead_forecast_reproduces_the_observation(streams, small_cfg):
    for st in streams[:3]:
        at = st.t_promotion + 4.0
        fc = predict(st, at, at, small_cfg.gp, small_cfg.fits,
                     small_cfg.story_priors)
        obs = _observed(st, at)
        for cls in VoterClass:
            assert fc.predicted[cls] == pytest.approx(obs[cls], abs=1e-9)
        assert fc.predicted_total == pytest.approx(sum(obs.values()))


def test_forecast_grows_with_horizon(streams, small_cfg):
    st = streams[1]
    at = st.t_promotion + 2.0
    fit = None
    prev = -np.inf
    for hz in (at, at + 4.0, at + 10.0):
        fc = predict(st, at, hz, small_cfg.gp, small_cfg.fits,
                     small_cfg.story_priors, story_fit=fit)
        fit = fc.fit
        assert fc.predicted_total > prev or hz == at
        prev = fc.predicted_total


def test_forecast_rejects_backward_horizon(streams, small_cfg):
    with pytest.raises(ValueError, match="must not precede"):
        predict(streams[0], 10.0, 9.0, small_cfg.gp, small_cfg.fits)


def test_forecast_tracks_simulated_ground_truth(streams, small_corpus,
                                                small_cfg):
    """24h-out totals should land within a factor of two on most stories."""
    good = 0
    for st in streams:
        at = st.t_promotion + 2.0
        fc = predict(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                     small_cfg.story_priors)
        actual = sum(_observed(st, 26.0).values())
        if actual / 2.0 <= fc.predicted_total <= actual * 2.0:
            good += 1
    assert good >= 4


def test_forecast_reuses_supplied_fit(streams, small_cfg):
    st = streams[2]
    at = st.t_promotion + 2.0
    fc1 = predict(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                  small_cfg.story_priors)
    fc2 = predict(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                  story_fit=fc1.fit)
    assert fc2.predicted == fc1.predicted
    assert fc2.fit is fc1.fit


# --------------------------------------------------------------------------
# Laplace intervals
# --------------------------------------------------------------------------

def test_interval_brackets_the_point_forecast(streams, small_cfg):
    st = streams[0]
    at = st.t_promotion + 2.0
    fc = confidence_interval(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                             small_cfg.story_priors, n_samples=400, seed=1)
    assert fc.level == 0.95
    lo, hi = fc.interval_total
    assert lo <= fc.predicted_total <= hi
    for cls in VoterClass:
        clo, chi = fc.interval[cls]
        assert clo <= fc.predicted[cls] * (1 + 1e-9) and chi >= clo
    assert fc.covariance.shape == (3, 3)
    assert np.all(np.linalg.eigvalsh(fc.covariance) > 0)


def test_narrower_level_nests_inside_wider(streams, small_cfg):
    st = streams[3]
    at = st.t_promotion + 2.0
    kw = dict(n_samples=400, seed=2)
    fit = predict(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                  small_cfg.story_priors).fit
    mid = confidence_interval(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                              small_cfg.story_priors, level=0.5,
                              story_fit=fit, **kw)
    wide = confidence_interval(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                               small_cfg.story_priors, level=0.95,
                               story_fit=fit, **kw)
    assert wide.interval_total[0] <= mid.interval_total[0]
    assert mid.interval_total[1] <= wide.interval_total[1]


def test_interval_is_deterministic_in_the_seed(streams, small_cfg):
    st = streams[4]
    at = st.t_promotion + 2.0
    a = confidence_interval(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                            small_cfg.story_priors, n_samples=300, seed=7)
    b = confidence_interval(st, at, 26.0, small_cfg.gp, small_cfg.fits,
                            small_cfg.story_priors, n_samples=300, seed=7)
    assert a.interval_total == b.interval_total
    assert a.interval == b.interval


def test_interval_preconditions(streams, small_cfg):
    st = streams[0]
    with pytest.raises(ValueError, match="level"):
        confidence_interval(st, 10.0, 26.0, small_cfg.gp, small_cfg.fits,
                            level=1.0)
    with pytest.raises(ValueError, match="at least 100"):
        confidence_interval(st, 10.0, 26.0, small_cfg.gp, small_cfg.fits,
                            n_samples=50)


# --------------------------------------------------------------------------
# corpus metrics
# --------------------------------------------------------------------------

def _stub_forecast(made_at, predicted):
    return Forecast(made_at=made_at, horizon=made_at + 24.0,
                    predicted=predicted, r_hat=None, fit=None,
                    reconstruction=None)


def test_metrics_on_a_hand_checked_corpus():
    preds = [{S: 10.0, F: 4.0, N: 100.0},
             {S: 22.0, F: 6.0, N: 210.0},
             {S: 29.0, F: 9.0, N: 290.0},
             {S: 45.0, F: 12.0, N: 380.0}]
    acts = [{S: 12.0, F: 5.0, N: 120.0},
            {S: 20.0, F: 6.0, N: 200.0},
            {S: 30.0, F: 8.0, N: 310.0},
            {S: 40.0, F: 11.0, N: 400.0}]
    fcs = [_stub_forecast(2.0, p) for p in preds]
    m = evaluate_corpus(fcs, acts)
    row = m.row(2.0, S)
    assert row.n == 4
    # |errors| = 2, 2, 1, 5 -> median 2; rel = 1/6, 1/10, 1/30, 1/8
    assert row.median_abs_error == pytest.approx(2.0)
    assert row.median_rel_error == pytest.approx((1 / 10 + 1 / 8) / 2)
    assert row.spearman == pytest.approx(1.0)
    assert row.classification_error == 0.0
    # non-fan predictions are also perfectly ranked
    assert m.row(2.0, N).spearman == pytest.approx(1.0)


def test_metrics_spearman_detects_an_inversion():
    preds = [{S: 1.0, F: 1.0, N: 30.0}, {S: 2.0, F: 1.0, N: 20.0},
             {S: 3.0, F: 1.0, N: 10.0}]
    acts = [{S: 1.0, F: 1.0, N: 10.0}, {S: 2.0, F: 1.0, N: 20.0},
            {S: 3.0, F: 1.0, N: 30.0}]
    m = evaluate_corpus([_stub_forecast(0.0, p) for p in preds], acts)
    assert m.row(0.0, N).spearman == pytest.approx(-1.0)
    assert m.row(0.0, S).spearman == pytest.approx(1.0)


def test_metrics_relative_error_skips_zero_actuals():
    preds = [{S: 1.0, F: 0.0, N: 5.0}, {S: 2.0, F: 0.0, N: 8.0}]
    acts = [{S: 2.0, F: 0.0, N: 5.0}, {S: 2.0, F: 0.0, N: 10.0}]
    m = evaluate_corpus([_stub_forecast(1.0, p) for p in preds], acts)
    assert np.isnan(m.row(1.0, F).median_rel_error)
    assert m.row(1.0, N).median_rel_error == pytest.approx(0.1)


def test_metrics_group_partition():
    preds = [{S: 1.0, F: 1.0, N: 1.0}] * 4
    acts = [{S: 1.0, F: 1.0, N: 1.0}] * 4
    fcs = [_stub_forecast(float(i), p) for i, p in enumerate(preds)]
    m = evaluate_corpus(fcs, acts, groups=["a", "a", "b", "b"])
    assert {g for g, _ in m.rows} == {"a", "b"}
    assert m.row("a", S).n == 2
    # singleton groups have no rank correlation
    m1 = evaluate_corpus(fcs[:1], acts[:1])
    assert np.isnan(m1.row(0.0, S).spearman)


def test_metrics_alignment_errors():
    fc = _stub_forecast(0.0, {S: 1.0, F: 1.0, N: 1.0})
    with pytest.raises(ValueError, match="empty"):
        evaluate_corpus([], [])
    with pytest.raises(ValueError, match="align"):
        evaluate_corpus([fc], [])
