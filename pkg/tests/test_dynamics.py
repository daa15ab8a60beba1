"""Rate-equation trajectories against closed forms and invariants.

With constant visibility the pool sizes have exact exponential solutions,
which pins the solver without any reference to its own machinery.
"""
import numpy as np
import pytest

from votedyn.dynamics import (StateVector, class_rates, initial_state,
                              ode_rhs, solve_trajectory)
from votedyn.params import (GlobalParams, PopularityFits, StoryParams,
                            SurfingParams)
from votedyn.records import VoterClass


def frontpage_story(r_s=0.3, r_f=0.1, r_n=0.004, s0=100, rho=0.0):
    """A story promoted at submission: submitter-fan visibility is exactly 1,
    so its pool is a textbook exponential decay."""
    sp = StoryParams(r_s, r_f, r_n, s0=s0, t_promotion=0.0)
    gp = GlobalParams(users=50_000.0, rho=rho)
    return sp, gp, PopularityFits()


def test_submitter_pool_closed_form():
    sp, gp, fits = frontpage_story()
    traj = solve_trajectory(sp, gp, fits, 24.0, rtol=1e-12, atol=1e-12)
    s24 = traj.state_at(24.0).s
    # 100 * exp(-0.16 * 24), computed independently
    assert s24 == pytest.approx(2.149360134508992, rel=1e-9)


def test_votes_are_rate_times_depleted_pool():
    # every pool exit either votes (fraction r) or leaves silently, so
    # v_s(t) = r_s * (s0 - s(t)) exactly
    sp, gp, fits = frontpage_story(r_s=0.47)
    traj = solve_trajectory(sp, gp, fits, 24.0, rtol=1e-11, atol=1e-11)
    for t in (0.5, 3.0, 12.0, 24.0):
        st = traj.state_at(t)
        assert st.v_s == pytest.approx(0.47 * (100.0 - st.s), rel=1e-8)


def test_initial_state_layout():
    sp = StoryParams(0.1, 0.1, 0.1, s0=77)
    gp = GlobalParams(users=1000.0)
    st = initial_state(sp, gp)
    assert (st.v_s, st.v_f, st.v_n) == (0.0, 0.0, 1.0)
    assert st.s == 77.0 and st.f == 0.0
    assert st.n == 1000.0 - 77.0 - 1.0
    assert st.votes == 1.0


def test_initial_state_rejects_oversized_fanbase():
    with pytest.raises(ValueError):
        initial_state(StoryParams(0.1, 0.1, 0.1, s0=1000),
                      GlobalParams(users=500.0))


def test_fan_transfer_conserves_combined_pool():
    """The recruitment flow moves users between the non-fan and other-fan
    pools, so with equal visibilities their sum decays as a single
    exponential no matter how large rho is."""
    sp = StoryParams(0.3, 0.1, 0.01, s0=50, t_promotion=None)
    gp = GlobalParams(users=20_000.0, rho=5e-4, p_other=1.0,
                      c_other_fan=1.0, c_nonfan=1.0)
    # p_other=1 makes browsing visibility exactly 1, matching the fans'
    fits = PopularityFits()
    traj = solve_trajectory(sp, gp, fits, 10.0, rtol=1e-11, atol=1e-11)
    pool0 = gp.users - 50.0 - 1.0
    for t in (1.0, 5.0, 10.0):
        st = traj.state_at(t)
        assert st.f + st.n == pytest.approx(pool0 * np.exp(-gp.omega * t),
                                            rel=1e-8)
        assert st.f > 0.0     # recruitment actually happened


def test_transfer_feeds_other_fan_votes():
    sp, gp, fits = frontpage_story(rho=0.0)
    sp2, gp2, _ = frontpage_story(rho=1e-4)
    quiet = solve_trajectory(sp, gp, fits, 24.0)
    busy = solve_trajectory(sp2, gp2, fits, 24.0)
    assert busy.state_at(24.0).v_f > quiet.state_at(24.0).v_f


def test_phase_switch_is_continuous():
    sp = StoryParams(0.3, 0.1, 0.005, s0=100, t_promotion=6.0)
    gp = GlobalParams(users=30_000.0)
    traj = solve_trajectory(sp, gp, PopularityFits(), 20.0)
    eps = 1e-9
    left = traj.states([6.0 - eps])[0]
    right = traj.states([6.0 + eps])[0]
    assert np.allclose(left, right, rtol=1e-6, atol=1e-6)


def test_monotone_votes_and_bounded_pools():
    sp = StoryParams(0.5, 0.2, 0.01, s0=300, t_promotion=9.0)
    gp = GlobalParams(users=40_000.0, rho=2e-5)
    traj = solve_trajectory(sp, gp, PopularityFits(), 30.0)
    t = np.linspace(0.0, 30.0, 500)
    ys = traj.states(t)
    votes = ys[:, :3]
    assert np.all(np.diff(votes, axis=0) >= -1e-9)
    assert np.all(ys[:, 3] <= 300.0 + 1e-9)
    assert np.all(ys[:, 3:] >= 0.0)
    total_pool = ys[:, 3] + ys[:, 4] + ys[:, 5]
    assert np.all(np.diff(total_pool) <= 1e-9)


def test_rates_match_trajectory_derivative():
    sp = StoryParams(0.3, 0.1, 0.01, s0=200, t_promotion=5.0)
    gp = GlobalParams(users=25_000.0, rho=1e-5)
    fits = PopularityFits()
    traj = solve_trajectory(sp, gp, fits, 20.0, rtol=1e-10, atol=1e-10)
    for t in (2.0, 7.0, 15.0):
        h = 1e-5
        fd = (traj.states([t + h])[0][:3] - traj.states([t - h])[0][:3]) / (2 * h)
        r = class_rates(t, traj.states([t])[0], sp, gp, fits)
        got = np.array([r[VoterClass.SUBMITTER_FAN], r[VoterClass.OTHER_FAN],
                        r[VoterClass.NON_FAN]])
        assert np.allclose(fd, got, rtol=1e-4)


def test_tolerance_refinement_converges():
    sp = StoryParams(0.4, 0.15, 0.008, s0=150, t_promotion=8.0)
    gp = GlobalParams(users=30_000.0, rho=3e-5)
    coarse = solve_trajectory(sp, gp, PopularityFits(), 24.0,
                              rtol=1e-6, atol=1e-6)
    fine = solve_trajectory(sp, gp, PopularityFits(), 24.0,
                            rtol=1e-11, atol=1e-11)
    yc = coarse.state_at(24.0).as_array()
    yf = fine.state_at(24.0).as_array()
    assert np.allclose(yc, yf, rtol=1e-5, atol=1e-5)


def test_out_of_range_times_rejected():
    sp, gp, fits = frontpage_story()
    traj = solve_trajectory(sp, gp, fits, 5.0)
    with pytest.raises(ValueError):
        traj.states([6.0])
    with pytest.raises(ValueError):
        traj.states([-0.1])


def test_state_vector_round_trip():
    st = StateVector(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    assert StateVector.from_array(st.as_array()) == st
