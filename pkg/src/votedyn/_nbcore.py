"""Numba twins of the model core for hot loops (simulation, fitting, sampling).

Everything here mirrors the public numpy/scipy implementations; the test suite
pins the two against each other.  Parameters travel as a flat float64 vector
``theta`` (see ``pack_theta``), which numba digests without boxing overhead.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .params import GlobalParams, PopularityFits, StoryParams
from .records import VoterClass

# theta layout
(TH_OMEGA, TH_USERS, TH_MU, TH_LAM, TH_POTHER, TH_RHO, TH_KUP, TH_KFRONT,
 TH_CS, TH_CF, TH_CN, TH_A, TH_B, TH_NU, TH_SIGMA, TH_SDAILY, TH_EXPC,
 TH_EXPD, TH_RS, TH_RF, TH_RN, TH_S0, TH_TPROMO) = range(23)

CLASS_CODE = {VoterClass.SUBMITTER_FAN: 0, VoterClass.OTHER_FAN: 1,
              VoterClass.NON_FAN: 2}
CODE_CLASS = {v: k for k, v in CLASS_CODE.items()}


def pack_theta(sp: StoryParams, gp: GlobalParams, fits: PopularityFits) -> np.ndarray:
    tp = -1.0 if sp.t_promotion is None else float(sp.t_promotion)
    return np.array([
        gp.omega, gp.users, gp.surfing.mu, gp.surfing.lam, gp.p_other, gp.rho,
        gp.k_upcoming, gp.k_front, gp.c_submitter_fan, gp.c_other_fan,
        gp.c_nonfan, fits.front.a, fits.front.b, fits.front.nu,
        fits.front.sigma, fits.front.s_daily, fits.upcoming.c, fits.upcoming.d,
        sp.r_submitter_fan, sp.r_other_fan, sp.r_nonfan, float(sp.s0), tp,
    ])


@njit(cache=True)
def _log_erfcx(x):
    """log(exp(x^2) * erfc(x)) without overflow for any x."""
    if x < 0.0:
        return x * x + math.log(2.0 - math.erfc(-x))
    if x < 26.0:
        return x * x + math.log(math.erfc(x))
    ix2 = 1.0 / (x * x)
    s = 1.0 + ix2 * (-0.5 + ix2 * (0.75 + ix2 * (-1.875 + ix2 * 6.5625)))
    return math.log(s / (x * math.sqrt(math.pi)))


@njit(cache=True)
def ig_upper(m, mu, lam):
    """Fraction of surfers reaching page m (inverse-Gaussian survival at m-1)."""
    if m <= 1.0:
        return 1.0
    a = m - 1.0
    root = math.sqrt(lam / (2.0 * a))
    x1 = root * (a - mu) / mu
    x2 = root * (a + mu) / mu
    val = 0.5 * math.erfc(x1) - 0.5 * math.exp(_log_erfcx(x2) - x1 * x1)
    if val < 0.0:
        return 0.0
    if val > 1.0:
        return 1.0
    return val


@njit(cache=True)
def nl_cdf(w, a, b, nu, sigma):
    """Normal-Laplace CDF (log of a double-Pareto lognormal variate)."""
    q = (w - nu) / sigma
    sq2 = math.sqrt(2.0)
    t1 = 0.5 * math.exp(-0.5 * q * q + _log_erfcx((a * sigma - q) / sq2))
    t2 = 0.5 * math.exp(-0.5 * q * q + _log_erfcx((b * sigma + q) / sq2))
    val = 0.5 * math.erfc(-q / sq2) - (b * t1 - a * t2) / (a + b)
    if val < 0.0:
        return 0.0
    if val > 1.0:
        return 1.0
    return val


@njit(cache=True)
def browse_visibility(t, v, promoted, t_promo, th):
    """1 - P(miss on recency view)*P(miss on popularity view)*(1 - p_other)."""
    if v < 1.0:
        v = 1.0
    if promoted:
        p_time = th[TH_KFRONT] * (t - t_promo) + 1.0
        rank = th[TH_SDAILY] * (1.0 - nl_cdf(math.log(v), th[TH_A], th[TH_B],
                                             th[TH_NU], th[TH_SIGMA]))
    else:
        p_time = th[TH_KUP] * t + 1.0
        rank = math.exp(th[TH_EXPC] - th[TH_EXPD] * v)
    p_pop = 1.0 + rank / 15.0
    miss = ((1.0 - ig_upper(p_time, th[TH_MU], th[TH_LAM]))
            * (1.0 - ig_upper(p_pop, th[TH_MU], th[TH_LAM]))
            * (1.0 - th[TH_POTHER]))
    return 1.0 - miss


@njit(cache=True)
def class_visibilities(t, v, promoted, t_promo, th):
    pb = browse_visibility(t, v, promoted, t_promo, th)
    if promoted:
        return 1.0, 1.0, pb
    return th[TH_CS], th[TH_CF], th[TH_CN] * pb


@njit(cache=True)
def rhs(t, y, promoted, t_promo, th, out):
    v = y[0] + y[1] + y[2]
    p_s, p_f, p_n = class_visibilities(t, v, promoted, t_promo, th)
    omega = th[TH_OMEGA]
    rate_s = omega * th[TH_RS] * p_s * y[3]
    rate_f = omega * th[TH_RF] * p_f * y[4]
    n = y[5] if y[5] > 0.0 else 0.0
    rate_n = omega * th[TH_RN] * p_n * y[5]
    dv = rate_s + rate_f + rate_n
    transfer = th[TH_RHO] * n * dv
    out[0] = rate_s
    out[1] = rate_f
    out[2] = rate_n
    out[3] = -omega * p_s * y[3]
    out[4] = -omega * p_f * y[4] + transfer
    out[5] = -omega * p_n * y[5] - transfer


@njit(cache=True)
def _rk4_span(y, t0, t1, promoted, t_promo, th, h_max, k1, k2, k3, k4, tmp):
    """Advance y in place from t0 to t1 (one smooth phase) with fixed-step RK4."""
    span = t1 - t0
    if span <= 0.0:
        return
    nstep = int(math.ceil(span / h_max))
    h = span / nstep
    t = t0
    for _ in range(nstep):
        rhs(t, y, promoted, t_promo, th, k1)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        rhs(t + 0.5 * h, tmp, promoted, t_promo, th, k2)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        rhs(t + 0.5 * h, tmp, promoted, t_promo, th, k3)
        for i in range(6):
            tmp[i] = y[i] + h * k3[i]
        rhs(t + h, tmp, promoted, t_promo, th, k4)
        for i in range(6):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t += h


@njit(cache=True)
def solve_states(th, y0, t_start, t_eval, h_max):
    """States at the (sorted) times ``t_eval``, starting from y0 at t_start."""
    k1 = np.empty(6); k2 = np.empty(6); k3 = np.empty(6)
    k4 = np.empty(6); tmp = np.empty(6)
    y = y0.copy()
    out = np.empty((t_eval.size, 6))
    tp = th[TH_TPROMO]
    t = t_start
    for j in range(t_eval.size):
        target = t_eval[j]
        if tp >= 0.0 and t < tp < target:
            _rk4_span(y, t, tp, False, tp, th, h_max, k1, k2, k3, k4, tmp)
            t = tp
        promoted = tp >= 0.0 and t >= tp
        _rk4_span(y, t, target, promoted, tp, th, h_max, k1, k2, k3, k4, tmp)
        t = target
        for i in range(6):
            out[j, i] = y[i]
    return out


@njit(cache=True)
def story_loglik(th, ev_times, ev_class, t_end, h_max):
    """Poisson log-likelihood of class-labeled events under the model.

    ``ev_times`` sorted ascending in (0, t_end], ``ev_class`` in {0,1,2}.
    The integral term is exact up to the integrator: it is the model's total
    vote gain v(t_end) - v(0).
    """
    k1 = np.empty(6); k2 = np.empty(6); k3 = np.empty(6)
    k4 = np.empty(6); tmp = np.empty(6)
    y = np.empty(6)
    y[0] = 0.0; y[1] = 0.0; y[2] = 1.0
    y[3] = th[TH_S0]; y[4] = 0.0; y[5] = th[TH_USERS] - th[TH_S0] - 1.0
    tp = th[TH_TPROMO]
    t = 0.0
    ll = 0.0
    deriv = np.empty(6)
    for j in range(ev_times.size):
        target = ev_times[j]
        if tp >= 0.0 and t < tp < target:
            _rk4_span(y, t, tp, False, tp, th, h_max, k1, k2, k3, k4, tmp)
            t = tp
        promoted = tp >= 0.0 and t >= tp
        _rk4_span(y, t, target, promoted, tp, th, h_max, k1, k2, k3, k4, tmp)
        t = target
        promoted = tp >= 0.0 and t >= tp  # event at the promotion instant is front-phase
        rhs(t, y, promoted, tp, th, deriv)
        lam = deriv[ev_class[j]]
        if lam <= 0.0:
            return -np.inf
        ll += math.log(lam)
    if tp >= 0.0 and t < tp < t_end:
        _rk4_span(y, t, tp, False, tp, th, h_max, k1, k2, k3, k4, tmp)
        t = tp
    promoted = tp >= 0.0 and t >= tp
    _rk4_span(y, t, t_end, promoted, tp, th, h_max, k1, k2, k3, k4, tmp)
    ll -= (y[0] + y[1] + y[2]) - 1.0
    return ll


# --------------------------------------------------------------------------
# stochastic story simulators
# --------------------------------------------------------------------------

@njit(cache=True)
def _fan_batch(n_pool, users, rho, fan_counts):
    """Voters' fans entering the other-fan pool when one vote lands.

    Empty ``fan_counts`` uses the model's averaging assumption (each user is
    a fan of the voter independently with probability rho); otherwise the
    voter's fan count is drawn from the empirical sample and the batch is the
    random share of those fans still in the non-fan pool.
    """
    if n_pool <= 0:
        return 0
    if fan_counts.size > 0:
        k = fan_counts[np.random.randint(fan_counts.size)]
        if k <= 0:
            return 0
        batch = np.random.binomial(k, n_pool / (users - 1.0))
        return batch if batch < n_pool else n_pool
    return np.random.binomial(n_pool, rho)


@njit(cache=True)
def sim_agent(th, t_end, seed, threshold, fan_counts, out_t, out_c):
    """Agent-mode story simulation.

    Every user carries an independent Poisson visit clock at rate omega; a
    visit turns into a "seeing" with the visitor's class visibility and into a
    vote with the class interestingness.  Users within a pool are exchangeable
    and clocks are memoryless, so the per-user model aggregates exactly to a
    thinned point process with intensity omega * sum_pools P_pool * pool_size;
    that aggregate is simulated here event by event.  Each vote converts a
    batch of remaining non-fans into other-fans (the voter's fans), who act on
    their new friends-interface view from their next visit (visibility is only
    ever evaluated at visit instants).

    Returns (number of votes recorded, realized promotion time or -1).
    ``threshold`` <= 0 disables vote-count promotion; th[TH_TPROMO] >= 0
    schedules promotion at a fixed time instead.  ``fan_counts``: see
    ``_fan_batch``.
    """
    np.random.seed(seed)
    omega = th[TH_OMEGA]
    rho = th[TH_RHO]
    s0 = int(th[TH_S0])
    S = s0
    F = 0
    N = int(th[TH_USERS]) - s0 - 1
    vs = 0; vf = 0; vn = 1
    tp = th[TH_TPROMO]
    t = 0.0
    n_ev = 0
    refresh = 0.1
    while t < t_end and S + F + N > 0 and n_ev < out_t.size:
        promoted = tp >= 0.0 and t >= tp
        v = float(vs + vf + vn)
        p_s, p_f, p_n = class_visibilities(t, v, promoted, tp, th)
        big = omega * (p_s * S + p_f * F + p_n * N)
        seg_end = t + refresh
        if tp >= 0.0 and not promoted and tp < seg_end:
            seg_end = tp
        if seg_end > t_end:
            seg_end = t_end
        if big <= 0.0:
            t = seg_end
            continue
        dt = np.random.exponential(1.0 / big)
        if t + dt >= seg_end:
            t = seg_end
            continue
        t = t + dt
        # intensities now (phase fixed within the segment, P_N only decayed)
        p_s2, p_f2, p_n2 = class_visibilities(t, v, promoted, tp, th)
        lam_s = omega * p_s2 * S
        lam_f = omega * p_f2 * F
        lam_n = omega * p_n2 * N
        u = np.random.random() * big
        if u < lam_s:
            S -= 1
            cls = 0
            r = th[TH_RS]
        elif u < lam_s + lam_f:
            F -= 1
            cls = 1
            r = th[TH_RF]
        elif u < lam_s + lam_f + lam_n:
            N -= 1
            cls = 2
            r = th[TH_RN]
        else:
            continue  # thinned visit
        if np.random.random() >= r:
            continue  # saw it, did not vote
        if cls == 0:
            vs += 1
        elif cls == 1:
            vf += 1
        else:
            vn += 1
        out_t[n_ev] = t
        out_c[n_ev] = cls
        n_ev += 1
        batch = _fan_batch(N, th[TH_USERS], rho, fan_counts)
        N -= batch
        F += batch
        if tp < 0.0 and threshold > 0 and vs + vf + vn >= threshold:
            tp = t
    return n_ev, tp


@njit(cache=True)
def sim_meanfield(th, t_end, seed, threshold, fan_counts, out_t, out_c):
    """Mean-field-mode story simulation.

    Vote events are thinned from the aggregate intensity of the rate
    equations; unseen pools follow the deterministic depletion flow with
    visibilities frozen over segments of at most 0.1 Digg hours (refreshed at
    every event), and each accepted vote moves a stochastic batch of non-fans
    into the other-fan pool (see ``_fan_batch``).
    """
    np.random.seed(seed)
    omega = th[TH_OMEGA]
    rho = th[TH_RHO]
    S = th[TH_S0]
    F = 0.0
    N = th[TH_USERS] - th[TH_S0] - 1.0
    vs = 0; vf = 0; vn = 1
    tp = th[TH_TPROMO]
    t = 0.0
    n_ev = 0
    refresh = 0.1
    while t < t_end and n_ev < out_t.size:
        promoted = tp >= 0.0 and t >= tp
        v = float(vs + vf + vn)
        p_s, p_f, p_n = class_visibilities(t, v, promoted, tp, th)
        big = omega * (th[TH_RS] * p_s * S + th[TH_RF] * p_f * F
                       + th[TH_RN] * p_n * N)
        seg_end = t + refresh
        if tp >= 0.0 and not promoted and tp < seg_end:
            seg_end = tp
        if seg_end > t_end:
            seg_end = t_end
        if big <= 1e-300:
            span = seg_end - t
            S *= math.exp(-omega * p_s * span)
            F *= math.exp(-omega * p_f * span)
            N *= math.exp(-omega * p_n * span)
            t = seg_end
            continue
        dt = np.random.exponential(1.0 / big)
        if t + dt >= seg_end:
            span = seg_end - t
            S *= math.exp(-omega * p_s * span)
            F *= math.exp(-omega * p_f * span)
            N *= math.exp(-omega * p_n * span)
            t = seg_end
            continue
        # advance pools along the frozen-visibility depletion flow
        S *= math.exp(-omega * p_s * dt)
        F *= math.exp(-omega * p_f * dt)
        N *= math.exp(-omega * p_n * dt)
        t = t + dt
        p_n2 = class_visibilities(t, v, promoted, tp, th)[2]
        lam_s = omega * th[TH_RS] * p_s * S
        lam_f = omega * th[TH_RF] * p_f * F
        lam_n = omega * th[TH_RN] * p_n2 * N
        u = np.random.random() * big
        if u < lam_s:
            cls = 0
            vs += 1
        elif u < lam_s + lam_f:
            cls = 1
            vf += 1
        elif u < lam_s + lam_f + lam_n:
            cls = 2
            vn += 1
        else:
            continue
        out_t[n_ev] = t
        out_c[n_ev] = cls
        n_ev += 1
        batch = _fan_batch(int(N), th[TH_USERS], rho, fan_counts)
        N -= batch
        F += batch
        if tp < 0.0 and threshold > 0 and vs + vf + vn >= threshold:
            tp = t
    return n_ev, tp
