"""Mean-field rate equations for a story's vote accumulation, and their solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .params import GlobalParams, PopularityFits, StoryParams
from .records import Phase, VoterClass
from .visibility import (phase_at, visibility_browsing, visibility_fan,
                         visibility_nonfan)

# state layout: [v_s, v_f, v_n, s, f, n]
IV_S, IV_F, IV_N, IS, IF, IN = range(6)


@dataclass
class StateVector:
    """Cumulative per-class votes and remaining unseen pools."""

    v_s: float
    v_f: float
    v_n: float
    s: float
    f: float
    n: float

    @property
    def votes(self) -> float:
        return self.v_s + self.v_f + self.v_n

    def as_array(self) -> np.ndarray:
        return np.array([self.v_s, self.v_f, self.v_n, self.s, self.f, self.n])

    @classmethod
    def from_array(cls, y) -> "StateVector":
        return cls(*map(float, y))


def initial_state(sp: StoryParams, gp: GlobalParams) -> StateVector:
    """State at submission: the submitter's own vote plus untouched pools."""
    n0 = gp.users - sp.s0 - 1
    if n0 < 0:
        raise ValueError("s0 exceeds the available user population")
    return StateVector(v_s=0.0, v_f=0.0, v_n=1.0, s=float(sp.s0), f=0.0, n=n0)


def _phase_visibilities(t, v, phase: Phase, sp, gp, fits):
    tp = sp.t_promotion if phase == Phase.FRONT else None
    # recency page needs the true promotion offset in the front phase;
    # in the upcoming phase the un-promoted expression applies regardless.
    if phase == Phase.FRONT:
        p_s = p_f = 1.0
        p_n = visibility_nonfan(t, v, tp, gp, fits)
    else:
        p_s = gp.c_submitter_fan
        p_f = gp.c_other_fan
        p_n = visibility_nonfan(t, v, None, gp, fits)
    return p_s, p_f, p_n


def ode_rhs(t, y, sp: StoryParams, gp: GlobalParams, fits: PopularityFits,
            phase: Phase | None = None):
    """Time derivative of [v_s, v_f, v_n, s, f, n].

    Each pool's members visit at rate omega, see the story with their class
    visibility, and vote with their class interestingness; every vote recruits
    a rho-fraction of the remaining non-fans into the other-fan pool (they are
    fans of the voter).  ``phase`` overrides the promotion-time lookup so a
    solver can integrate each phase as a separate smooth segment.
    """
    if phase is None:
        phase = phase_at(t, sp.t_promotion)
    v = y[IV_S] + y[IV_F] + y[IV_N]
    p_s, p_f, p_n = _phase_visibilities(t, v, phase, sp, gp, fits)
    s, f, n = y[IS], y[IF], y[IN]
    rate_s = gp.omega * sp.r_submitter_fan * p_s * s
    rate_f = gp.omega * sp.r_other_fan * p_f * f
    rate_n = gp.omega * sp.r_nonfan * p_n * n
    dv = rate_s + rate_f + rate_n
    transfer = gp.rho * max(n, 0.0) * dv
    return np.array([
        rate_s,
        rate_f,
        rate_n,
        -gp.omega * p_s * s,
        -gp.omega * p_f * f + transfer,
        -gp.omega * p_n * n - transfer,
    ])


def class_rates(t, y, sp, gp, fits):
    """Per-class model vote rates at (t, state); promotion instant counts as front."""
    phase = phase_at(t, sp.t_promotion)
    d = ode_rhs(t, y, sp, gp, fits, phase=phase)
    return {VoterClass.SUBMITTER_FAN: d[IV_S],
            VoterClass.OTHER_FAN: d[IV_F],
            VoterClass.NON_FAN: d[IV_N]}


class Trajectory:
    """Dense solution of the rate equations on [0, t_end].

    Piecewise: the promotion time is a hard breakpoint, each side solved as
    its own smooth segment.
    """

    def __init__(self, sp, gp, fits, segments, t_end):
        self.sp, self.gp, self.fits = sp, gp, fits
        self._segments = segments            # list of (t0, t1, OdeSolution)
        self.t_end = t_end

    def states(self, t) -> np.ndarray:
        """State array, shape (len(t), 6); pools clipped at zero."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.t_end + 1e-12):
            raise ValueError("time outside the solved interval")
        out = np.empty((t.size, 6))
        for t0, t1, sol in self._segments:
            mask = (t >= t0) & (t <= t1)
            if mask.any():
                out[mask] = sol(t[mask]).T
        out[:, IS:] = np.maximum(out[:, IS:], 0.0)
        return out

    def state_at(self, t) -> StateVector:
        return StateVector.from_array(self.states([t])[0])

    def votes_at(self, t):
        """Per-class cumulative votes at ``t`` as a dict."""
        y = self.states([t])[0]
        return {VoterClass.SUBMITTER_FAN: y[IV_S],
                VoterClass.OTHER_FAN: y[IV_F],
                VoterClass.NON_FAN: y[IV_N]}

    def rates(self, t) -> np.ndarray:
        """Per-class vote rates at times ``t``, shape (len(t), 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ys = self.states(t)
        out = np.empty((t.size, 3))
        for i, (ti, yi) in enumerate(zip(t, ys)):
            r = class_rates(ti, yi, self.sp, self.gp, self.fits)
            out[i] = [r[VoterClass.SUBMITTER_FAN], r[VoterClass.OTHER_FAN],
                      r[VoterClass.NON_FAN]]
        return out


def solve_trajectory(sp: StoryParams, gp: GlobalParams, fits: PopularityFits,
                     t_end: float, rtol: float = 1e-8, atol: float = 1e-8,
                     method: str = "RK45") -> Trajectory:
    """Integrate the rate equations from submission to ``t_end`` Digg hours."""
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    y0 = initial_state(sp, gp).as_array()
    tp = sp.t_promotion
    breaks = [0.0]
    if tp is not None and 0.0 < tp < t_end:
        breaks.append(float(tp))
    breaks.append(float(t_end))

    segments = []
    y = y0
    for t0, t1 in zip(breaks[:-1], breaks[1:]):
        phase = phase_at(t0, tp)
        res = solve_ivp(ode_rhs, (t0, t1), y, method=method,
                        args=(sp, gp, fits, phase),
                        rtol=rtol, atol=atol, dense_output=True)
        if not res.success:          # pragma: no cover - solver failure guard
            raise RuntimeError(f"trajectory solve failed on [{t0}, {t1}]: {res.message}")
        segments.append((t0, t1, res.sol))
        y = res.y[:, -1]
    if not segments:                 # t_end == 0: constant initial state
        segments.append((0.0, 0.0, lambda t: np.tile(y0[:, None], (1, np.size(t)))))
    return Trajectory(sp, gp, fits, segments, float(t_end))
