"""Core record types: voter classes, vote events, per-story vote streams."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class VoterClass(str, enum.Enum):
    """Which pool a voter came from, relative to the story's submitter."""

    SUBMITTER_FAN = "submitter_fan"
    OTHER_FAN = "other_fan"
    NON_FAN = "non_fan"


class Phase(str, enum.Enum):
    """Where the story lives: the upcoming queue or the front page."""

    UPCOMING = "upcoming"
    FRONT = "front"


@dataclass
class VoteEvent:
    voter_id: str
    wall_time: float            # seconds since epoch
    t: float = float("nan")     # Digg hours since the story's submission
    voter_class: VoterClass | None = None


@dataclass
class StoryRecord:
    """A story's metadata plus its time-ordered votes.

    The first vote is the submitter's own (it seeds the vote count at 1 and is
    conventionally labeled NON_FAN).  ``t_promotion`` is in Digg hours since
    submission; ``None`` means the story was never promoted in the observation
    window.
    """

    story_id: str
    submitter_id: str
    votes: list[VoteEvent] = field(default_factory=list)
    t_promotion: float | None = None
    promotion_wall_time: float | None = None
    s0: int | None = None       # submitter's fan count among active users

    def times_of(self, cls: VoterClass, upto: float | None = None,
                 t_min: float = 0.0) -> np.ndarray:
        """Vote times (Digg hours) of one class in ``t_min < t <= upto``.

        The submitter's t=0 vote is an initial condition, never an event, so
        the lower bound is strict.
        """
        ts = [e.t for e in self.votes
              if e.voter_class == cls and e.t > t_min
              and (upto is None or e.t <= upto)]
        return np.asarray(ts, dtype=float)

    def counts_at(self, t: float) -> dict[VoterClass, int]:
        """Cumulative per-class vote counts at time ``t`` (inclusive)."""
        out = {c: 0 for c in VoterClass}
        for e in self.votes:
            if e.t <= t and e.voter_class is not None:
                out[e.voter_class] += 1
        return out

    def total_votes_at(self, t: float) -> int:
        return sum(1 for e in self.votes if e.t <= t)

    @property
    def n_votes(self) -> int:
        return len(self.votes)


@dataclass
class VoteStream:
    """Class-labeled vote times of one story in Digg hours, ready for fitting.

    ``times`` maps each class to a sorted array of event times in (0, t_end];
    the submitter's t=0 vote is excluded (it is part of the initial state).
    ``step_times``/``step_counts`` give the story's observed cumulative vote
    count as a right-continuous step function (including the t=0 vote).
    """

    story_id: str
    times: dict[VoterClass, np.ndarray]
    t_end: float
    t_promotion: float | None
    s0: int

    @classmethod
    def from_record(cls, rec: StoryRecord, upto: float | None = None) -> "VoteStream":
        if rec.s0 is None:
            raise ValueError(f"story {rec.story_id}: s0 (submitter fan count) unknown")
        t_end = upto if upto is not None else max(e.t for e in rec.votes)
        times = {c: rec.times_of(c, upto=t_end) for c in VoterClass}
        return cls(rec.story_id, times, float(t_end), rec.t_promotion, int(rec.s0))

    @property
    def all_times(self) -> np.ndarray:
        return np.sort(np.concatenate([self.times[c] for c in VoterClass]))

    def observed_total(self, t: float | np.ndarray):
        """Observed cumulative vote count at ``t`` (submitter's vote included)."""
        at = self.all_times
        return 1 + np.searchsorted(at, t, side="right")
