"""Dataset ingestion, event-time conversion, vote labeling and serialization.

Canonical on-disk form is UTF-8 CSV with fixed headers:

    votes.csv        story_id,voter_id,unix_time
    friends.csv      fan_id,followee_id
    promotions.csv   story_id,unix_promotion_time

plus two sidecars that the canonical schema cannot encode:

    votes_labels.csv story_id,voter_id,voter_class   (voter-class ground truth)
    truth.csv        story_id,r_s,r_f,r_n,s0,t_promotion  (simulator truth)

All event times inside :class:`~votedyn.records.StoryRecord` are Digg hours
measured by a :class:`DiggClock` built from the dataset's own front-page
activity, so one Digg hour always carries the same expected number of votes.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import StoryParams
from .records import StoryRecord, VoteEvent, VoterClass, VoteStream

__all__ = [
    "RawVote", "FanGraph", "DiggClock", "ingest", "label_votes",
    "corpus_stats", "CorpusSummary", "write_dataset", "read_dataset",
    "read_params_file", "write_params_file", "rewrite_params_text",
    "read_priors_file", "write_priors_file", "adapt_digg2009",
]

log = logging.getLogger(__name__)

VOTES_HEADER = ["story_id", "voter_id", "unix_time"]
FRIENDS_HEADER = ["fan_id", "followee_id"]
PROMOTIONS_HEADER = ["story_id", "unix_promotion_time"]
LABELS_HEADER = ["story_id", "voter_id", "voter_class"]
TRUTH_HEADER = ["story_id", "r_s", "r_f", "r_n", "s0", "t_promotion"]


@dataclass(frozen=True)
class RawVote:
    story_id: str
    voter_id: str
    wall_time: float


class FanGraph:
    """Directed follower graph: an edge fan -> followee means the fan sees
    the followee's activity through the friends interface."""

    def __init__(self, edges):
        follows: dict[str, set] = {}
        fans: dict[str, set] = {}
        dropped = 0
        for fan, followee in edges:
            if fan == followee:
                dropped += 1
                continue
            follows.setdefault(fan, set()).add(followee)
            fans.setdefault(followee, set()).add(fan)
        if dropped:
            warnings.warn(f"FanGraph: dropped {dropped} self-edges")
        self._follows = {k: frozenset(v) for k, v in follows.items()}
        self._fans = {k: frozenset(v) for k, v in fans.items()}
        self.n_edges = sum(len(v) for v in self._follows.values())
        #: users with at least one fan (the scope of a links table)
        self.n_users_with_fans = len(self._fans)

    _EMPTY = frozenset()

    def fans_of(self, user) -> frozenset:
        """Users following ``user`` (who get their friends-interface flag)."""
        return self._fans.get(user, self._EMPTY)

    def followees_of(self, user) -> frozenset:
        return self._follows.get(user, self._EMPTY)

    def fan_counts(self, users) -> np.ndarray:
        """Number of fans of each of ``users`` (feeds the simulator's
        empirical fan-count mode)."""
        return np.array([len(self.fans_of(u)) for u in users], dtype=np.int64)

    def edges(self):
        for fan in sorted(self._follows):
            for followee in sorted(self._follows[fan]):
                yield fan, followee


class DiggClock:
    """Piecewise-linear map from wall time to site event time.

    Event time is the cumulative count of front-page votes, rescaled so one
    unit (a "Digg hour") equals the dataset's mean hourly front-page vote
    count.  Between vote events the map interpolates linearly; it is monotone
    and invertible on its wall-time span.
    """

    def __init__(self, wall_times, span=None):
        w = np.sort(np.asarray(wall_times, dtype=float))
        if w.size < 2:
            raise ValueError("need at least two front-page votes for a clock")
        lo = w[0] if span is None else min(float(span[0]), w[0])
        hi = w[-1] if span is None else max(float(span[1]), w[-1])
        # cumulative votes observed by each breakpoint (duplicates collapse)
        uniq, counts = np.unique(w, return_counts=True)
        cum = np.cumsum(counts).astype(float)
        self._wall = np.concatenate(([lo], uniq, [hi]))
        self._cum = np.concatenate(([0.0], cum, [cum[-1]]))
        hours = (hi - lo) / 3600.0
        self.votes_per_hour = float(cum[-1] / hours) if hours > 0 else float("nan")

    @classmethod
    def linear(cls, seconds_per_digg_hour, span):
        """Uniform clock (Digg time proportional to wall time); used for
        simulated corpora whose activity has no daily cycle."""
        clock = cls.__new__(cls)
        lo, hi = float(span[0]), float(span[1])
        if hi <= lo:
            raise ValueError("empty clock span")
        clock._wall = np.array([lo, hi])
        clock._cum = np.array([0.0, (hi - lo) / float(seconds_per_digg_hour)])
        clock.votes_per_hour = 1.0
        return clock

    @property
    def span(self):
        return float(self._wall[0]), float(self._wall[-1])

    def digg_time(self, wall_time):
        w = np.asarray(wall_time, dtype=float)
        lo, hi = self.span
        if np.any(w < lo) or np.any(w > hi):
            raise ValueError(f"wall time outside clock span [{lo}, {hi}]")
        out = np.interp(w, self._wall, self._cum) / self.votes_per_hour
        return float(out) if out.shape == () else out

    def wall_time(self, digg_hours):
        v = np.asarray(digg_hours, dtype=float) * self.votes_per_hour
        if np.any(v < 0) or np.any(v > self._cum[-1]):
            raise ValueError("event time outside clock range")
        out = np.interp(v, self._cum, self._wall)
        return float(out) if out.shape == () else out


# --------------------------------------------------------------------------
# CSV plumbing
# --------------------------------------------------------------------------

def _read_rows(path, header, types):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if first != header:
            raise ValueError(f"{path}:1: expected header {','.join(header)}, "
                             f"got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"{len(header)} fields, got {len(row)}")
            try:
                yield [t(v) for t, v in zip(types, row)]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x):
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def read_votes(path):
    return [RawVote(s, v, t) for s, v, t
            in _read_rows(path, VOTES_HEADER, (str, str, float))]


def read_promotions(path):
    return {s: t for s, t
            in _read_rows(path, PROMOTIONS_HEADER, (str, float))}


def read_friends(path) -> FanGraph:
    return FanGraph(_read_rows(path, FRIENDS_HEADER, (str, str)))


def _assign_classes(voter_ids, submitter_id, graph):
    submitter_fans = graph.fans_of(submitter_id)
    earlier: set = set()
    out = []
    for i, voter in enumerate(voter_ids):
        if i == 0:
            cls = VoterClass.NON_FAN      # submitter's own vote seeds v_N
        elif voter in submitter_fans:
            cls = VoterClass.SUBMITTER_FAN
        elif graph.followees_of(voter) & earlier:
            cls = VoterClass.OTHER_FAN
        else:
            cls = VoterClass.NON_FAN
        out.append(cls)
        earlier.add(voter)
    return out


def build_digg_clock(votes, promotions) -> DiggClock:
    """Clock from votes cast on already-promoted stories (front-page votes)."""
    front = [v.wall_time for v in votes
             if v.story_id in promotions and v.wall_time >= promotions[v.story_id]]
    walls = [v.wall_time for v in votes] + list(promotions.values())
    if len(front) < 2:
        warnings.warn("fewer than two front-page votes; clock falls back to "
                      "all votes")
        front = [v.wall_time for v in votes]
    return DiggClock(front, span=(min(walls), max(walls)))


def _group_votes(votes):
    """Votes per story in time order, duplicates (story, voter) dropped."""
    by_story: dict[str, list[RawVote]] = {}
    for v in votes:
        by_story.setdefault(v.story_id, []).append(v)
    dupes = 0
    for sid, rows in by_story.items():
        rows.sort(key=lambda r: r.wall_time)
        seen: set = set()
        kept = []
        for r in rows:
            if r.voter_id in seen:
                dupes += 1
                continue
            seen.add(r.voter_id)
            kept.append(r)
        by_story[sid] = kept
    if dupes:
        warnings.warn(f"dropped {dupes} duplicate (story, voter) votes")
    return by_story


def _build_story(sid, rows, promo_wall, graph, clock, classes=None) -> StoryRecord:
    t0 = clock.digg_time(rows[0].wall_time)
    submitter = rows[0].voter_id
    if classes is None:
        classes = _assign_classes([r.voter_id for r in rows], submitter, graph)
    events = tuple(
        VoteEvent(voter_id=r.voter_id, wall_time=r.wall_time,
                  t=clock.digg_time(r.wall_time) - t0, voter_class=c)
        for r, c in zip(rows, classes))
    t_promo = None if promo_wall is None else clock.digg_time(promo_wall) - t0
    return StoryRecord(story_id=sid, submitter_id=submitter, votes=events,
                       t_promotion=t_promo, promotion_wall_time=promo_wall,
                       s0=len(graph.fans_of(submitter)))


def ingest(votes_path, friends_path, promotions_path):
    """Load a canonical dataset into (list[StoryRecord], FanGraph).

    Votes are ordered by time within each story; the first voter is taken to
    be the submitter.  Stories absent from the promotions file are marked
    unpromoted.  Event times are Digg hours on the dataset's own clock.
    """
    votes = read_votes(votes_path)
    graph = read_friends(friends_path)
    promotions = read_promotions(promotions_path)
    clock = build_digg_clock(votes, promotions)
    by_story = _group_votes(votes)
    stories = [
        _build_story(sid, rows, promotions.get(sid), graph, clock)
        for sid, rows in sorted(by_story.items())
    ]
    voters = {v.voter_id for v in votes}
    no_fans = sum(1 for u in voters if not graph.fans_of(u))
    log.info("ingest: %d stories (%d promoted), %d votes, %d voters "
             "(%d with no fans), %.0f front votes/hour",
             len(stories), sum(s.t_promotion is not None for s in stories),
             len(votes), len(voters), no_fans, clock.votes_per_hour)
    return stories, graph


def label_votes(story: StoryRecord, graph: FanGraph) -> VoteStream:
    """Relabel a story's votes from the fan graph and return the per-class
    event-time stream.  Precedence: submitter-fan over other-fan over
    non-fan; the submitter's own vote is always non-fan."""
    classes = _assign_classes([v.voter_id for v in story.votes],
                              story.submitter_id, graph)
    relabeled = StoryRecord(
        story_id=story.story_id, submitter_id=story.submitter_id,
        votes=tuple(VoteEvent(v.voter_id, v.wall_time, v.t, c)
                    for v, c in zip(story.votes, classes)),
        t_promotion=story.t_promotion,
        promotion_wall_time=story.promotion_wall_time, s0=story.s0)
    return VoteStream.from_record(relabeled)


# --------------------------------------------------------------------------
# descriptive statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusSummary:
    n_stories: int
    n_promoted: int
    n_votes: int
    n_voters: int
    n_voters_no_fans: int
    #: per promoted story, votes of each class accumulated by promo + 24h
    class_counts_24h: dict
    #: pairwise Pearson correlations of the 24h class counts, or None when
    #: fewer than two promoted stories make them undefined
    correlations: dict | None
    #: votes per distinct voter (zero-truncated activity sample)
    activity_counts: np.ndarray
    #: (votes, rank) pairs for the front popularity list
    front_popularity: tuple
    #: (votes, rank) pairs for the upcoming popularity list
    upcoming_popularity: tuple


_CLASSES = (VoterClass.SUBMITTER_FAN, VoterClass.OTHER_FAN, VoterClass.NON_FAN)


def corpus_stats(stories, graph: FanGraph) -> CorpusSummary:
    """Descriptive summary of a labeled corpus.

    The 24-hour class counts and their correlations cover promoted stories
    only.  Popularity samples rank promoted stories by votes accumulated in
    the 24 Digg hours after promotion (front list) and by votes at promotion
    (upcoming list), most-voted first.
    """
    counts = {c: [] for c in _CLASSES}
    upcoming_votes = []
    voters: dict[str, int] = {}
    n_votes = 0
    for story in stories:
        for v in story.votes:
            voters[v.voter_id] = voters.get(v.voter_id, 0) + 1
        n_votes += len(story.votes)
        if story.t_promotion is None:
            continue
        cutoff = story.t_promotion + 24.0
        per = {c: 0 for c in _CLASSES}
        at_promo = 0
        for v in story.votes:
            if v.t <= cutoff:
                per[v.voter_class] += 1
            if v.t < story.t_promotion:
                at_promo += 1
        for c in _CLASSES:
            counts[c].append(per[c])
        upcoming_votes.append(at_promo)

    class_counts = {c: np.asarray(v, dtype=float) for c, v in counts.items()}
    n_promoted = len(upcoming_votes)
    if n_promoted >= 2:
        correlations = {}
        with np.errstate(invalid="ignore", divide="ignore"):
            for i, a in enumerate(_CLASSES):
                for b in _CLASSES[i + 1:]:
                    # NaN when a class count is constant across the corpus
                    correlations[(a, b)] = float(
                        np.corrcoef(class_counts[a], class_counts[b])[0, 1])
    else:
        correlations = None

    def ranked(values):
        v = np.sort(np.asarray(values, dtype=float))[::-1]
        keep = v > 0
        return v[keep], np.arange(1, v.size + 1, dtype=float)[keep]

    totals = [a + b + c for a, b, c in zip(*(class_counts[c] for c in _CLASSES))]
    return CorpusSummary(
        n_stories=len(list(stories)),
        n_promoted=n_promoted,
        n_votes=n_votes,
        n_voters=len(voters),
        n_voters_no_fans=sum(1 for u in voters if not graph.fans_of(u)),
        class_counts_24h=class_counts,
        correlations=correlations,
        activity_counts=np.asarray(sorted(voters.values()), dtype=np.int64),
        front_popularity=ranked(totals),
        upcoming_popularity=ranked(upcoming_votes),
    )


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def write_dataset(stories, outdir, graph: FanGraph | None = None,
                  truth: dict | None = None,
                  seconds_per_digg_hour: float | None = None):
    """Write a corpus in canonical form under ``outdir``.

    Always writes votes/promotions plus the votes_labels sidecar; writes
    friends.csv when a graph is given (simulated corpora have none) and
    truth.csv when simulator ground truth is given.  Passing
    ``seconds_per_digg_hour`` records that the corpus lives on a uniform
    clock (simulator convention), which :func:`read_dataset` then uses
    instead of rebuilding a clock from vote density.  Returns the list of
    paths written.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    def emit(name, header, rows):
        p = outdir / name
        _write_rows(p, header, rows)
        paths.append(p)

    emit("votes.csv", VOTES_HEADER,
         ((s.story_id, v.voter_id, _fmt(v.wall_time))
          for s in stories for v in s.votes))
    emit("promotions.csv", PROMOTIONS_HEADER,
         ((s.story_id, _fmt(s.promotion_wall_time))
          for s in stories if s.promotion_wall_time is not None))
    emit("votes_labels.csv", LABELS_HEADER,
         ((s.story_id, v.voter_id, v.voter_class.value)
          for s in stories for v in s.votes))
    if graph is not None:
        emit("friends.csv", FRIENDS_HEADER, graph.edges())
    if truth is not None:
        emit("truth.csv", TRUTH_HEADER,
             ((sid, _fmt(sp.r_submitter_fan), _fmt(sp.r_other_fan),
               _fmt(sp.r_nonfan), sp.s0,
               "" if sp.t_promotion is None else _fmt(sp.t_promotion))
              for sid, sp in truth.items()))
    if seconds_per_digg_hour is not None:
        emit("clock.csv", ["seconds_per_digg_hour"],
             [(_fmt(seconds_per_digg_hour),)])
    return paths


def read_truth(path) -> dict:
    out = {}
    for sid, rs, rf, rn, s0, tp in _read_rows(
            path, TRUTH_HEADER, (str, float, float, float, int, str)):
        out[sid] = StoryParams(r_submitter_fan=rs, r_other_fan=rf, r_nonfan=rn,
                               s0=s0, t_promotion=float(tp) if tp else None)
    return out


def read_dataset(outdir):
    """Inverse of :func:`write_dataset`.

    Returns (stories, graph, truth); graph/truth are None when their files
    are absent.  Vote classes come from the labels sidecar when present,
    otherwise from graph labeling (one of the two must exist).
    """
    outdir = Path(outdir)
    votes = read_votes(outdir / "votes.csv")
    promotions = read_promotions(outdir / "promotions.csv")
    graph = None
    if (outdir / "friends.csv").exists():
        graph = read_friends(outdir / "friends.csv")
    labels = None
    if (outdir / "votes_labels.csv").exists():
        labels = {(s, v): VoterClass(c) for s, v, c in _read_rows(
            outdir / "votes_labels.csv", LABELS_HEADER, (str, str, str))}
    if labels is None and graph is None:
        raise ValueError(f"{outdir}: need friends.csv or votes_labels.csv "
                         "to recover vote classes")
    if (outdir / "clock.csv").exists():
        (spdh,) = [row[0] for row in _read_rows(
            outdir / "clock.csv", ["seconds_per_digg_hour"], (float,))]
        walls = [v.wall_time for v in votes] + list(promotions.values())
        clock = DiggClock.linear(spdh, (min(walls), max(walls)))
    else:
        clock = build_digg_clock(votes, promotions)
    truth = None
    if (outdir / "truth.csv").exists():
        truth = read_truth(outdir / "truth.csv")
    empty = FanGraph(())
    stories = []
    for sid, rows in sorted(_group_votes(votes).items()):
        classes = None
        if labels is not None:
            classes = [labels[(sid, r.voter_id)] for r in rows]
        rec = _build_story(sid, rows, promotions.get(sid),
                           graph or empty, clock, classes)
        if graph is None:
            # no fan graph to count fans from; fall back to recorded truth
            rec.s0 = truth[sid].s0 if truth and sid in truth else None
        stories.append(rec)
    return stories, graph, truth


# --------------------------------------------------------------------------
# parameter / prior files:  flat "key = value" text
# --------------------------------------------------------------------------

_SURFING_KEYS = {"surfing_mu": "mu", "surfing_lambda": "lam"}
_GLOBAL_KEYS = ("omega", "users", "p_other", "rho", "k_upcoming", "k_front",
                "c_submitter_fan", "c_other_fan", "c_nonfan")
_FRONT_KEYS = {"pop_front_a": "a", "pop_front_b": "b", "pop_front_nu": "nu",
               "pop_front_sigma": "sigma", "pop_front_s_daily": "s_daily"}
_UPCOMING_KEYS = {"pop_upcoming_c": "c", "pop_upcoming_d": "d"}
_PRIOR_CLASSES = {"submitter_fan": VoterClass.SUBMITTER_FAN,
                  "other_fan": VoterClass.OTHER_FAN,
                  "nonfan": VoterClass.NON_FAN}


def _parse_kv(path):
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8")
                                  .splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        try:
            out[key.strip()] = float(value.strip())
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value "
                             f"{value.strip()!r}") from None
    return out


def read_params_file(path):
    """Read (GlobalParams, PopularityFits); absent keys keep defaults."""
    from .params import (GlobalParams, PopularityFitFront, PopularityFits,
                         PopularityFitUpcoming, SurfingParams, replace)
    kv = _parse_kv(path)
    gp = GlobalParams()
    updates = {k: kv[k] for k in _GLOBAL_KEYS if k in kv}
    surf = {f: kv[k] for k, f in _SURFING_KEYS.items() if k in kv}
    if surf:
        updates["surfing"] = replace(SurfingParams(), **surf)
    gp = replace(gp, **updates)
    front = replace(PopularityFitFront(),
                    **{f: kv[k] for k, f in _FRONT_KEYS.items() if k in kv})
    upcoming = replace(PopularityFitUpcoming(),
                       **{f: kv[k] for k, f in _UPCOMING_KEYS.items() if k in kv})
    return gp, PopularityFits(front=front, upcoming=upcoming)


def params_to_dict(gp, fits=None):
    out = {k: getattr(gp, k) for k in _GLOBAL_KEYS}
    out.update({k: getattr(gp.surfing, f) for k, f in _SURFING_KEYS.items()})
    if fits is not None:
        out.update({k: getattr(fits.front, f) for k, f in _FRONT_KEYS.items()})
        out.update({k: getattr(fits.upcoming, f)
                    for k, f in _UPCOMING_KEYS.items()})
    return out


def rewrite_params_text(text, updates):
    """Substitute values for existing keys in key=value text, preserving
    comments, ordering and unknown keys; unmatched updates are appended."""
    remaining = dict(updates)
    lines = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped and "=" in stripped:
            key = stripped.partition("=")[0].strip()
            if key in remaining:
                comment = ""
                if "#" in line:
                    comment = "  #" + line.split("#", 1)[1]
                lines.append(f"{key} = {_fmt(remaining.pop(key))}{comment}")
                continue
        lines.append(line)
    for key, value in remaining.items():
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_params_file(path, gp, fits=None, base_text=None):
    """Write a parameter file; when ``base_text`` is given its comments and
    unknown keys are preserved and only known keys are rewritten."""
    values = params_to_dict(gp, fits)
    if base_text is None:
        body = "\n".join(f"{k} = {_fmt(v)}" for k, v in values.items()) + "\n"
    else:
        body = rewrite_params_text(base_text, values)
    Path(path).write_text(body, encoding="utf-8")


def read_priors_file(path):
    from .params import LognormalPrior
    kv = _parse_kv(path)
    out = {}
    for name, cls in _PRIOR_CLASSES.items():
        mu_key, sig_key = f"prior_{name}_mu", f"prior_{name}_sigma"
        if mu_key in kv or sig_key in kv:
            if not (mu_key in kv and sig_key in kv):
                raise ValueError(f"{path}: need both {mu_key} and {sig_key}")
            out[cls] = LognormalPrior(kv[mu_key], kv[sig_key])
    if set(out) != set(_PRIOR_CLASSES.values()):
        raise ValueError(f"{path}: priors file must define all three classes")
    return out


def write_priors_file(path, priors):
    lines = []
    for name, cls in _PRIOR_CLASSES.items():
        lines.append(f"prior_{name}_mu = {_fmt(priors[cls].mu)}")
        lines.append(f"prior_{name}_sigma = {_fmt(priors[cls].sigma)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# public Digg-2009 release adapter
# --------------------------------------------------------------------------

def adapt_digg2009(votes_src, friends_src, outdir):
    """Map the public 2009 release columns onto the canonical schema.

    The release stores votes as ``date,voter_id,story_id`` and links as
    ``mutual,friend_date,user_id,friend_id`` (all quoted); a link row means
    ``user_id`` named ``friend_id`` a friend, i.e. user_id is the fan.
    Promotion times are not part of the release and must be supplied
    separately to :func:`ingest`.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    def rows(path, n_fields):
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != n_fields:
                    raise ValueError(f"{path}:{lineno}: expected {n_fields} "
                                     f"fields, got {len(row)}")
                yield row

    vote_rows = rows(votes_src, 3)
    first = next(vote_rows)
    header = not first[0].strip('"').isdigit()
    out_votes = [] if header else [(first[2], first[1], first[0])]
    out_votes.extend((sid, vid, ts) for ts, vid, sid in vote_rows)
    _write_rows(outdir / "votes.csv", VOTES_HEADER,
                ((s, v, _fmt(float(t))) for s, v, t in out_votes))

    link_rows = rows(friends_src, 4)
    first = next(link_rows)
    out_links = [] if not first[0].strip('"').isdigit() else [first]
    out_links.extend(link_rows)
    _write_rows(outdir / "friends.csv", FRIENDS_HEADER,
                ((user, friend) for _m, _d, user, friend in out_links))
    return outdir / "votes.csv", outdir / "friends.csv"
