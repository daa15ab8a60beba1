"""Command-line pipeline: calibrate, fit, predict, simulate, evaluate, report.

Every command reads its inputs, writes fixed-named CSV/text outputs into
``--out`` and exits 0 only when all outputs were written.  Outputs are
byte-identical across reruns with identical inputs and seeds.  Time columns
are Digg hours prefixed ``digg_``; wall-clock columns carry ``wall_``.
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, estimation, prediction
from .activity import estimate_active_users, fit_activity_mixture
from .params import GlobalParams, PopularityFits, replace
from .records import StoryRecord, VoterClass, VoteStream
from .simulator import (SimConfig, WALL_SECONDS_PER_DIGG_HOUR, simulate_corpus)

_CLS = (VoterClass.SUBMITTER_FAN, VoterClass.OTHER_FAN, VoterClass.NON_FAN)
_CLS_COL = {VoterClass.SUBMITTER_FAN: "submitter_fan",
            VoterClass.OTHER_FAN: "other_fan",
            VoterClass.NON_FAN: "non_fan"}


class CommandError(RuntimeError):
    """A command failed; the message is printed and becomes a nonzero exit."""


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus(args):
    """Dataset from either a canonical directory (``--votes DIR``) or the
    three CSV paths."""
    votes = Path(args.votes)
    if votes.is_dir():
        stories, graph, _ = dataio.read_dataset(votes)
        return stories, graph
    if not args.friends or not args.promotions:
        raise CommandError("--friends and --promotions are required when "
                           "--votes is a single CSV file")
    return dataio.ingest(votes, args.friends, args.promotions)


def _load_params(args):
    if args.params:
        return dataio.read_params_file(args.params)
    return GlobalParams(), PopularityFits()


def _load_priors(args):
    if args.priors:
        return dataio.read_priors_file(args.priors)
    return None


def _streams(stories, promoted_only=False):
    out = []
    for s in stories:
        if promoted_only and s.t_promotion is None:
            continue
        if s.s0 is None:
            raise CommandError(f"story {s.story_id}: submitter fan count "
                               "unknown (no graph and no truth sidecar)")
        out.append(VoteStream.from_record(s))
    return out


def _resolve_time(spec_text, story: StoryRecord):
    """A time argument: plain Digg hours since submission, or ``promo+X``
    hours after the story's promotion (skips unpromoted stories)."""
    if spec_text.startswith("promo"):
        offset = spec_text[5:]
        off = float(offset.lstrip("+")) if offset else 0.0
        if story.t_promotion is None:
            return None
        return story.t_promotion + off
    return float(spec_text)


def _map_stories(fn, items, threads):
    """Order-preserving map, optionally on a thread pool."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# --------------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------------

def cmd_calibrate(args):
    out = _outdir(args)
    stage = "ingest"
    diag = []

    def record(stage_name, **kv):
        for k, v in kv.items():
            diag.append((stage_name, k, v))

    base_gp, base_fits = _load_params(args)
    try:
        stories, graph = _load_corpus(args)
        if len(stories) < 2:
            raise CommandError("calibration needs at least 2 stories")
        summary = dataio.corpus_stats(stories, graph or dataio.FanGraph(()))
        record(stage, n_stories=summary.n_stories, n_votes=summary.n_votes,
               n_voters=summary.n_voters)

        if graph is not None:
            stage = "activity"
            act = fit_activity_mixture(summary.activity_counts)
            record(stage, mu=act.mu, sigma=act.sigma, p_zero=act.p_zero,
                   loglik=act.loglik)

            stage = "active-users"
            users = estimate_active_users(summary.n_voters, act.p_zero)
            record(stage, users=users)

            stage = "fan-density"
            frac_zero = summary.n_voters_no_fans / summary.n_voters
            rho = estimation.estimate_rho(graph.n_edges,
                                          graph.n_users_with_fans,
                                          frac_zero, users)
            record(stage, total_fan_links=graph.n_edges,
                   users_with_fans=graph.n_users_with_fans,
                   fraction_zero_fans=frac_zero, rho=rho)
        else:
            # no identity structure to count users from (e.g. a simulated
            # corpus); the population parameters pass through unchanged
            users, rho = base_gp.users, base_gp.rho
            record("activity", skipped="no fan graph")

        stage = "popularity"
        if args.fix_popularity:
            # popularity curves describe the whole site's story flow; a
            # targeted calibration corpus may not sample it representatively,
            # so allow passing pre-fitted curves straight through
            fits = base_fits
            record(stage, skipped="fixed from --params")
        else:
            fits = estimation.fit_popularity_curves(
                summary.front_popularity, summary.upcoming_popularity,
                upcoming_vote_floor=args.upcoming_floor)
            record(stage, front_a=fits.front.a, front_b=fits.front.b,
                   front_nu=fits.front.nu, front_sigma=fits.front.sigma,
                   front_s_daily=fits.front.s_daily,
                   upcoming_c=fits.upcoming.c, upcoming_d=fits.upcoming.d)

        streams = _streams(stories, promoted_only=True)

        stage = "fan-visibility"
        fan = estimation.fit_fan_visibility(streams)
        record(stage, omega=fan.omega, c_submitter_fan=fan.c_submitter_fan,
               loglik=fan.loglik)

        stage = "site-visibility"
        gp = replace(base_gp, omega=fan.omega,
                     c_submitter_fan=fan.c_submitter_fan,
                     users=users, rho=rho)
        site = estimation.fit_site_visibility(streams, fits, gp)
        gp = replace(gp, surfing=site.surfing, p_other=site.p_other)
        record(stage, surfing_mu=site.surfing.mu, surfing_lambda=site.surfing.lam,
               p_other=site.p_other, loglik=site.loglik)

        stage = "attention-factors"
        c_fan = estimation.estimate_cfan(streams)
        c_non = estimation.estimate_cnonfan(streams, fits, gp, site.r_nonfan)
        gp = replace(gp, c_other_fan=c_fan, c_nonfan=c_non)
        record(stage, c_other_fan=c_fan, c_nonfan=c_non)
    except (CommandError, ValueError, RuntimeError) as exc:
        raise CommandError(f"calibration failed at stage {stage!r}: {exc}") \
            from exc

    # k_upcoming/k_front describe page layout, not behaviour; they pass
    # through from --params (or defaults) untouched.
    base_text = Path(args.params).read_text(encoding="utf-8") \
        if args.params else None
    dataio.write_params_file(out / "params.txt", gp, fits, base_text=base_text)
    _write_csv(out / "calibration_diagnostics.csv",
               ["stage", "key", "value"], diag)
    print(f"calibrate: wrote {out / 'params.txt'} "
          f"({len(diag)} diagnostic rows)")
    return 0


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------

def _fit_rows(streams, gp, fits, priors, upto_spec, threads):
    def one(item):
        idx, st, upto = item
        fit = estimation.fit_story_interest(st, gp, fits, upto=upto,
                                            priors=priors)
        return (st.story_id, st.t_promotion, fit.n_events,
                fit.story.r_submitter_fan, fit.story.r_other_fan,
                fit.story.r_nonfan,
                fit.at_bound[0], fit.at_bound[1], fit.at_bound[2],
                fit.converged, fit.loglik)

    items = []
    for i, st in enumerate(streams):
        upto = None
        if upto_spec is not None:
            rec = StoryRecord(st.story_id, "", t_promotion=st.t_promotion)
            upto = _resolve_time(upto_spec, rec)
            if upto is None:
                continue
        items.append((i, st, upto))
    return _map_stories(one, items, threads)


FIT_HEADER = (["story_id", "digg_t_promotion", "n_events"]
              + [f"r_{_CLS_COL[c]}" for c in _CLS]
              + [f"at_bound_{_CLS_COL[c]}" for c in _CLS]
              + ["converged", "loglik"])


def cmd_fit(args):
    out = _outdir(args)
    stories, _graph = _load_corpus(args)
    gp, fits = _load_params(args)
    priors = _load_priors(args)
    streams = _streams(stories)
    rows = _fit_rows(streams, gp, fits, priors, args.made_at, args.threads)
    _write_csv(out / "fits.csv", FIT_HEADER, rows)
    print(f"fit: wrote {out / 'fits.csv'} ({len(rows)} stories)")
    return 0


# --------------------------------------------------------------------------
# predict
# --------------------------------------------------------------------------

PREDICT_HEADER = (
    ["story_id", "digg_made_at", "digg_horizon"]
    + [f"observed_{_CLS_COL[c]}" for c in _CLS]
    + [f"predicted_{_CLS_COL[c]}" for c in _CLS] + ["predicted_total"]
    + [f"r_{_CLS_COL[c]}" for c in _CLS])
INTERVAL_COLS = (
    [f"{side}_{_CLS_COL[c]}" for c in _CLS for side in ("lo", "hi")]
    + ["lo_total", "hi_total"])


def cmd_predict(args):
    out = _outdir(args)
    stories, _graph = _load_corpus(args)
    gp, fits = _load_params(args)
    priors = _load_priors(args)
    with_interval = args.level is not None

    def one(item):
        idx, story, st, made_at, horizon = item
        if with_interval:
            seed = int(np.random.SeedSequence([args.seed, idx])
                       .generate_state(1)[0])
            fc = prediction.confidence_interval(
                st, made_at, horizon, gp, fits, priors,
                level=args.level, n_samples=args.samples, seed=seed)
        else:
            fc = prediction.predict(st, made_at, horizon, gp, fits, priors)
        observed = {c: float((st.times[c] <= made_at).sum()) for c in _CLS}
        observed[VoterClass.NON_FAN] += 1.0    # the submitter's own vote
        row = ([story.story_id, made_at, horizon]
               + [observed[c] for c in _CLS]
               + [fc.predicted[c] for c in _CLS] + [fc.predicted_total]
               + [fc.r_hat.r_submitter_fan, fc.r_hat.r_other_fan,
                  fc.r_hat.r_nonfan])
        if with_interval:
            for c in _CLS:
                row.extend(fc.interval[c])
            row.extend(fc.interval_total)
        return row

    items = []
    for idx, story in enumerate(stories):
        made_at = _resolve_time(args.made_at, story)
        horizon = _resolve_time(args.horizon, story)
        if made_at is None or horizon is None:
            continue
        if horizon < made_at:
            raise CommandError(f"story {story.story_id}: horizon "
                               f"{horizon} precedes made-at {made_at}")
        st = _streams([story])[0]
        items.append((idx, story, st, made_at, horizon))
    rows = _map_stories(one, items, args.threads)
    header = PREDICT_HEADER + (INTERVAL_COLS if with_interval else [])
    _write_csv(out / "predictions.csv", header, rows)
    print(f"predict: wrote {out / 'predictions.csv'} ({len(rows)} stories)")
    return 0


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(args):
    out = _outdir(args)
    gp, fits = _load_params(args)
    priors = _load_priors(args)
    if priors is None:
        raise CommandError("simulate requires --priors (interestingness "
                           "distributions to draw stories from)")
    cfg = SimConfig(gp=gp, n_stories=args.n_stories, story_priors=priors,
                    fits=fits, promote_delay=args.promote_delay,
                    promote_threshold=args.promote_threshold,
                    s0=args.s0, t_end=args.t_end, mode=args.mode,
                    seed=args.seed)
    ds = simulate_corpus(cfg)
    paths = dataio.write_dataset(
        ds.stories, out, truth=ds.truth,
        seconds_per_digg_hour=WALL_SECONDS_PER_DIGG_HOUR)
    n_votes = sum(s.n_votes for s in ds.stories)
    print(f"simulate: wrote {len(paths)} files under {out} "
          f"({len(ds.stories)} stories, {n_votes} votes)")
    return 0


# --------------------------------------------------------------------------
# evaluate
# --------------------------------------------------------------------------

METRICS_HEADER = ["group", "voter_class", "n", "median_abs_error",
                  "median_rel_error", "spearman", "classification_error"]


def cmd_evaluate(args):
    out = _outdir(args)
    stories, _graph = _load_corpus(args)
    by_id = {s.story_id: s for s in stories}

    with Path(args.predictions).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        pred_rows = list(reader)
    if not pred_rows:
        raise CommandError(f"{args.predictions}: no prediction rows")

    forecasts, actuals = [], []
    for row in pred_rows:
        story = by_id.get(row["story_id"])
        if story is None:
            raise CommandError(f"prediction for unknown story "
                               f"{row['story_id']!r}")
        horizon = float(row["digg_horizon"])
        predicted = {c: float(row[f"predicted_{_CLS_COL[c]}"]) for c in _CLS}
        counts = story.counts_at(horizon)
        forecasts.append(prediction.Forecast(
            made_at=float(row["digg_made_at"]), horizon=horizon,
            predicted=predicted, r_hat=None, fit=None, reconstruction=None))
        actuals.append({c: float(counts[c]) for c in _CLS})

    metrics = prediction.evaluate_corpus(forecasts, actuals)
    rows = []
    for (group, cls), m in sorted(metrics.rows.items(),
                                  key=lambda kv: (kv[0][0], kv[0][1].value)):
        rows.append((group, _CLS_COL[cls], m.n, m.median_abs_error,
                     m.median_rel_error, m.spearman, m.classification_error))
    _write_csv(out / "metrics.csv", METRICS_HEADER, rows)
    print(f"evaluate: wrote {out / 'metrics.csv'} ({len(rows)} rows)")
    return 0


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def cmd_report(args):
    out = _outdir(args)
    stories, graph = _load_corpus(args)
    summary = dataio.corpus_stats(stories, graph or dataio.FanGraph(()))

    rows = []
    for c in _CLS:
        counts = summary.class_counts_24h[c]
        if counts.size == 0:
            continue
        rows.append([_CLS_COL[c], counts.size, float(counts.mean())]
                    + [float(np.quantile(counts, q)) for q in _QUANTILES])
    _write_csv(out / "vote_distributions.csv",
               ["voter_class", "n_stories", "mean"]
               + [f"q{int(100 * q)}" for q in _QUANTILES], rows)

    corr_rows = []
    if summary.correlations:
        for (a, b), r in summary.correlations.items():
            corr_rows.append((_CLS_COL[a], _CLS_COL[b], r))
    _write_csv(out / "correlations.csv",
               ["class_a", "class_b", "pearson_r"], corr_rows)

    # per-story interestingness -> histograms + lognormal prior fit
    if args.fits:
        with Path(args.fits).open(newline="", encoding="utf-8") as fh:
            fit_rows = list(csv.DictReader(fh))
        r_cols = {c: np.array([float(r[f"r_{_CLS_COL[c]}"]) for r in fit_rows])
                  for c in _CLS}
        at_bound = {c: np.array([r[f"at_bound_{_CLS_COL[c]}"] == "1"
                                 for r in fit_rows]) for c in _CLS}
    else:
        gp, fits = _load_params(args)
        priors = _load_priors(args)
        streams = _streams(stories)
        fitted = _fit_rows(streams, gp, fits, priors, None, args.threads)
        r_cols = {c: np.array([row[3 + i] for row in fitted])
                  for i, c in enumerate(_CLS)}
        at_bound = {c: np.array([bool(row[6 + i]) for row in fitted])
                    for i, c in enumerate(_CLS)}

    prior_rows, hist_rows = [], []
    for c in _CLS:
        keep = r_cols[c][~at_bound[c]]
        keep = keep[keep > 0]
        if keep.size >= 2:
            logs = np.log(keep)
            prior_rows.append((_CLS_COL[c], keep.size,
                               float(logs.mean()), float(logs.std(ddof=1))))
            edges = np.linspace(logs.min(), logs.max() + 1e-9, 13)
            counts, _ = np.histogram(logs, bins=edges)
            for lo, hi, n in zip(edges[:-1], edges[1:], counts):
                hist_rows.append((_CLS_COL[c], float(lo), float(hi), int(n)))
        else:
            prior_rows.append((_CLS_COL[c], keep.size, "", ""))
    _write_csv(out / "prior_fit.csv",
               ["voter_class", "n_used", "log_mu", "log_sigma"], prior_rows)
    _write_csv(out / "r_histograms.csv",
               ["voter_class", "log_r_lo", "log_r_hi", "count"], hist_rows)
    print(f"report: wrote 4 tables under {out}")
    return 0


# --------------------------------------------------------------------------
# argument surface
# --------------------------------------------------------------------------

def _add_dataset_flags(p):
    p.add_argument("--votes", required=True,
                   help="votes CSV, or a canonical dataset directory")
    p.add_argument("--friends", help="friends CSV (fan_id,followee_id)")
    p.add_argument("--promotions", help="promotions CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="votedyn",
        description="Vote-dynamics pipeline: calibrate parameters, fit "
                    "per-story interestingness, forecast vote counts, "
                    "simulate corpora and evaluate forecasts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate site parameters from a "
                                         "labeled corpus")
    _add_dataset_flags(p)
    p.add_argument("--params", help="base parameter file (comments kept)")
    p.add_argument("--upcoming-floor", dest="upcoming_floor", type=float,
                   default=100.0,
                   help="only stories above this many votes at promotion "
                        "inform the upcoming popularity curve")
    p.add_argument("--fix-popularity", dest="fix_popularity",
                   action="store_true",
                   help="keep the popularity curves from --params instead "
                        "of re-estimating them from this corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="fit per-story interestingness triples")
    _add_dataset_flags(p)
    p.add_argument("--params")
    p.add_argument("--priors")
    p.add_argument("--made-at", dest="made_at",
                   help="fit on votes up to this time (Digg hours, or "
                        "promo+X); default: each story's full stream")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="forecast per-class vote counts")
    _add_dataset_flags(p)
    p.add_argument("--params")
    p.add_argument("--priors")
    p.add_argument("--made-at", dest="made_at", required=True,
                   help="forecast time (Digg hours since submission, or "
                        "promo+X for X hours after promotion)")
    p.add_argument("--horizon", required=True,
                   help="target time, same syntax as --made-at")
    p.add_argument("--level", type=float,
                   help="posterior interval level, e.g. 0.95 (omit for "
                        "point forecasts only)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="draw a synthetic corpus")
    p.add_argument("--params")
    p.add_argument("--priors", required=False)
    p.add_argument("--n-stories", dest="n_stories", type=int, default=100)
    p.add_argument("--s0", type=int, default=100,
                   help="submitter fan count for every story")
    p.add_argument("--promote-delay", dest="promote_delay", type=float,
                   default=None, help="promote every story this many Digg "
                                      "hours after submission")
    p.add_argument("--promote-threshold", dest="promote_threshold",
                   type=float, default=None,
                   help="promote when total votes reach this count")
    p.add_argument("--t-end", dest="t_end", type=float, default=24.0)
    p.add_argument("--mode", choices=("agent", "mean_field"), default="agent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score a predictions table against "
                                        "realized counts")
    _add_dataset_flags(p)
    p.add_argument("--predictions", required=True,
                   help="predictions.csv from the predict command")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="distribution tables and "
                                      "interestingness histograms")
    _add_dataset_flags(p)
    p.add_argument("--params")
    p.add_argument("--priors")
    p.add_argument("--fits", help="reuse a fits.csv instead of refitting")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"votedyn {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"votedyn {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
