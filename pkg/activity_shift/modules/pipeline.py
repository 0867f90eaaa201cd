"""
Pipeline module for the activity-shift toolkit.

This module runs every analysis over a population of timelines and writes
the report files. Per-user work fans out to a joblib worker pool; results
are put in canonical order (user_id, class, date) before anything is
aggregated or written, so reruns produce identical bytes.
"""

import json
import logging
import os
import platform
import zlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import joblib
import numpy as np
import pandas as pd
import scipy
from joblib import Parallel, delayed

from .. import __version__
from ..config import RunConfig
from ..exceptions import InsufficientDataError, PipelineError, ValidationError
from .metrics import METRICS, UserActivityPoint, activity_point, box_summary, class_divergence_matrix
from .segmented import Jump, JumpSeries, SegmentedFit, aggregate_jumps, breakpoint_count_histogram, jump_ratio
from .switch_models import MultistateFit
from .switchpoint import SwitchpointPosterior
from .timeline import AnalysisWindow, Timeline, restrict, total_and_mean_rate, weekly_activity

logger = logging.getLogger(__name__)

ALL_USERS = "all"
FLOAT_FORMAT = "%.6g"


def derived_seed(seed: int, key: str) -> int:
    """Seed of an independent stream named by `key`."""
    state = np.random.SeedSequence([seed, zlib.crc32(key.encode("utf-8"))]).generate_state(1)
    return int(state[0])


@dataclass
class UserResult:
    """Per-user detector output, or the error that stopped it."""

    user_id: str
    user_class: str
    total: int = 0
    mean_rate: float = 0.0
    fit: Optional[SegmentedFit] = None
    ssr_jumps: List[Jump] = field(default_factory=list)
    posterior: Optional[SwitchpointPosterior] = None
    bayes_jumps: List[Jump] = field(default_factory=list)
    multistate: Optional[MultistateFit] = None
    error: Optional[str] = None

    @property
    def excluded(self) -> bool:
        return self.error is None and self.total == 0


@dataclass
class ReportBundle:
    """Everything a run produced, in canonical order."""

    config: RunConfig
    points: List[UserActivityPoint]
    users: List[UserResult]
    divergence: Dict[str, Optional[Tuple[List[str], np.ndarray]]]
    ssr_series: Dict[str, JumpSeries]
    bayes_series: Dict[str, JumpSeries]
    breakpoints: Dict[str, Dict[int, float]]
    before_after: List[Dict[str, Any]]
    weekly: Dict[str, List[Tuple[Any, float]]]
    notes: List[str] = field(default_factory=list)
    skipped_records: int = 0

    @property
    def errors(self) -> List[Dict[str, str]]:
        return [{"user_id": u.user_id, "error": u.error} for u in self.users if u.error is not None]

    @property
    def excluded(self) -> List[str]:
        return [u.user_id for u in self.users if u.excluded]


def analyze_user(timeline: Timeline, config: RunConfig) -> UserResult:
    """
    Run both detectors (and the multistate model) on one user.

    Failures are caught and returned in `error` so one user never affects another.
    """
    from ..analyzer import ActivityAnalyzer

    result = UserResult(timeline.user_id, timeline.user_class.value)
    try:
        analyzer = ActivityAnalyzer(config)
        series = analyzer.series(timeline)
        result.total, result.mean_rate = total_and_mean_rate(series)
        if result.total == 0:
            logger.debug(f"User {timeline.user_id} has no events in the window, excluded")
            return result
        result.fit, result.ssr_jumps = analyzer.ssr.jumps(series, timeline.user_id)
        seed = derived_seed(config.seed, timeline.user_id)
        result.posterior, result.bayes_jumps = analyzer.bayes.jumps(series, timeline.user_id, seed=seed)
        if config.levels_max > 0:
            result.multistate = analyzer.bayes.multistate(series)
    except Exception as e:
        logger.warning(f"Analysis of {timeline.user_id} failed: {e}")
        result.error = f"{type(e).__name__}: {e}"
    return result


def _class_keys(classes: Sequence[str]) -> List[str]:
    return sorted(set(classes)) + [ALL_USERS]


def _members(users: Sequence[UserResult], key: str) -> List[UserResult]:
    return [u for u in users if key == ALL_USERS or u.user_class == key]


def _divergences(points: Sequence[UserActivityPoint], config: RunConfig, notes: List[str]):
    grouped: Dict[Any, List[UserActivityPoint]] = {}
    for point in points:
        grouped.setdefault(point.user_class, []).append(point)
    divergence = {}
    for metric in METRICS:
        try:
            classes, matrix = class_divergence_matrix(grouped, metric, config.bins, config.epsilon)
            divergence[metric] = ([c.value for c in classes], matrix)
        except (InsufficientDataError, ValidationError) as e:
            notes.append(f"kl_{metric}: {e}")
            divergence[metric] = None
    return divergence


def _before_after(timelines: Sequence[Timeline], config: RunConfig) -> List[Dict[str, Any]]:
    periods = (
        ("before", AnalysisWindow(config.before_start, config.split_date)),
        ("after", AnalysisWindow(config.split_date, config.window_end)),
    )
    values: Dict[Tuple[str, str, str], List[float]] = {}
    for timeline in timelines:
        for period, window in periods:
            part = restrict(timeline, window)
            if not part.events:
                continue
            point = activity_point(part)
            for metric in METRICS:
                value = point.value(metric)
                if value is None:
                    continue
                for key in (timeline.user_class.value, ALL_USERS):
                    values.setdefault((key, metric, period), []).append(value)
    rows = []
    for key in _class_keys(t.user_class.value for t in timelines):
        for metric in METRICS:
            for period, _ in periods:
                sample = values.get((key, metric, period))
                if not sample:
                    continue
                summary = box_summary(sample, config.bootstrap_resamples, config.bootstrap_level,
                                      derived_seed(config.seed, f"{key}:{metric}:{period}"))
                rows.append({"class": key, "metric": metric, "period": period, **summary})
    return rows


def run_analysis(config: RunConfig, timelines: Sequence[Timeline], skipped_records: int = 0) -> ReportBundle:
    """
    Run every analysis over a population.

    Args:
        config: Run configuration
        timelines: Population (at least one timeline)
        skipped_records: Input records rejected upstream, echoed into the report

    Returns:
        ReportBundle

    Raises:
        ValidationError: If no timelines are given
        PipelineError: If more than `config.error_fraction` of users fail
    """
    if not timelines:
        raise ValidationError("run_analysis needs at least one timeline")
    window = config.window
    ordered = sorted((restrict(t, window) for t in timelines), key=lambda t: t.user_id)
    logger.info(f"Analyzing {len(ordered)} users over {window.start_date}..{window.end_date}")

    results = Parallel(n_jobs=config.workers)(delayed(analyze_user)(t, config) for t in ordered)
    users = sorted(results, key=lambda u: u.user_id)
    failed = [u for u in users if u.error is not None]
    if len(failed) > config.error_fraction * len(users):
        errors = [{"user_id": u.user_id, "error": u.error} for u in failed]
        logger.error(f"{len(failed)} of {len(users)} users failed, aborting run")
        raise PipelineError(f"{len(failed)} of {len(users)} users failed", errors)

    notes: List[str] = []
    points = [activity_point(t) for t in ordered if t.events]
    divergence = _divergences(points, config, notes)

    keys = _class_keys(u.user_class for u in users)
    analyzed = [u for u in users if u.error is None and not u.excluded]
    ssr_series, bayes_series, breakpoints, weekly = {}, {}, {}, {}
    for key in keys:
        members = _members(analyzed, key)
        ssr_series[key] = aggregate_jumps([j for u in members for j in u.ssr_jumps], window)
        bayes_series[key] = aggregate_jumps([j for u in members for j in u.bayes_jumps], window)
        breakpoints[key] = breakpoint_count_histogram([u.fit for u in members], config.k_max)
        weekly[key] = weekly_activity([t for t in ordered if key == ALL_USERS or t.user_class.value == key], window)

    bundle = ReportBundle(
        config=config,
        points=points,
        users=users,
        divergence=divergence,
        ssr_series=ssr_series,
        bayes_series=bayes_series,
        breakpoints=breakpoints,
        before_after=_before_after(ordered, config),
        weekly=weekly,
        notes=notes,
        skipped_records=skipped_records,
    )
    logger.info(f"Analyzed {len(analyzed)} users, excluded {len(bundle.excluded)}, failed {len(failed)}")
    return bundle


def _points_frame(bundle: ReportBundle) -> pd.DataFrame:
    frame = pd.DataFrame(
        [(p.user_id, p.user_class.value, p.total, p.retweets, p.rho, p.h) for p in bundle.points],
        columns=["user_id", "class", "M", "R", "rho", "h"],
    )
    return frame.astype({"rho": float, "h": float})


def _divergence_frame(entry) -> pd.DataFrame:
    if entry is None:
        return pd.DataFrame(columns=["class"])
    classes, matrix = entry
    frame = pd.DataFrame(matrix, columns=classes)
    frame.insert(0, "class", classes)
    return frame


def _jumps_frame(series_by_class: Dict[str, JumpSeries]) -> pd.DataFrame:
    rows = []
    for key, series in series_by_class.items():
        ratios = jump_ratio(series)
        for index, day in enumerate(series.window.dates()):
            plus, minus = float(series.j_plus[index]), float(series.j_minus[index])
            if plus == 0 and minus == 0:
                continue
            rows.append((day.isoformat(), key, plus, minus, ratios[index]))
    frame = pd.DataFrame(rows, columns=["date", "class", "j_plus", "j_minus", "ratio"])
    return frame.sort_values(["date", "class"], kind="mergesort")


def _users_frame(bundle: ReportBundle) -> pd.DataFrame:
    rows = []
    for u in bundle.users:
        posterior = u.posterior
        rows.append({
            "user_id": u.user_id,
            "class": u.user_class,
            "M": u.total,
            "m": u.mean_rate,
            "k": u.fit.k if u.fit else None,
            "breakpoints": ";".join(d.isoformat() for d in u.fit.breakpoint_days) if u.fit else "",
            "map_day": posterior.map_day.isoformat() if posterior else "",
            "lambda1": posterior.lambda1_mode if posterior else None,
            "lambda2": posterior.lambda2_mode if posterior else None,
            "p_value": posterior.p_value if posterior else None,
            "levels": u.multistate.levels if u.multistate else None,
            "status": "error" if u.error else ("excluded" if u.excluded else "ok"),
        })
    frame = pd.DataFrame(rows)
    for column in ("k", "levels"):
        frame[column] = frame[column].astype("Int64")
    return frame


def _frames(bundle: ReportBundle) -> Dict[str, pd.DataFrame]:
    before_after = pd.DataFrame(bundle.before_after, columns=[
        "class", "metric", "period", "median", "ci_low", "ci_high", "p05", "p95", "n"])
    weekly = pd.DataFrame(
        [(day.isoformat(), key, value) for key, weeks in bundle.weekly.items() for day, value in weeks],
        columns=["date", "class", "mean_per_day"],
    ).sort_values(["date", "class"], kind="mergesort")
    breakpoints = pd.DataFrame(
        [(key, k, fraction) for key, histogram in bundle.breakpoints.items() for k, fraction in histogram.items()],
        columns=["class", "k", "fraction"],
    )
    return {
        "activity_points.csv": _points_frame(bundle),
        "kl_rho.csv": _divergence_frame(bundle.divergence.get("rho")),
        "kl_h.csv": _divergence_frame(bundle.divergence.get("h")),
        "jumps_ssr.csv": _jumps_frame(bundle.ssr_series),
        "jumps_bayes.csv": _jumps_frame(bundle.bayes_series),
        "before_after.csv": before_after,
        "weekly_activity.csv": weekly,
        "breakpoints.csv": breakpoints,
        "users.csv": _users_frame(bundle),
    }


def run_metadata(bundle: ReportBundle) -> Dict[str, Any]:
    return {
        "config": bundle.config.to_dict(),
        "seed": bundle.config.seed,
        "versions": {
            "activity_shift": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "joblib": joblib.__version__,
        },
        "users": len(bundle.users),
        "errors": bundle.errors,
        "excluded": bundle.excluded,
        "skipped_records": bundle.skipped_records,
        "notes": bundle.notes,
    }


def emit(bundle: ReportBundle, out_dir: str, names: Optional[Sequence[str]] = None) -> List[str]:
    """
    Write the report files.

    Every file is written to a temporary sibling and renamed into place;
    on failure all files of this call are removed.

    Args:
        bundle: Report to write
        out_dir: Output directory (created if missing)
        names: CSV file names to write (default: all); run.json is always written

    Returns:
        Paths written, in write order

    Raises:
        PipelineError: On I/O failure
    """
    frames = _frames(bundle)
    unknown = sorted(set(names or ()) - set(frames))
    if unknown:
        raise ValidationError(f"Unknown report files: {unknown}")
    written: List[str] = []
    temporary = None
    try:
        os.makedirs(out_dir, exist_ok=True)
        outputs = [(name, frame) for name, frame in frames.items() if names is None or name in names]
        for name, frame in outputs:
            path = os.path.join(out_dir, name)
            temporary = path + ".tmp"
            frame.to_csv(temporary, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
            os.replace(temporary, path)
            written.append(path)
        path = os.path.join(out_dir, "run.json")
        temporary = path + ".tmp"
        with open(temporary, "w", encoding="utf-8") as stream:
            json.dump(run_metadata(bundle), stream, indent=2, sort_keys=True)
            stream.write("\n")
        os.replace(temporary, path)
        written.append(path)
        temporary = None
    except OSError as e:
        logger.error(f"Writing report to {out_dir} failed: {e}")
        for path in written + ([temporary] if temporary else []):
            if os.path.exists(path):
                os.remove(path)
        raise PipelineError(f"Writing report to {out_dir} failed: {e}")
    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written
