"""Website detection: scoring, error-rate estimates and threshold calibration.

A target site's fingerprint is a set of training samples. A trace is scored
by its mean DTW distance to them and flagged when the score is strictly
below the site's threshold. False positives are estimated on samples of
other sites, false negatives by leave-one-out over the training set, and
the threshold is the largest one whose one-sided Clopper-Pearson upper
bound on the false-positive rate stays strictly below the target.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .dtw import DtwConfig, distance_matrix, dtw_distance
from .errors import InvalidArgument
from .recovery import RecoveredSeries

FP_PRESETS = (0.005, 0.01, 0.05)
FN_BIN_WIDTH = 0.05


@dataclass(frozen=True)
class Sample:
    site_id: str
    sample_index: int
    series: RecoveredSeries


@dataclass(frozen=True)
class Fingerprint:
    site_id: str
    training: tuple
    threshold: float | None = None

    def __post_init__(self):
        training = tuple(self.training)
        if not training:
            raise InvalidArgument("fingerprint needs at least one training sample")
        if any(s.site_id != self.site_id for s in training):
            raise InvalidArgument("training samples must all belong to the fingerprinted site")
        if self.threshold is not None and not self.threshold >= 0:
            raise InvalidArgument("threshold must be >= 0")
        object.__setattr__(self, "training", training)

    def with_threshold(self, threshold: float) -> "Fingerprint":
        return replace(self, threshold=threshold)


@dataclass(frozen=True)
class CalibrationReport:
    """Outcome of threshold selection for one target site.

    ``degenerate`` is set when even a zero false-positive count cannot push
    the confidence bound below the target; the threshold is then 0 and
    ``fp_ci_upper`` is the (too large) bound for a zero count.
    """

    site_id: str
    threshold: float
    target_fp: float
    fp_point_estimate: float
    fp_ci_upper: float
    fn_estimate: float
    confidence: float
    n_others: int
    degenerate: bool = False


@dataclass
class FnCurve:
    target_fp: float
    reports: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)  # (fn_bin_upper, count)


def build_fingerprint(corpus: Sequence[Sample], site_id: str, threshold: float | None = None) -> Fingerprint:
    return Fingerprint(site_id, tuple(s for s in corpus if s.site_id == site_id), threshold)


def check_corpus(corpus: Sequence[Sample]) -> None:
    dup = [k for k, n in Counter((s.site_id, s.sample_index) for s in corpus).items() if n > 1]
    if dup:
        raise InvalidArgument(f"duplicate (site_id, sample_index) in corpus: {dup[:3]}")


def clopper_pearson_upper(count: int, n: int, confidence: float = 0.95) -> float:
    """One-sided exact upper confidence bound for a binomial proportion."""
    if n <= 0 or not 0 <= count <= n:
        raise InvalidArgument("need 0 <= count <= n and n > 0")
    if not 0 < confidence < 1:
        raise InvalidArgument("confidence must lie in (0, 1)")
    if count == n:
        return 1.0
    return float(stats.beta.ppf(confidence, count + 1, n - count))


def _row_means(m: np.ndarray) -> np.ndarray:
    # fsum is exactly rounded, so the mean does not depend on column order
    return np.array([math.fsum(row) for row in m]) / m.shape[1]


def _series(s):
    return s.series if isinstance(s, Sample) else s


def avg_distance(s, f: Fingerprint, cfg: DtwConfig | None = None) -> float:
    """Mean DTW distance from ``s`` to every training sample of ``f``."""
    if not f.training:
        raise InvalidArgument("empty training set")
    d = [dtw_distance(_series(s), t.series, cfg).distance for t in f.training]
    return math.fsum(d) / len(d)


def average_distances(samples: Sequence, f: Fingerprint, cfg: DtwConfig | None = None, jobs: int = 1) -> np.ndarray:
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return np.array(list(pool.map(lambda s: avg_distance(s, f, cfg), samples)))
    return np.array([avg_distance(s, f, cfg) for s in samples], dtype=float)


def loo_means(f: Fingerprint, cfg: DtwConfig | None = None) -> np.ndarray:
    """Each training sample's mean distance to the other training samples."""
    n = len(f.training)
    if n < 2:
        raise InvalidArgument("leave-one-out needs at least two training samples")
    d = distance_matrix([t.series for t in f.training], cfg)
    return _loo_from_matrix(d)


def _loo_from_matrix(d: np.ndarray) -> np.ndarray:
    n = d.shape[0]
    off = d[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return _row_means(off)


def _check_others(f: Fingerprint, others: Sequence[Sample]):
    if len(others) == 0:
        raise InvalidArgument("need at least one sample from other sites")
    if any(isinstance(s, Sample) and s.site_id == f.site_id for s in others):
        raise InvalidArgument("others must not contain samples of the target site")


def fp_fraction(scores: np.ndarray, nu: float) -> float:
    scores = np.asarray(scores)
    if len(scores) == 0:
        raise InvalidArgument("no scores")
    return int(np.count_nonzero(scores < nu)) / len(scores)


def fn_fraction(scores: np.ndarray, nu: float) -> float:
    scores = np.asarray(scores)
    if len(scores) == 0:
        raise InvalidArgument("no scores")
    return int(np.count_nonzero(scores >= nu)) / len(scores)


def estimate_fp(f: Fingerprint, others: Sequence[Sample], nu: float, cfg: DtwConfig | None = None) -> float:
    """Fraction of other-site samples whose average distance is strictly below ``nu``."""
    _check_others(f, others)
    return fp_fraction(average_distances(others, f, cfg), nu)


def estimate_fn(f: Fingerprint, nu: float, cfg: DtwConfig | None = None, holdout: Sequence | None = None) -> float:
    """Fraction of target samples scoring at or above ``nu``.

    Leave-one-out over the training set by default; with ``holdout`` the
    given fresh target samples are scored against the full training set.
    """
    if holdout is not None:
        if len(holdout) == 0:
            raise InvalidArgument("empty holdout set")
        return fn_fraction(average_distances(holdout, f, cfg), nu)
    return fn_fraction(loo_means(f, cfg), nu)


def select_threshold_from_scores(
    other_scores,
    target_scores,
    target_fp: float,
    confidence: float = 0.95,
    site_id: str = "",
) -> CalibrationReport:
    """Threshold selection given precomputed other-site and target scores."""
    if not 0 < target_fp < 1:
        raise InvalidArgument("target_fp must lie in (0, 1)")
    if not 0 < confidence < 1:
        raise InvalidArgument("confidence must lie in (0, 1)")
    scores = np.sort(np.asarray(other_scores, dtype=float))
    n = len(scores)
    if n == 0:
        raise InvalidArgument("need at least one sample from other sites")
    candidates = np.unique(np.concatenate(([0.0], scores)))
    counts = np.searchsorted(scores, candidates, side="left")
    upper = np.where(counts == n, 1.0, stats.beta.ppf(confidence, counts + 1, np.maximum(n - counts, 1)))
    ok = np.flatnonzero(upper < target_fp)
    if len(ok) == 0:
        return CalibrationReport(site_id, 0.0, target_fp, 0.0, float(upper[0]), 1.0, confidence, n, True)
    k = ok[-1]
    nu = float(candidates[k])
    return CalibrationReport(
        site_id,
        nu,
        target_fp,
        int(counts[k]) / n,
        float(upper[k]),
        fn_fraction(target_scores, nu),
        confidence,
        n,
    )


def select_threshold(
    f: Fingerprint,
    others: Sequence[Sample],
    target_fp: float,
    confidence: float = 0.95,
    cfg: DtwConfig | None = None,
) -> CalibrationReport:
    """Largest threshold whose false-positive upper bound is below ``target_fp``.

    Candidates are 0 and the distinct average distances of ``others``; the
    false-positive count is constant between them, so nothing is lost.
    The reported false-negative rate is the leave-one-out estimate at the
    chosen threshold.
    """
    _check_others(f, others)
    if not 0 < target_fp < 1 or not 0 < confidence < 1:
        raise InvalidArgument("target_fp and confidence must lie in (0, 1)")
    return select_threshold_from_scores(
        average_distances(others, f, cfg), loo_means(f, cfg), target_fp, confidence, f.site_id
    )


def detect(s, f: Fingerprint, cfg: DtwConfig | None = None) -> bool:
    if f.threshold is None:
        raise InvalidArgument(f"fingerprint {f.site_id!r} has no threshold")
    return avg_distance(s, f, cfg) < f.threshold


def cumulative_fn(fn_values, width: float = FN_BIN_WIDTH) -> list:
    """(bin upper edge, number of sites whose FN rate is at or below it)."""
    edges = np.round(np.arange(0.0, 1.0 + width / 2, width), 10)
    fn_values = np.asarray(fn_values, dtype=float)
    return [(float(e), int(np.count_nonzero(fn_values <= e + 1e-12))) for e in edges]


def corpus_scores(distances: np.ndarray, site_ids: Sequence[str], target: str) -> tuple[np.ndarray, np.ndarray]:
    """Other-site average distances and target leave-one-out means from a corpus matrix."""
    site_ids = np.asarray(site_ids)
    mine = site_ids == target
    if mine.sum() < 2:
        raise InvalidArgument(f"site {target!r} needs at least two samples")
    others = _row_means(distances[np.ix_(~mine, mine)])
    loo = _loo_from_matrix(distances[np.ix_(mine, mine)])
    return others, loo


def fn_curve(
    corpus: Sequence[Sample],
    targets: Sequence[str],
    target_fp: float,
    cfg: DtwConfig | None = None,
    confidence: float = 0.95,
    distances: np.ndarray | None = None,
    jobs: int = 1,
) -> FnCurve:
    """Calibrate every target at ``target_fp`` and tabulate the FN rates reached.

    ``distances`` may carry a precomputed corpus distance matrix (same order
    as ``corpus``) so several presets share one DTW sweep.
    """
    corpus = list(corpus)
    check_corpus(corpus)
    if distances is None:
        distances = distance_matrix([s.series for s in corpus], cfg, jobs=jobs)
    site_ids = [s.site_id for s in corpus]
    curve = FnCurve(target_fp)
    for t in targets:
        others, loo = corpus_scores(distances, site_ids, t)
        curve.reports.append(select_threshold_from_scores(others, loo, target_fp, confidence, t))
    curve.cumulative = cumulative_fn([r.fn_estimate for r in curve.reports])
    return curve
