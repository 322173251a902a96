"""Meta-evaluation harness.

Loads (source, summary, human judgement) datasets, scores them through the
pipeline, and correlates metric scores against human judgements at the
summary level (per-document correlation across systems, averaged) or the
system level (correlation of per-system means). Also provides the
bootstrap question-count convergence curve and the answerability-threshold
sweep, both of which re-aggregate recorded per-question data without
re-querying any backend.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .backend import Backend
from .scoring import ScoreConfig, ScoreReport, Variant, apply_threshold, score_from_kept, score_pair
from .textmetrics import abstractiveness


class DatasetError(ValueError):
    """Malformed dataset file or records."""


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined (zero variance or no usable groups)."""


class Level(enum.Enum):
    SUMMARY = "summary"
    SYSTEM = "system"

    @classmethod
    def parse(cls, name: str) -> "Level":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown level: {name!r}") from None


@dataclass(frozen=True)
class EvalRecord:
    system_id: str
    doc_id: str
    source: str
    summary: str
    human_score: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.system_id, self.doc_id)


@dataclass(frozen=True)
class EvalDataset:
    records: tuple[EvalRecord, ...]
    name: str
    level: Level

    def __init__(self, records: Sequence[EvalRecord], name: str, level: Level):
        recs = tuple(records)
        if not recs:
            raise DatasetError("empty dataset")
        seen = set()
        for r in recs:
            if r.key in seen:
                raise DatasetError(f"duplicate (system_id, doc_id) key: {r.key}")
            seen.add(r.key)
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "level", level)

    @property
    def systems(self) -> list[str]:
        return sorted({r.system_id for r in self.records})

    @property
    def documents(self) -> list[str]:
        return sorted({r.doc_id for r in self.records})


def validate_level(dataset: EvalDataset) -> None:
    """Check the structural requirements of the dataset's correlation level."""
    if dataset.level is Level.SYSTEM:
        if len(dataset.systems) < 2:
            raise DatasetError(
                f"system-level dataset needs >= 2 systems, found {len(dataset.systems)}"
            )
    else:
        by_doc: dict[str, set[str]] = {}
        for r in dataset.records:
            by_doc.setdefault(r.doc_id, set()).add(r.system_id)
        thin = sorted(d for d, s in by_doc.items() if len(s) < 2)
        if thin:
            raise DatasetError(
                f"summary-level dataset needs >= 2 systems per document; "
                f"documents with fewer: {', '.join(thin)}"
            )


# ---------------------------------------------------------------------------
# Correlation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationResult:
    pearson: float
    spearman: float
    n_used: int
    n_skipped: int

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "n_used": self.n_used,
            "n_skipped": self.n_skipped,
        }


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; raises UndefinedCorrelationError on
    zero variance."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise ValueError("need at least 2 points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("zero variance")
    r = cov / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, r))


def average_ranks(xs: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their positions."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation: pearson over average ranks."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    return pearson(average_ranks(xs), average_ranks(ys))


ScoreMap = dict[tuple[str, str], float]


def _check_shapes(metric: ScoreMap, human: ScoreMap) -> tuple[list[str], list[str]]:
    if set(metric) != set(human):
        raise ValueError("metric and human maps cover different (system, doc) keys")
    systems = sorted({s for s, _ in metric})
    docs = sorted({d for _, d in metric})
    for s in systems:
        covered = {d for s2, d in metric if s2 == s}
        if covered != set(docs):
            missing = sorted(set(docs) - covered)
            raise ValueError(f"system {s!r} does not cover documents: {', '.join(missing)}")
    return systems, docs


def system_level_corr(metric: ScoreMap, human: ScoreMap) -> CorrelationResult:
    """Correlate per-system means of metric and human scores."""
    systems, docs = _check_shapes(metric, human)
    if len(systems) < 2:
        raise ValueError("system-level correlation needs >= 2 systems")
    m = len(docs)
    metric_means = [math.fsum(metric[(s, d)] for d in docs) / m for s in systems]
    human_means = [math.fsum(human[(s, d)] for d in docs) / m for s in systems]
    return CorrelationResult(
        pearson=pearson(metric_means, human_means),
        spearman=spearman(metric_means, human_means),
        n_used=len(systems),
        n_skipped=0,
    )


def summary_level_corr(metric: ScoreMap, human: ScoreMap) -> CorrelationResult:
    """Average the across-systems correlation over documents.

    Documents where either score vector has zero variance are skipped and
    counted; if every document is skipped the correlation is undefined.
    """
    systems, docs = _check_shapes(metric, human)
    if len(systems) < 2:
        raise ValueError("summary-level correlation needs >= 2 systems per document")
    pearsons = []
    spearmans = []
    skipped = 0
    for d in docs:
        ms = [metric[(s, d)] for s in systems]
        hs = [human[(s, d)] for s in systems]
        try:
            pearsons.append(pearson(ms, hs))
            spearmans.append(spearman(ms, hs))
        except UndefinedCorrelationError:
            skipped += 1
    if not pearsons:
        raise UndefinedCorrelationError("correlation undefined on every document")
    return CorrelationResult(
        pearson=math.fsum(pearsons) / len(pearsons),
        spearman=math.fsum(spearmans) / len(spearmans),
        n_used=len(pearsons),
        n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Convergence over the number of questions (bootstrap)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    n: int
    mean_corr: float
    std_corr: float

    def to_dict(self) -> dict:
        return {"n": self.n, "mean_corr": self.mean_corr, "std_corr": self.std_corr}


def resampled_correlations(
    distances: np.ndarray, human: np.ndarray, indices: np.ndarray
) -> np.ndarray:
    """Correlation of bootstrap-resampled scores against human judgements.

    distances: (records, questions); indices: (draws, records, n); returns
    one correlation per draw, NaN where a draw has zero variance.
    """
    n_records = distances.shape[0]
    sampled = distances[np.arange(n_records)[None, :, None], indices]
    scores = 1.0 - sampled.mean(axis=2)
    centered = scores - scores.mean(axis=1, keepdims=True)
    h_centered = human - human.mean()
    num = centered @ h_centered
    den = np.sqrt((centered**2).sum(axis=1) * (h_centered**2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def convergence_curve(
    per_question_distances: Sequence[Sequence[float]],
    human: Sequence[float],
    n_grid: Sequence[int],
    n_bootstrap: int = 1000,
    seed: int | None = None,
) -> list[CurvePoint]:
    """Bootstrap the score correlation while varying the question count.

    For each n in the grid, every record's questions are resampled with
    replacement n_bootstrap times; each draw yields one correlation against
    the human scores. Fixed seeds give bit-identical curves.
    """
    n_records = len(per_question_distances)
    if n_records < 2:
        raise ValueError("need at least 2 records")
    if len(human) != n_records:
        raise ValueError("human score count does not match record count")
    lengths = {len(d) for d in per_question_distances}
    if len(lengths) != 1:
        raise ValueError("records carry different question counts")
    n_questions = lengths.pop()
    if not n_grid:
        raise ValueError("empty n grid")
    if min(n_grid) < 1 or max(n_grid) > n_questions:
        raise ValueError(
            f"n grid must lie in [1, {n_questions}], got [{min(n_grid)}, {max(n_grid)}]"
        )
    if n_bootstrap < 1:
        raise ValueError("n_bootstrap must be >= 1")

    distances = np.asarray(per_question_distances, dtype=float)
    human_arr = np.asarray(human, dtype=float)
    rng = np.random.default_rng(seed)
    curve = []
    for n in n_grid:
        idx = rng.integers(0, n_questions, size=(n_bootstrap, n_records, int(n)))
        corr = resampled_correlations(distances, human_arr, idx)
        valid = corr[~np.isnan(corr)]
        if valid.size == 0:
            mean = math.nan
            std = math.nan
        else:
            mean = float(valid.mean())
            std = float(valid.std(ddof=1)) if valid.size > 1 else 0.0
        curve.append(CurvePoint(n=int(n), mean_corr=mean, std_corr=std))
    return curve


# ---------------------------------------------------------------------------
# Answerability threshold sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    pearson: float
    spearman: float
    mean_n_kept: float

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "mean_n_kept": self.mean_n_kept,
        }


def answerability_sweep(
    reports: Sequence[ScoreReport], human: Sequence[float], thresholds: Sequence[float]
) -> list[SweepPoint]:
    """Re-aggregate recorded per-question data at each threshold.

    No backend is queried: scores are recomputed from the stored distances
    and answerability values exactly as the pipeline would have, so a
    threshold of K reproduces the unfiltered scores bit-for-bit.
    """
    if len(reports) != len(human):
        raise ValueError("report count does not match human score count")
    for report in reports:
        if report.config.variant is Variant.F1:
            raise ValueError("answerability sweep applies to sum/src variants only")
        if not report.per_question:
            raise ValueError("report lacks per-question data")
    points = []
    for t in thresholds:
        scores = []
        kept_counts = []
        for report in reports:
            answerabilities = [pq.answerability for pq in report.per_question]
            distances = [pq.distance for pq in report.per_question]
            kept = apply_threshold(answerabilities, t)
            scores.append(score_from_kept(distances, kept))
            kept_counts.append(sum(kept))
        points.append(
            SweepPoint(
                threshold=float(t),
                pearson=pearson(scores, list(human)),
                spearman=spearman(scores, list(human)),
                mean_n_kept=math.fsum(kept_counts) / len(kept_counts),
            )
        )
    return points


# ---------------------------------------------------------------------------
# Abstractiveness split
# ---------------------------------------------------------------------------


def abstractiveness_split(dataset: EvalDataset) -> tuple[EvalDataset, EvalDataset]:
    """Split records at the median abstractiveness into (low, high) halves.

    Ties break by doc_id then system_id; an odd record goes to the low
    half.
    """
    if len(dataset.records) < 2:
        raise ValueError("need at least 2 records to split")
    keyed = sorted(
        dataset.records,
        key=lambda r: (abstractiveness(r.summary, r.source), r.doc_id, r.system_id),
    )
    cut = (len(keyed) + 1) // 2
    low = EvalDataset(keyed[:cut], name=f"{dataset.name}-low", level=dataset.level)
    high = EvalDataset(keyed[cut:], name=f"{dataset.name}-high", level=dataset.level)
    return low, high


# ---------------------------------------------------------------------------
# Dataset I/O and scoring
# ---------------------------------------------------------------------------

_RECORD_FIELDS = {
    "system_id": str,
    "doc_id": str,
    "source": str,
    "summary": str,
    "human_score": (int, float),
}


def load_dataset(
    path: str | Path, level: Level | None = None, name: str | None = None
) -> EvalDataset:
    """Read a line-delimited JSON dataset.

    Each line is one record {"system_id", "doc_id", "source", "summary",
    "human_score"}. An optional sidecar file <stem>.meta.json may carry
    {"name", "level"}; explicit arguments win over the sidecar.
    """
    path = Path(path)
    sidecar = path.with_suffix(".meta.json")
    meta = {}
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise DatasetError(f"invalid sidecar {sidecar.name}: {exc}") from exc
        if not isinstance(meta, dict):
            raise DatasetError(f"sidecar {sidecar.name} must hold a JSON object")

    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DatasetError(f"line {lineno}: record must be a JSON object")
        values = {}
        for field_name, types in _RECORD_FIELDS.items():
            if field_name not in raw:
                raise DatasetError(f"line {lineno}: missing field {field_name!r}")
            value = raw[field_name]
            if not isinstance(value, types) or isinstance(value, bool):
                raise DatasetError(
                    f"line {lineno}: field {field_name!r} has wrong type "
                    f"{type(value).__name__}"
                )
            values[field_name] = value
        values["human_score"] = float(values["human_score"])
        records.append(EvalRecord(**values))

    if not records:
        raise DatasetError(f"{path}: empty dataset")

    if level is None:
        level = Level.parse(meta["level"]) if "level" in meta else Level.SUMMARY
    if name is None:
        name = meta.get("name", path.stem)

    dataset = EvalDataset(records, name=name, level=level)
    validate_level(dataset)
    return dataset


def filter_systems(dataset: EvalDataset, systems: Sequence[str]) -> EvalDataset:
    """Restrict a dataset to an allowlist of system ids."""
    allowed = set(systems)
    unknown = allowed - set(dataset.systems)
    if unknown:
        raise DatasetError(f"unknown systems in allowlist: {', '.join(sorted(unknown))}")
    kept = [r for r in dataset.records if r.system_id in allowed]
    return EvalDataset(kept, name=dataset.name, level=dataset.level)


def evaluate_dataset(
    dataset: EvalDataset, config: ScoreConfig, backend: Backend, jobs: int = 4
) -> list[ScoreReport]:
    """Score every record; reports come back in record order."""
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [
            pool.submit(score_pair, r.source, r.summary, config, backend)
            for r in dataset.records
        ]
        return [f.result() for f in futures]


def dataset_correlation(dataset: EvalDataset, scores: Sequence[float]) -> CorrelationResult:
    """Correlate per-record scores against human judgements at the
    dataset's level."""
    if len(scores) != len(dataset.records):
        raise ValueError("score count does not match record count")
    metric = {r.key: s for r, s in zip(dataset.records, scores)}
    human = {r.key: r.human_score for r in dataset.records}
    if dataset.level is Level.SYSTEM:
        return system_level_corr(metric, human)
    return summary_level_corr(metric, human)


def flat_correlation(scores: Sequence[float], human: Sequence[float]) -> CorrelationResult:
    """Plain per-record correlation, for subsets that no longer form a full
    (system, document) grid, e.g. abstractiveness halves."""
    return CorrelationResult(
        pearson=pearson(scores, human),
        spearman=spearman(scores, human),
        n_used=len(scores),
        n_skipped=0,
    )
