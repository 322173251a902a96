"""The consistency-scoring pipeline.

Given a source text and a summary: generate multiple-choice questions from
one of them, answer each question against both texts, reject questions the
answering backend finds unanswerable even on the generation context, and
aggregate the statistical distances between the paired option
distributions into a score in (-inf, 1].
"""

from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Sequence

from .backend import AnswerRequest, Backend, BackendError, GenerationRequest, MCQuestion, ShortGenerationError
from .distributions import DistanceKind, OptionDistribution, distance, effective_options


class Variant(enum.Enum):
    """Which text the questions are generated from; F1 combines both."""

    SUM = "sum"
    SRC = "src"
    F1 = "f1"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown variant: {name!r}") from None


@dataclass(frozen=True)
class ScoreConfig:
    """Pipeline configuration; defaults follow the best-performing setup
    (questions from the summary, total variation, threshold 2.0, N=50, K=4)."""

    variant: Variant = Variant.SUM
    distance: DistanceKind = DistanceKind.TOTAL_VARIATION
    num_questions: int = 50
    num_options: int = 4
    answerability_threshold: float | None = 2.0
    seed: int | None = None

    def __post_init__(self):
        if self.num_questions < 1:
            raise ValueError(f"num_questions must be >= 1, got {self.num_questions}")
        if self.num_options < 2:
            raise ValueError(f"num_options must be >= 2, got {self.num_options}")
        t = self.answerability_threshold
        if t is not None and not (1.0 <= t <= self.num_options):
            raise ValueError(
                f"answerability_threshold must lie in [1, {self.num_options}] or be None, got {t}"
            )

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "distance": self.distance.value,
            "num_questions": self.num_questions,
            "num_options": self.num_options,
            "answerability_threshold": self.answerability_threshold,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class AnsweredQuestion:
    """A question with its two option distributions and answerability."""

    question: MCQuestion
    dist_x: OptionDistribution
    dist_y: OptionDistribution
    answerability: float
    kept: bool = True

    def __post_init__(self):
        k = self.question.num_options
        if len(self.dist_x) != k or len(self.dist_y) != k:
            raise ValueError("distribution lengths do not match the question's option count")
        if not (1.0 <= self.answerability <= k):
            raise ValueError(f"answerability {self.answerability} outside [1, {k}]")


@dataclass(frozen=True)
class QuestionResult:
    """Per-question slice of a report: enough to re-aggregate offline."""

    question_id: str
    distance: float
    answerability: float
    kept: bool
    run: str | None = None

    def to_dict(self) -> dict:
        out = {
            "question_id": self.question_id,
            "distance": self.distance,
            "answerability": self.answerability,
            "kept": self.kept,
        }
        if self.run is not None:
            out["run"] = self.run
        return out


@dataclass(frozen=True)
class ScoreReport:
    """Everything one score_pair call produced."""

    score: float
    per_question: tuple[QuestionResult, ...]
    n_generated: int
    n_kept: int
    config: ScoreConfig
    sum_score: float | None = None
    src_score: float | None = None

    def to_dict(self) -> dict:
        out = {
            "score": self.score,
            "n_generated": self.n_generated,
            "n_kept": self.n_kept,
            "config": self.config.to_dict(),
            "per_question": [pq.to_dict() for pq in self.per_question],
        }
        if self.config.variant is Variant.F1:
            out["sum_score"] = self.sum_score
            out["src_score"] = self.src_score
        return out


def inconsistency(
    pairs: Sequence[tuple[OptionDistribution, OptionDistribution]], kind: DistanceKind
) -> float:
    """Mean distance over (source-conditioned, summary-conditioned) pairs."""
    if not pairs:
        raise ValueError("inconsistency needs at least one distribution pair")
    return math.fsum(distance(kind, px, py) for px, py in pairs) / len(pairs)


def mqag_score(
    pairs: Sequence[tuple[OptionDistribution, OptionDistribution]], kind: DistanceKind
) -> float:
    """1 minus the mean distance; at most 1, negative only for KL."""
    return 1.0 - inconsistency(pairs, kind)


def mqag_f1(sum_score: float, src_score: float) -> float:
    """Harmonic mean of the two variant scores; 0 when their sum is <= 0."""
    if not (math.isfinite(sum_score) and math.isfinite(src_score)):
        raise ValueError("scores must be finite")
    total = sum_score + src_score
    if total <= 0.0:
        return 0.0
    return 2.0 * sum_score * src_score / total


def apply_threshold(answerabilities: Sequence[float], threshold: float | None) -> list[bool]:
    """Kept flags for a threshold; None keeps everything.

    When nothing passes, the single question with the lowest answerability
    (first one on ties) is kept so the mean never runs over zero terms.
    """
    if not answerabilities:
        raise ValueError("no questions to filter")
    if threshold is None:
        return [True] * len(answerabilities)
    kept = [a <= threshold for a in answerabilities]
    if not any(kept):
        kept[answerabilities.index(min(answerabilities))] = True
    return kept


def score_from_kept(distances: Sequence[float], kept: Sequence[bool]) -> float:
    """1 minus the mean distance over kept questions."""
    values = [d for d, k in zip(distances, kept) if k]
    if not values:
        raise ValueError("no kept questions to aggregate")
    return 1.0 - math.fsum(values) / len(values)


def filter_answerable(
    items: Sequence[AnsweredQuestion], threshold: float | None
) -> list[AnsweredQuestion]:
    """Mark each item's kept flag against the answerability threshold."""
    kept = apply_threshold([item.answerability for item in items], threshold)
    return [dataclasses.replace(item, kept=flag) for item, flag in zip(items, kept)]


def _answer_all(
    backend: Backend, questions: Sequence[MCQuestion], source: str, summary: str
) -> list[tuple[OptionDistribution, OptionDistribution]]:
    """Answer every question against both texts, bounded by the backend's
    concurrency limit. Results come back in generation order regardless of
    completion order; the first backend failure aborts the rest."""
    dists: list[list[OptionDistribution | None]] = [[None, None] for _ in questions]
    jobs = []
    for i, q in enumerate(questions):
        jobs.append((i, 0, AnswerRequest(source, q)))
        jobs.append((i, 1, AnswerRequest(summary, q)))
    with ThreadPoolExecutor(max_workers=backend.max_concurrency) as pool:
        futures = {pool.submit(backend.answer, req): (i, side) for i, side, req in jobs}
        done, not_done = wait(futures, return_when=FIRST_EXCEPTION)
        error: Exception | None = None
        for fut in done:
            i, side = futures[fut]
            exc = fut.exception()
            if exc is None:
                dists[i][side] = fut.result()
            elif error is None or (
                isinstance(exc, BackendError) and not isinstance(error, BackendError)
            ):
                error = exc
        if error is not None or not_done:
            for fut in not_done:
                fut.cancel()
            if error is None:
                raise RuntimeError("answer workers stalled without an error")
            if isinstance(error, BackendError):
                error.completed_pairs = [  # type: ignore[attr-defined]
                    (i, dx, dy)
                    for i, (dx, dy) in enumerate(dists)
                    if dx is not None and dy is not None
                ]
            raise error
    return [(dx, dy) for dx, dy in dists]  # type: ignore[misc]


def _run_variant(
    variant: Variant,
    source: str,
    summary: str,
    config: ScoreConfig,
    backend: Backend,
    run_label: str | None = None,
) -> tuple[float, list[QuestionResult], int, int]:
    gen_context = summary if variant is Variant.SUM else source
    request = GenerationRequest(
        context=gen_context,
        num_questions=config.num_questions,
        num_options=config.num_options,
        seed=config.seed,
    )
    try:
        questions = backend.generate(request)
    except ShortGenerationError as short:
        # proceed with what came back; n_generated records the shortfall
        questions = short.questions
    if not questions:
        raise ShortGenerationError(config.num_questions, 0, [])

    try:
        pairs = _answer_all(backend, questions, source, summary)
    except BackendError as exc:
        completed = getattr(exc, "completed_pairs", [])
        exc.partial_report = _partial_report(questions, completed, variant, config, run_label)
        raise

    answered = []
    for question, (dist_x, dist_y) in zip(questions, pairs):
        gen_dist = dist_y if variant is Variant.SUM else dist_x
        answered.append(
            AnsweredQuestion(
                question=question,
                dist_x=dist_x,
                dist_y=dist_y,
                answerability=effective_options(gen_dist),
            )
        )
    answered = filter_answerable(answered, config.answerability_threshold)
    distances = [distance(config.distance, item.dist_x, item.dist_y) for item in answered]
    kept_flags = [item.kept for item in answered]
    score = score_from_kept(distances, kept_flags)
    results = [
        QuestionResult(
            question_id=item.question.id,
            distance=dist,
            answerability=item.answerability,
            kept=item.kept,
            run=run_label,
        )
        for item, dist in zip(answered, distances)
    ]
    return score, results, len(questions), sum(kept_flags)


def _partial_report(
    questions: Sequence[MCQuestion],
    completed: Sequence[tuple[int, OptionDistribution, OptionDistribution]],
    variant: Variant,
    config: ScoreConfig,
    run_label: str | None,
) -> ScoreReport:
    results = []
    for i, dist_x, dist_y in completed:
        gen_dist = dist_y if variant is Variant.SUM else dist_x
        results.append(
            QuestionResult(
                question_id=questions[i].id,
                distance=distance(config.distance, dist_x, dist_y),
                answerability=effective_options(gen_dist),
                kept=False,
                run=run_label,
            )
        )
    return ScoreReport(
        score=math.nan,
        per_question=tuple(results),
        n_generated=len(questions),
        n_kept=0,
        config=config,
    )


def score_pair(source: str, summary: str, config: ScoreConfig, backend: Backend) -> ScoreReport:
    """Run the full pipeline for one (source, summary) pair.

    The generation context is the summary for the SUM variant and the
    source for SRC; F1 runs both and combines them with the harmonic mean.
    Distances always take the source-conditioned distribution first.
    """
    if not source.strip():
        raise ValueError("source text is empty")
    if not summary.strip():
        raise ValueError("summary text is empty")

    if config.variant is Variant.F1:
        sum_cfg = dataclasses.replace(config, variant=Variant.SUM)
        src_cfg = dataclasses.replace(config, variant=Variant.SRC)
        sum_score, sum_results, sum_generated, sum_kept = _run_variant(
            Variant.SUM, source, summary, sum_cfg, backend, run_label="sum"
        )
        src_score, src_results, src_generated, src_kept = _run_variant(
            Variant.SRC, source, summary, src_cfg, backend, run_label="src"
        )
        return ScoreReport(
            score=mqag_f1(sum_score, src_score),
            per_question=tuple(sum_results + src_results),
            n_generated=sum_generated + src_generated,
            n_kept=sum_kept + src_kept,
            config=config,
            sum_score=sum_score,
            src_score=src_score,
        )

    score, results, n_generated, n_kept = _run_variant(
        config.variant, source, summary, config, backend
    )
    return ScoreReport(
        score=score,
        per_question=tuple(results),
        n_generated=n_generated,
        n_kept=n_kept,
        config=config,
    )
