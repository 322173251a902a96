from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqag.backend import MockBackend
from mqag.harness import (
    CorrelationResult,
    DatasetError,
    EvalDataset,
    EvalRecord,
    Level,
    UndefinedCorrelationError,
    abstractiveness_split,
    answerability_sweep,
    convergence_curve,
    dataset_correlation,
    evaluate_dataset,
    filter_systems,
    load_dataset,
    pearson,
    resampled_correlations,
    spearman,
    summary_level_corr,
    system_level_corr,
    validate_level,
)
from mqag.scoring import ScoreConfig, Variant, score_pair

from synthdata import build_dataset, write_dataset


# --- independent oracles ---------------------------------------------------


def brute_pearson(xs, ys):
    """Raw-moment form of the product-moment correlation."""
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    syy = sum(y * y for y in ys)
    sxy = sum(x * y for x, y in zip(xs, ys))
    num = n * sxy - sx * sy
    den = math.sqrt((n * sxx - sx * sx) * (n * syy - sy * sy))
    return num / den


def brute_ranks(xs):
    """Average ranks computed from a value -> positions map."""
    positions = {}
    for i, v in enumerate(sorted(xs)):
        positions.setdefault(v, []).append(i + 1)
    return [sum(positions[v]) / len(positions[v]) for v in xs]


def brute_spearman(xs, ys):
    return brute_pearson(brute_ranks(xs), brute_ranks(ys))


def brute_system_level(metric, human):
    systems = sorted({s for s, _ in metric})
    docs = sorted({d for _, d in metric})
    z = [sum(metric[(s, d)] for d in docs) / len(docs) for s in systems]
    zbar = [sum(human[(s, d)] for d in docs) / len(docs) for s in systems]
    return brute_pearson(z, zbar), brute_spearman(z, zbar)


def brute_summary_level(metric, human):
    systems = sorted({s for s, _ in metric})
    docs = sorted({d for _, d in metric})
    ps, ss = [], []
    for d in docs:
        xs = [metric[(s, d)] for s in systems]
        ys = [human[(s, d)] for s in systems]
        if len(set(xs)) == 1 or len(set(ys)) == 1:
            continue
        ps.append(brute_pearson(xs, ys))
        ss.append(brute_spearman(xs, ys))
    return sum(ps) / len(ps), sum(ss) / len(ss)


# --- correlation primitives --------------------------------------------------


class TestPearson:
    def test_positive_affine(self):
        xs = [1.0, 2.0, 5.0, 7.0]
        assert pearson(xs, [2 * x + 1 for x in xs]) == 1.0

    def test_negation(self):
        xs = [1.0, 2.0, 3.0]
        assert pearson(xs, [-x for x in xs]) == -1.0

    def test_hand_case(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            pearson([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 2"):
            pearson([1.0], [2.0])

    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=20),
        st.floats(0.1, 10),
        st.floats(-5, 5),
    )
    def test_affine_invariance(self, xs, scale, shift):
        from hypothesis import assume

        ys = [2.0 * x + 0.5 for x in xs]
        scaled = [scale * x + shift for x in xs]
        # rounding in any of the transforms may collapse near-equal values
        assume(len(set(xs)) >= 2 and len(set(scaled)) >= 2 and len(set(ys)) >= 2)
        base = pearson(xs, ys)
        assert pearson(scaled, ys) == pytest.approx(base, abs=1e-9)
        assert pearson([-v for v in scaled], ys) == pytest.approx(-base, abs=1e-9)

    def test_matches_brute_force_on_random_vectors(self):
        rng = random.Random(99)
        for _ in range(100):
            xs = [rng.random() for _ in range(50)]
            ys = [rng.random() for _ in range(50)]
            assert pearson(xs, ys) == pytest.approx(brute_pearson(xs, ys), abs=1e-10)
            assert spearman(xs, ys) == pytest.approx(brute_spearman(xs, ys), abs=1e-10)


class TestSpearman:
    def test_monotone_transform(self):
        xs = [0.1, 0.5, 2.0, 3.0, 9.0]
        ys = [math.exp(x) for x in xs]
        assert spearman(xs, ys) == 1.0

    def test_hand_case(self):
        assert spearman([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-12)

    def test_tie_ranks_average(self):
        from mqag.harness import average_ranks

        assert average_ranks([1.0, 1.0, 2.0]) == [1.5, 1.5, 3.0]

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=15, unique=True))
    def test_strictly_monotone_gives_one(self, xs):
        ys = [x**3 + x for x in xs]
        assert spearman(xs, ys) == pytest.approx(1.0, abs=1e-12)


def grid_maps(values):
    """Build (metric, human) maps from {(system, doc): (m, h)}."""
    metric = {k: v[0] for k, v in values.items()}
    human = {k: v[1] for k, v in values.items()}
    return metric, human


class TestSystemLevel:
    def test_exact_agreement(self):
        metric = {(f"s{i}", f"d{j}"): i + 0.1 * j for i in range(3) for j in range(3)}
        result = system_level_corr(metric, dict(metric))
        assert result.pearson == 1.0
        assert result.n_used == 3

    def test_monotone_agreement_spearman(self):
        metric = {("a", "d0"): 0.1, ("a", "d1"): 0.2, ("a", "d2"): 0.15,
                  ("b", "d0"): 0.5, ("b", "d1"): 0.7, ("b", "d2"): 0.6}
        human = {("a", "d0"): 1.0, ("a", "d1"): 1.5, ("a", "d2"): 1.2,
                 ("b", "d0"): 3.0, ("b", "d1"): 3.5, ("b", "d2"): 3.1}
        assert system_level_corr(metric, human).spearman == 1.0

    def test_matches_brute_force(self):
        rng = random.Random(5)
        metric = {(f"s{i}", f"d{j}"): rng.random() for i in range(3) for j in range(2)}
        human = {k: rng.random() for k in metric}
        result = system_level_corr(metric, human)
        bp, bs = brute_system_level(metric, human)
        assert result.pearson == pytest.approx(bp, abs=1e-12)
        assert result.spearman == pytest.approx(bs, abs=1e-12)

    def test_coverage_mismatch(self):
        metric = {("a", "d0"): 0.1, ("a", "d1"): 0.2, ("b", "d0"): 0.5}
        with pytest.raises(ValueError, match="cover"):
            system_level_corr(metric, dict(metric))

    def test_key_mismatch(self):
        metric = {("a", "d0"): 0.1, ("b", "d0"): 0.5}
        human = {("a", "d0"): 0.1, ("c", "d0"): 0.5}
        with pytest.raises(ValueError, match="different"):
            system_level_corr(metric, human)


class TestSummaryLevel:
    def test_exact_agreement(self):
        metric = {(f"s{i}", f"d{j}"): i * 0.3 + j for i in range(3) for j in range(4)}
        result = summary_level_corr(metric, dict(metric))
        assert result.pearson == 1.0
        assert result.n_used == 4
        assert result.n_skipped == 0

    def test_constant_document_skipped(self):
        metric = {("a", "d0"): 0.5, ("b", "d0"): 0.5,  # constant -> skipped
                  ("a", "d1"): 0.1, ("b", "d1"): 0.9}
        human = {("a", "d0"): 1.0, ("b", "d0"): 2.0,
                 ("a", "d1"): 1.0, ("b", "d1"): 4.0}
        result = summary_level_corr(metric, human)
        assert result.n_skipped == 1
        assert result.n_used == 1
        assert result.pearson == 1.0  # only d1 counts, perfectly correlated

    def test_all_documents_skipped(self):
        metric = {("a", "d0"): 0.5, ("b", "d0"): 0.5}
        human = {("a", "d0"): 1.0, ("b", "d0"): 2.0}
        with pytest.raises(UndefinedCorrelationError):
            summary_level_corr(metric, human)

    def test_matches_brute_force(self):
        rng = random.Random(17)
        metric = {(f"s{i}", f"d{j}"): rng.random() for i in range(3) for j in range(3)}
        human = {k: rng.random() for k in metric}
        result = summary_level_corr(metric, human)
        bp, bs = brute_summary_level(metric, human)
        assert result.pearson == pytest.approx(bp, abs=1e-12)
        assert result.spearman == pytest.approx(bs, abs=1e-12)

    def test_single_document_equals_system_level(self):
        rng = random.Random(23)
        metric = {(f"s{i}", "d0"): rng.random() for i in range(5)}
        human = {k: rng.random() for k in metric}
        a = summary_level_corr(metric, human)
        b = system_level_corr(metric, human)
        assert a.pearson == pytest.approx(b.pearson, abs=1e-12)
        assert a.spearman == pytest.approx(b.spearman, abs=1e-12)


# --- convergence curve -------------------------------------------------------


def scored_distance_matrix(n_records=12, n_questions=30, seed=3):
    """Mock-scored synthetic records -> per-question distances + human."""
    dataset = build_dataset(n_systems=4, n_docs=n_records // 4, seed=seed)
    config = ScoreConfig(
        num_questions=n_questions, seed=seed, answerability_threshold=None
    )
    backend = MockBackend()
    reports = evaluate_dataset(dataset, config, backend, jobs=4)
    distances = [[pq.distance for pq in r.per_question] for r in reports]
    human = [r.human_score for r in dataset.records]
    return distances, human


class TestConvergence:
    def test_identity_resample_equals_full_correlation(self):
        distances, human = scored_distance_matrix()
        d = np.asarray(distances)
        n = d.shape[1]
        idx = np.tile(np.arange(n), (1, d.shape[0], 1))
        corr = resampled_correlations(d, np.asarray(human), idx)
        full = pearson([1.0 - float(row.mean()) for row in d], human)
        assert corr.shape == (1,)
        assert corr[0] == pytest.approx(full, abs=1e-12)

    def test_fixed_seed_reproducible(self):
        distances, human = scored_distance_matrix()
        a = convergence_curve(distances, human, [2, 5, 10], n_bootstrap=50, seed=7)
        b = convergence_curve(distances, human, [2, 5, 10], n_bootstrap=50, seed=7)
        assert a == b

    def test_std_shrinks_with_n(self):
        distances, human = scored_distance_matrix()
        curve = convergence_curve(distances, human, [5, 30], n_bootstrap=400, seed=1)
        assert curve[1].std_corr < curve[0].std_corr

    def test_insufficient_questions(self):
        distances, human = scored_distance_matrix(n_questions=10)
        with pytest.raises(ValueError, match="grid"):
            convergence_curve(distances, human, [5, 50], n_bootstrap=10, seed=0)

    def test_ragged_records_rejected(self):
        with pytest.raises(ValueError, match="question counts"):
            convergence_curve([[0.1, 0.2], [0.3]], [1.0, 2.0], [1], n_bootstrap=2)


# --- answerability sweep -----------------------------------------------------


def sweep_inputs(n_questions=14, seed=5):
    dataset = build_dataset(n_systems=3, n_docs=3, seed=seed)
    config = ScoreConfig(num_questions=n_questions, seed=seed, answerability_threshold=None)
    reports = evaluate_dataset(dataset, config, MockBackend(), jobs=4)
    human = [r.human_score for r in dataset.records]
    return dataset, reports, human


class TestAnswerabilitySweep:
    def test_shape(self):
        _, reports, human = sweep_inputs()
        points = answerability_sweep(reports, human, [4.0, 3.0, 2.0, 1.5])
        assert len(points) == 4
        assert [p.threshold for p in points] == [4.0, 3.0, 2.0, 1.5]

    def test_threshold_k_reproduces_unfiltered(self):
        _, reports, human = sweep_inputs()
        (point,) = answerability_sweep(reports, human, [4.0])
        unfiltered = pearson([r.score for r in reports], human)
        assert point.pearson == unfiltered  # bit-exact

    def test_mean_kept_monotone(self):
        _, reports, human = sweep_inputs()
        points = answerability_sweep(reports, human, [4.0, 3.5, 3.0, 2.5, 2.0, 1.5, 1.0])
        kept = [p.mean_n_kept for p in points]
        assert all(a >= b for a, b in zip(kept, kept[1:]))

    def test_rejects_f1_reports(self):
        dataset = build_dataset(n_systems=2, n_docs=2, seed=2)
        config = ScoreConfig(
            variant=Variant.F1, num_questions=4, seed=2, answerability_threshold=None
        )
        reports = evaluate_dataset(dataset, config, MockBackend(), jobs=2)
        with pytest.raises(ValueError, match="sum/src"):
            answerability_sweep(reports, [r.human_score for r in dataset.records], [4.0])


# --- abstractiveness split ---------------------------------------------------


def record(system, doc, source, summary, human=0.5):
    return EvalRecord(system, doc, source, summary, human)


class TestAbstractivenessSplit:
    def test_even_split_at_median(self):
        source = "alpha beta gamma delta epsilon zeta"
        records = [
            record("s", "d0", source, "alpha beta gamma"),        # 0.0
            record("s", "d1", source, "alpha beta novel1"),       # 1/3
            record("s", "d2", source, "alpha novel1 novel2"),     # 2/3
            record("s", "d3", source, "novel1 novel2 novel3"),    # 1.0
        ]
        dataset = EvalDataset(records, "t", Level.SUMMARY)
        low, high = abstractiveness_split(dataset)
        assert [r.doc_id for r in low.records] == ["d0", "d1"]
        assert [r.doc_id for r in high.records] == ["d2", "d3"]

    def test_all_extractive_ties_break_by_doc_id(self):
        source = "alpha beta gamma delta"
        records = [record("s", f"d{i}", source, "alpha beta") for i in (3, 1, 0, 2)]
        dataset = EvalDataset(records, "t", Level.SUMMARY)
        low, high = abstractiveness_split(dataset)
        assert [r.doc_id for r in low.records] == ["d0", "d1"]
        assert [r.doc_id for r in high.records] == ["d2", "d3"]

    def test_odd_count_extra_to_low(self):
        source = "alpha beta gamma"
        records = [record("s", f"d{i}", source, "alpha") for i in range(5)]
        dataset = EvalDataset(records, "t", Level.SUMMARY)
        low, high = abstractiveness_split(dataset)
        assert (len(low.records), len(high.records)) == (3, 2)

    def test_too_small(self):
        dataset = EvalDataset([record("s", "d0", "alpha beta", "alpha")], "t", Level.SUMMARY)
        with pytest.raises(ValueError, match="at least 2"):
            abstractiveness_split(dataset)


# --- dataset I/O -------------------------------------------------------------


class TestLoadDataset:
    def test_fixture_round_trip(self, tmp_path):
        dataset = build_dataset(n_systems=2, n_docs=3, seed=1)
        path = write_dataset(dataset, tmp_path / "data.jsonl")
        loaded = load_dataset(path)
        assert len(loaded.records) == 6
        assert loaded.name == "synthetic"
        assert loaded.level is Level.SUMMARY
        assert loaded.records == dataset.records

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DatasetError, match="empty"):
            load_dataset(path)

    def test_missing_field_names_it(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            json.dumps({"system_id": "s", "doc_id": "d", "source": "x", "summary": "y"}) + "\n",
            encoding="utf-8",
        )
        with pytest.raises(DatasetError, match="human_score"):
            load_dataset(path)

    def test_parse_error_reports_line(self, tmp_path):
        good = json.dumps(
            {"system_id": "s", "doc_id": "d", "source": "x", "summary": "y", "human_score": 1}
        )
        path = tmp_path / "bad.jsonl"
        path.write_text(good + "\n{broken\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(path)

    def test_wrong_type_names_field(self, tmp_path):
        rec = {"system_id": "s", "doc_id": "d", "source": "x", "summary": "y", "human_score": "hi"}
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="human_score"):
            load_dataset(path)

    def test_duplicate_keys_rejected(self, tmp_path):
        rec = {"system_id": "s", "doc_id": "d", "source": "x", "summary": "y", "human_score": 1}
        path = tmp_path / "dup.jsonl"
        path.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="duplicate"):
            load_dataset(path)

    def test_system_level_requires_two_systems(self, tmp_path):
        dataset = build_dataset(n_systems=1, n_docs=3, seed=1)
        path = write_dataset(dataset, tmp_path / "one.jsonl")
        with pytest.raises(DatasetError, match="2 systems"):
            load_dataset(path, level=Level.SYSTEM)

    def test_summary_level_requires_two_systems_per_doc(self):
        records = [
            record("a", "d0", "x y", "x"),
            record("b", "d0", "x y", "x"),
            record("a", "d1", "x y", "x"),
        ]
        dataset = EvalDataset(records, "t", Level.SUMMARY)
        with pytest.raises(DatasetError, match="d1"):
            validate_level(dataset)

    def test_filter_systems(self):
        dataset = build_dataset(n_systems=3, n_docs=2, seed=4)
        kept = filter_systems(dataset, ["sys0", "sys2"])
        assert kept.systems == ["sys0", "sys2"]
        with pytest.raises(DatasetError, match="unknown"):
            filter_systems(dataset, ["sys9"])


class TestEvaluateDataset:
    def test_reports_in_record_order_and_deterministic(self):
        dataset = build_dataset(n_systems=2, n_docs=2, seed=8)
        config = ScoreConfig(num_questions=6, seed=8, answerability_threshold=None)
        parallel = evaluate_dataset(dataset, config, MockBackend(), jobs=4)
        serial = [
            score_pair(r.source, r.summary, config, MockBackend()) for r in dataset.records
        ]
        assert parallel == serial

    def test_dataset_correlation_levels(self):
        dataset = build_dataset(n_systems=3, n_docs=3, seed=8)
        config = ScoreConfig(num_questions=8, seed=8, answerability_threshold=None)
        reports = evaluate_dataset(dataset, config, MockBackend(), jobs=4)
        scores = [r.score for r in reports]
        summary = dataset_correlation(dataset, scores)
        assert isinstance(summary, CorrelationResult)
        system_ds = EvalDataset(dataset.records, dataset.name, Level.SYSTEM)
        system = dataset_correlation(system_ds, scores)
        assert -1.0 <= system.pearson <= 1.0
        # the mock score tracks corruption, which tracks the human score
        assert summary.pearson > 0.0
        assert system.pearson > 0.0
