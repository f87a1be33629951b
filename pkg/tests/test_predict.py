"""Column scoring, the lookup-vote baseline, evaluation and report files."""

import numpy as np
import pytest

from conftest import EX
from tabsema.predict import (ColumnPrediction, evaluate, format_report,
                             load_predictions, lookup_vote, report_to_json,
                             save_predictions, save_report, score_column)
from tabsema.tables import ClassCatalog, Column, ColumnKind, _build_table

CAT3 = ClassCatalog([("A", "ia"), ("B", "ib"), ("C", "ic")])


def one_hot_scorer(sequence):
    """Scorer stub that returns pre-set one-hot vectors per call."""
    queue = list(sequence)

    def scorer(mt):
        idx = queue.pop(0)
        v = np.zeros(CAT3.k)
        v[idx] = 1.0
        return v

    return scorer


class TestScoreColumn:
    def test_single_window(self):
        table = _build_table("t", [["a", "b", "c"]])
        pred = score_column(table, 0, one_hot_scorer([1]), CAT3, 3, 0)
        assert pred.predicted_class == "B"
        assert np.array_equal(pred.score, [0.0, 1.0, 0.0])

    def test_identical_windows_average_to_same(self):
        table = _build_table("t", [["a", "b", "c", "d"]])
        pred = score_column(table, 0, one_hot_scorer([2, 2]), CAT3, 3, 0)
        assert np.array_equal(pred.score, [0.0, 0.0, 1.0])

    def test_mean_arithmetic(self):
        table = _build_table("t", [["a", "b", "c", "d", "e"]])
        pred = score_column(table, 0, one_hot_scorer([0, 0, 1]), CAT3, 3, 0,
                            keep_window_scores=True)
        assert np.allclose(pred.score, [2 / 3, 1 / 3, 0.0], atol=1e-12)
        assert pred.predicted_class == "A"
        assert len(pred.window_scores) == 3

    def test_window_order_invariance(self):
        table = _build_table("t", [["a", "b", "c", "d", "e"]])
        p1 = score_column(table, 0, one_hot_scorer([0, 1, 2]), CAT3, 3, 0)
        p2 = score_column(table, 0, one_hot_scorer([2, 0, 1]), CAT3, 3, 0)
        assert np.array_equal(p1.score, p2.score)

    def test_scores_sum_to_one(self):
        table = _build_table("t", [["a", "b", "c", "d"]])
        rng = np.random.RandomState(0)

        def scorer(mt):
            v = rng.uniform(0, 1, CAT3.k)
            return v / v.sum()

        pred = score_column(table, 0, scorer, CAT3, 3, 0)
        assert abs(pred.score.sum() - 1.0) < 1e-6


class TestLookupVote:
    @pytest.fixture
    def cat(self):
        return ClassCatalog([("Company", EX + "Company"),
                             ("Film", EX + "Film")])

    def test_unanimous_class(self, company_kb, cat):
        col = Column(["Google", "Amazon"], ColumnKind.ENTITY)
        pred = lookup_vote(col, "t", 0, company_kb, cat, 0.85, 3)
        assert pred.predicted_class == "Company"
        assert pred.score[cat.index_of("Company")] == 1.0
        assert not pred.abstained

    def test_no_match_abstains(self, company_kb, cat):
        col = Column(["qqqq", "wwww"], ColumnKind.ENTITY)
        pred = lookup_vote(col, "t", 0, company_kb, cat, 0.85, 3)
        assert pred.abstained
        assert np.allclose(pred.score, 0.5)

    def test_majority_vote(self, company_kb, cat):
        col = Column(["Google", "Amazon", "Alien"], ColumnKind.ENTITY)
        pred = lookup_vote(col, "t", 0, company_kb, cat, 0.85, 3)
        assert pred.predicted_class == "Company"
        # hand tally: 2 company votes, 1 film vote
        assert np.allclose(pred.score, [2 / 3, 1 / 3], atol=1e-12)

    def test_empty_cells_skipped(self, company_kb, cat):
        col = Column(["", "Google", " "], ColumnKind.ENTITY)
        pred = lookup_vote(col, "t", 0, company_kb, cat, 0.85, 3)
        assert pred.predicted_class == "Company"

    def test_non_entity_column_rejected(self, company_kb, cat):
        col = Column(["1", "2"], ColumnKind.NUMBER)
        with pytest.raises(ValueError):
            lookup_vote(col, "t", 0, company_kb, cat, 0.85, 3)


def make_pred(table_id, col, class_id, abstained=False):
    score = np.zeros(CAT3.k)
    if class_id in CAT3.index:
        score[CAT3.index_of(class_id)] = 1.0
    return ColumnPrediction(table_id, col, score, class_id,
                            abstained=abstained)


class TestEvaluate:
    def test_all_correct(self):
        preds = [make_pred("t1", 0, "A"), make_pred("t2", 0, "B")]
        gold = {("t1", 0): "A", ("t2", 0): "B"}
        assert evaluate(preds, gold).accuracy == 1.0

    def test_three_of_four(self):
        preds = [make_pred("t%d" % i, 0, c)
                 for i, c in enumerate(["A", "A", "B", "C"])]
        gold = {("t0", 0): "A", ("t1", 0): "A", ("t2", 0): "B",
                ("t3", 0): "A"}
        report = evaluate(preds, gold)
        assert report.accuracy == 0.75
        assert report.per_class_accuracy["A"] == pytest.approx(2 / 3)
        assert report.confusion[("A", "C")] == 1

    def test_abstention_counts_as_incorrect(self):
        preds = [make_pred("t1", 0, "A", abstained=True)]
        report = evaluate(preds, {("t1", 0): "A"})
        assert report.accuracy == 0.0
        assert report.confusion[("A", "<abstain>")] == 1

    def test_missing_prediction(self):
        with pytest.raises(KeyError):
            evaluate([], {("t1", 0): "A"})

    def test_self_gold_is_perfect(self):
        preds = [make_pred("t%d" % i, 0, c)
                 for i, c in enumerate(["A", "B", "C", "B"])]
        gold = {(p.table_id, p.column_index): p.predicted_class
                for p in preds}
        assert evaluate(preds, gold).accuracy == 1.0


def test_predictions_file_round_trip(tmp_path):
    preds = [ColumnPrediction("t1", 0, np.array([0.25, 0.5, 0.25]), "B"),
             ColumnPrediction("t2", 3, np.array([0.7, 0.2, 0.1]), "A")]
    path = tmp_path / "preds.csv"
    save_predictions(preds, CAT3, path, fingerprint="fp42")
    loaded, fingerprint = load_predictions(path)
    assert fingerprint == "fp42"
    assert len(loaded) == 2
    assert loaded[0].predicted_class == "B"
    assert loaded[1].column_index == 3
    for orig, back in zip(preds, loaded):
        assert np.allclose(orig.score, back.score, atol=1e-9)


def test_report_serialization(tmp_path):
    preds = [make_pred("t1", 0, "A"), make_pred("t2", 0, "B")]
    report = evaluate(preds, {("t1", 0): "A", ("t2", 0): "A"}, "fpX")
    doc = report_to_json(report)
    assert doc["accuracy"] == 0.5
    assert doc["fingerprint"] == "fpX"
    json_path = tmp_path / "report.json"
    text_path = tmp_path / "report.txt"
    save_report(report, json_path, text_path)
    assert json_path.exists()
    text = text_path.read_text(encoding="utf-8")
    assert "accuracy: 0.5000" in text
    assert format_report(report).startswith("accuracy:")
