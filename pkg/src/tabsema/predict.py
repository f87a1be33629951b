"""Column-level scoring (window averaging), the lookup-vote baseline, evaluation."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .ensemble import (EnsembleModel, ensemble1_score, ensemble2_score,
                       main_cell_p2vec_features)
from .hnn import HNNModel, encode_micro_table, forward_encoded
from .p2vec import p2vec_extract
from .sampler import extract_micro_tables
from .tables import ClassCatalog, Column, ColumnKind, Table


@dataclass
class ColumnPrediction:
    table_id: str
    column_index: int
    score: np.ndarray
    predicted_class: str
    window_scores: list = field(default_factory=list)
    abstained: bool = False


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: dict
    confusion: dict  # (gold_class, predicted_class) -> count
    n_columns: int
    fingerprint: str = ""


# ---------------------------------------------------------------------------
# Window scorers: callable(micro_table) -> score vector of length K
# ---------------------------------------------------------------------------

def make_hnn_scorer(model: HNNModel, emb):
    def scorer(mt):
        enc = encode_micro_table(mt, emb, model.cfg)
        _, y, _ = forward_encoded(enc, model)
        return y
    return scorer


def make_p2vec_scorer(base, props, kb, n, alpha):
    """Classifier over the property vector alone."""
    def scorer(mt):
        v = p2vec_extract(mt, props, n, alpha, kb)
        return base.predict_proba(v)
    return scorer


def make_main_cell_p2vec_scorer(base, emb, t_len, props, kb, n, alpha):
    """Classifier over [mean main-cell word vector, property vector]."""
    def scorer(mt):
        v = p2vec_extract(mt, props, n, alpha, kb)
        return base.predict_proba(main_cell_p2vec_features(mt, emb, t_len, v))
    return scorer


def make_ensemble1_scorer(model: HNNModel, ens: EnsembleModel, emb, props,
                          kb, n, alpha):
    def scorer(mt):
        return ensemble1_score(mt, model, ens, emb, props, kb, n, alpha)
    return scorer


def make_ensemble2_scorer(model: HNNModel, ens: EnsembleModel, emb, props,
                          kb, n, alpha):
    def scorer(mt):
        return ensemble2_score(mt, model, ens, emb, props, kb, n, alpha)
    return scorer


def score_column(table: Table, target_index: int, scorer, catalog: ClassCatalog,
                 m: int, l: int, keep_window_scores=False) -> ColumnPrediction:
    """Mean of the per-window score vectors over the sliding windows."""
    windows = extract_micro_tables(table, target_index, m, l)
    scores = [np.asarray(scorer(mt), dtype=np.float64) for mt in windows]
    mean_score = np.mean(scores, axis=0)
    predicted = catalog.class_id(int(np.argmax(mean_score)))
    return ColumnPrediction(
        table.id, target_index, mean_score, predicted,
        window_scores=scores if keep_window_scores else [])


def lookup_vote(column: Column, table_id, column_index, kb,
                catalog: ClassCatalog, alpha, n) -> ColumnPrediction:
    """Majority vote over the catalog classes of entities matched per cell.

    With no matched entity at all the prediction abstains: uniform score
    and the abstain flag set (abstentions count as incorrect downstream).
    """
    if column.kind != ColumnKind.ENTITY:
        raise ValueError("lookup-vote targets entity columns")
    iri_to_idx = {iri: i for i, (_, iri) in enumerate(catalog.classes)}
    votes = np.zeros(catalog.k)
    for cell in column.cells:
        if cell.is_empty():
            continue
        for entity in kb.entity_lookup(cell.raw_text, alpha, n):
            for c in kb.classes_of(entity):
                idx = iri_to_idx.get(c)
                if idx is not None:
                    votes[idx] += 1
    total = votes.sum()
    if total == 0:
        score = np.full(catalog.k, 1.0 / catalog.k)
        return ColumnPrediction(table_id, column_index, score,
                                catalog.class_id(0), abstained=True)
    score = votes / total
    predicted = catalog.class_id(int(np.argmax(score)))
    return ColumnPrediction(table_id, column_index, score, predicted)


def evaluate(predictions, gold, fingerprint="") -> EvalReport:
    """Accuracy = correctly labeled columns / all gold columns.

    gold: dict (table_id, column_index) -> class_id; every gold column must
    have a prediction.  Abstained predictions are counted as incorrect.
    """
    by_key = {(p.table_id, p.column_index): p for p in predictions}
    confusion = {}
    per_class_total = {}
    per_class_correct = {}
    correct = 0
    for key, gold_class in gold.items():
        if key not in by_key:
            raise KeyError("missing prediction for column %r" % (key,))
        pred = by_key[key]
        predicted = pred.predicted_class if not pred.abstained else "<abstain>"
        confusion[(gold_class, predicted)] = confusion.get(
            (gold_class, predicted), 0) + 1
        per_class_total[gold_class] = per_class_total.get(gold_class, 0) + 1
        if predicted == gold_class:
            correct += 1
            per_class_correct[gold_class] = per_class_correct.get(gold_class, 0) + 1
    n = len(gold)
    per_class = {c: per_class_correct.get(c, 0) / t
                 for c, t in sorted(per_class_total.items())}
    return EvalReport(correct / n if n else 0.0, per_class, confusion, n,
                      fingerprint)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def save_predictions(predictions, catalog: ClassCatalog, path, fingerprint=""):
    """CSV: table_id,column_index,predicted_class,score_0..score_{K-1}.

    The run fingerprint is embedded as a leading comment line.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("# fingerprint=%s\n" % fingerprint)
        writer = csv.writer(f)
        header = ["table_id", "column_index", "predicted_class"]
        header += ["score_%d" % i for i in range(catalog.k)]
        writer.writerow(header)
        for p in predictions:
            row = [p.table_id, p.column_index, p.predicted_class]
            row += ["%.12g" % s for s in p.score]
            writer.writerow(row)


def load_predictions(path):
    """Returns (predictions, fingerprint)."""
    predictions = []
    fingerprint = ""
    with open(path, newline="", encoding="utf-8") as f:
        first = f.readline()
        if first.startswith("# fingerprint="):
            fingerprint = first[len("# fingerprint="):].strip()
        reader = csv.reader(f)
        header = next(reader, None)
        for row in reader:
            if not row:
                continue
            table_id, column_index, predicted = row[0], int(row[1]), row[2]
            score = np.asarray([float(x) for x in row[3:]])
            predictions.append(ColumnPrediction(table_id, column_index,
                                                score, predicted))
    return predictions, fingerprint


def report_to_json(report: EvalReport):
    return {
        "accuracy": report.accuracy,
        "n_columns": report.n_columns,
        "per_class_accuracy": report.per_class_accuracy,
        "confusion": [[g, p, c] for (g, p), c in sorted(report.confusion.items())],
        "fingerprint": report.fingerprint,
    }


def save_report(report: EvalReport, json_path, text_path=None):
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report_to_json(report), f, indent=2, sort_keys=True)
    if text_path is not None:
        with open(text_path, "w", encoding="utf-8") as f:
            f.write(format_report(report))


def format_report(report: EvalReport) -> str:
    lines = ["accuracy: %.4f (%d columns)" % (report.accuracy, report.n_columns)]
    for c, acc in report.per_class_accuracy.items():
        lines.append("  %-30s %.4f" % (c, acc))
    if report.fingerprint:
        lines.append("fingerprint: %s" % report.fingerprint)
    return "\n".join(lines) + "\n"
