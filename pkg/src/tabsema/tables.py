"""Tables, columns, micro tables and the class catalog.

All types are immutable after construction and safe to share across
threads.  Cell text is stored verbatim; trimming and normalization happen
downstream (encoder, KB matching).
"""

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional

# Fraction of non-empty cells that must parse as numbers (or dates) for a
# column to be classified as a number (or date) column.
KIND_RATIO_THRESHOLD = 0.6

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_YEAR_RE = re.compile(r"^\d{4}$")


class ColumnKind(Enum):
    ENTITY = "entity"
    NUMBER = "number"
    DATE = "date"


class EmptyColumnError(ValueError):
    """Raised when a column holds no non-empty cell."""


@dataclass(frozen=True)
class Cell:
    raw_text: str

    def is_empty(self):
        return self.raw_text.strip() == ""


@dataclass(frozen=True)
class Column:
    cells: tuple
    kind: ColumnKind

    def __init__(self, cells, kind):
        object.__setattr__(self, "cells", tuple(
            c if isinstance(c, Cell) else Cell(c) for c in cells))
        object.__setattr__(self, "kind", kind)


@dataclass(frozen=True)
class Table:
    id: str
    columns: tuple

    def __init__(self, id, columns):
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "columns", tuple(columns))

    @property
    def n_rows(self):
        return len(self.columns[0].cells) if self.columns else 0


@dataclass(frozen=True)
class MicroTable:
    """Fixed-shape sample: m target cells plus l surrounding columns.

    The first target cell is the main cell, the anchor for KB lookup.
    """
    target: Column
    surrounding: tuple

    def __init__(self, target, surrounding):
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "surrounding", tuple(surrounding))

    @property
    def main_cell(self):
        return self.target.cells[0]


@dataclass(frozen=True)
class ClassCatalog:
    """Fixed, ordered catalog of candidate classes; score vectors align to it."""
    classes: tuple  # of (class_id, kb_iri)
    index: dict = field(compare=False)

    def __init__(self, classes):
        classes = tuple((str(cid), str(iri)) for cid, iri in classes)
        ids = [cid for cid, _ in classes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate class ids in catalog")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "index", {cid: i for i, (cid, _) in enumerate(classes)})

    @property
    def k(self):
        return len(self.classes)

    def class_id(self, idx):
        return self.classes[idx][0]

    def class_iri(self, idx):
        return self.classes[idx][1]

    def index_of(self, class_id):
        return self.index[class_id]

    def iris(self):
        return [iri for _, iri in self.classes]


def parse_number(text: str) -> Optional[float]:
    text = text.strip()
    if not _NUMBER_RE.match(text):
        return None
    return float(text)


def parse_date(text: str):
    """Parse a date cell into (year, month, day) or None.

    Accepted formats: ISO YYYY-MM-DD, DD/MM/YYYY, and a bare YYYY year
    (month and day are then 0).
    """
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%d/%m/%Y"):
        try:
            dt = datetime.strptime(text, fmt)
            return dt.year, dt.month, dt.day
        except ValueError:
            pass
    if _YEAR_RE.match(text):
        return int(text), 0, 0
    return None


def detect_column_kind(cells) -> ColumnKind:
    """Classify a column as number, date or entity by a ratio test.

    A column is number (date) if at least KIND_RATIO_THRESHOLD of its
    non-empty cells parse as decimal numbers (supported date formats);
    otherwise it is an entity column.  Empty cells are excluded from the
    denominator.
    """
    texts = [c.raw_text if isinstance(c, Cell) else str(c) for c in cells]
    non_empty = [t for t in texts if t.strip() != ""]
    if not non_empty:
        raise EmptyColumnError("empty column")
    n = len(non_empty)
    n_num = sum(1 for t in non_empty if parse_number(t) is not None)
    if n_num / n >= KIND_RATIO_THRESHOLD:
        return ColumnKind.NUMBER
    n_date = sum(1 for t in non_empty if parse_date(t) is not None)
    if n_date / n >= KIND_RATIO_THRESHOLD:
        return ColumnKind.DATE
    return ColumnKind.ENTITY


def validate_micro_table(mt: MicroTable, m: int, l: int):
    """Check MicroTable shape invariants; returns a list of violations."""
    violations = []
    if len(mt.target.cells) != m:
        violations.append("target size")
    if len(mt.surrounding) != l:
        violations.append("surrounding count")
    for i, col in enumerate(mt.surrounding):
        if len(col.cells) != m:
            violations.append("surrounding column %d size" % i)
    return violations


def _build_table(table_id, raw_columns):
    """Build a Table from column-major cell texts, padding and kind-detecting."""
    if not raw_columns:
        return Table(table_id, [])
    n_rows = max(len(col) for col in raw_columns)
    columns = []
    for raw in raw_columns:
        cells = list(raw) + [""] * (n_rows - len(raw))
        try:
            kind = detect_column_kind(cells)
        except EmptyColumnError:
            kind = ColumnKind.ENTITY
        columns.append(Column(cells, kind))
    return Table(table_id, columns)


def load_table_csv(path, table_id=None):
    """Load a row-major RFC-4180 CSV file as a Table (no header handling)."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f)]
    n_cols = max((len(r) for r in rows), default=0)
    raw_columns = [[row[j] if j < len(row) else "" for row in rows]
                   for j in range(n_cols)]
    if table_id is None:
        table_id = str(path)
    return _build_table(table_id, raw_columns)


def save_table_csv(table: Table, path):
    rows = zip(*[[c.raw_text for c in col.cells] for col in table.columns])
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for row in rows:
            writer.writerow(row)


def load_table_json(path_or_obj):
    """Load the column-major JSON table format {"id":..., "columns":[[...],...]}."""
    if isinstance(path_or_obj, dict):
        obj = path_or_obj
    else:
        with open(path_or_obj, encoding="utf-8") as f:
            obj = json.load(f)
    return _build_table(obj["id"], obj["columns"])


def table_to_json(table: Table):
    return {"id": table.id,
            "columns": [[c.raw_text for c in col.cells] for col in table.columns]}


def save_table_json(table: Table, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(table_to_json(table), f)


def load_catalog(path) -> "ClassCatalog":
    """Read a class catalog JSON file: [[class_id, kb_iri], ...]."""
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if isinstance(obj, dict):
        obj = obj["classes"]
    return ClassCatalog(obj)


def save_catalog(catalog: ClassCatalog, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump([list(pair) for pair in catalog.classes], f)


def load_gold_labels(path):
    """Read gold labels CSV (table_id,column_index,class_id) into a dict."""
    gold = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row:
                continue
            table_id = row[0]
            column_index = int(row[1])
            class_id = row[2] if len(row) > 2 else ""
            gold[(table_id, column_index)] = class_id
    return gold


def save_gold_labels(gold, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for (table_id, column_index), class_id in gold.items():
            writer.writerow([table_id, column_index, class_id])
