"""Micro-table extraction (sliding window), training-set assembly and splits."""

import json
from dataclasses import dataclass

import numpy as np

from .tables import Cell, ClassCatalog, Column, ColumnKind, MicroTable, Table


@dataclass(frozen=True)
class Sample:
    micro_table: MicroTable
    label: int


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    train_fraction: float

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0,1)")


def _empty_column(m):
    return Column([""] * m, ColumnKind.ENTITY)


def _pad_cells(cells, m):
    cells = list(cells)
    return cells + [Cell("")] * (m - len(cells))


def extract_micro_tables(table: Table, target_index: int, m: int, l: int):
    """Slide a window of m rows over the target column, step one cell.

    Surrounding columns are the first l non-target columns left to right,
    padded with all-empty columns if the table has fewer.  A target column
    shorter than m yields a single zero-padded micro table.
    """
    if not 0 <= target_index < len(table.columns):
        raise IndexError("target_index out of range")
    target = table.columns[target_index]
    if target.kind != ColumnKind.ENTITY:
        raise ValueError("target column is not an entity column")
    if m < 1 or l < 0:
        raise ValueError("require m >= 1 and l >= 0")

    others = [c for i, c in enumerate(table.columns) if i != target_index][:l]
    big_m = len(target.cells)

    windows = []
    if big_m < m:
        starts = [0]
    else:
        starts = range(big_m - m + 1)
    for start in starts:
        t_cells = _pad_cells(target.cells[start:start + m], m)
        surrounding = [
            Column([c.raw_text for c in _pad_cells(col.cells[start:start + m], m)],
                   col.kind)
            for col in others
        ]
        surrounding += [_empty_column(m)] * (l - len(surrounding))
        windows.append(MicroTable(Column([c.raw_text for c in t_cells],
                                         ColumnKind.ENTITY), surrounding))
    return windows


def build_training_set(labeled_columns, catalog: ClassCatalog, m: int, l: int):
    """Turn labeled columns into Samples; order is input order then window order."""
    samples = []
    for table, target_index, class_id in labeled_columns:
        if class_id not in catalog.index:
            raise KeyError("unknown class_id: %s" % class_id)
        label = catalog.index_of(class_id)
        for mt in extract_micro_tables(table, target_index, m, l):
            samples.append(Sample(mt, label))
    return samples


def split_dataset(columns, spec: SplitSpec):
    """Split at the column level: floor(fraction*n) train, remainder test.

    Reproducible from the seed; train/test are disjoint and cover the input.
    """
    n = len(columns)
    n_train = int(np.floor(spec.train_fraction * n))
    rng = np.random.RandomState(spec.seed)
    order = rng.permutation(n)
    train = [columns[i] for i in sorted(order[:n_train])]
    test = [columns[i] for i in sorted(order[n_train:])]
    return train, test


def _micro_table_to_json(mt: MicroTable):
    return {
        "target": [c.raw_text for c in mt.target.cells],
        "surrounding": [
            {"kind": col.kind.value, "cells": [c.raw_text for c in col.cells]}
            for col in mt.surrounding
        ],
    }


def _micro_table_from_json(obj):
    surrounding = [Column(col["cells"], ColumnKind(col["kind"]))
                   for col in obj["surrounding"]]
    return MicroTable(Column(obj["target"], ColumnKind.ENTITY), surrounding)


def save_training_set(samples, path):
    """Write a JSON-lines manifest, one Sample per line."""
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            rec = _micro_table_to_json(s.micro_table)
            rec["label"] = s.label
            f.write(json.dumps(rec) + "\n")


def load_training_set(path):
    samples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            samples.append(Sample(_micro_table_from_json(obj), obj["label"]))
    return samples
