"""Sampler: sliding windows, training-set assembly, column-level splits."""

import numpy as np
import pytest

from tabsema.sampler import (Sample, SplitSpec, build_training_set,
                             extract_micro_tables, load_training_set,
                             save_training_set, split_dataset)
from tabsema.tables import ClassCatalog, ColumnKind, Table, _build_table


def entity_table(table_id, target_cells, extra_columns=()):
    return _build_table(table_id, [list(target_cells)]
                        + [list(c) for c in extra_columns])


class TestExtractMicroTables:
    def test_window_count_formula(self):
        table = entity_table("t", ["a", "b", "c", "d", "e", "f"],
                             [["1"] * 6, ["x"] * 6, ["y"] * 6, ["z"] * 6])
        windows = extract_micro_tables(table, 0, 5, 4)
        assert len(windows) == 2  # M - m + 1

    def test_short_column_padded(self):
        table = entity_table("t", ["a", "b", "c"])
        windows = extract_micro_tables(table, 0, 5, 4)
        assert len(windows) == 1
        texts = [c.raw_text for c in windows[0].target.cells]
        assert texts == ["a", "b", "c", "", ""]

    def test_missing_surrounding_columns_padded(self):
        table = entity_table("t", ["a"] * 6)
        for mt in extract_micro_tables(table, 0, 5, 4):
            assert len(mt.surrounding) == 4
            for col in mt.surrounding:
                assert all(c.is_empty() for c in col.cells)

    def test_window_contents_match_slicing(self):
        cells = ["c%d" % i for i in range(9)]
        table = entity_table("t", cells, [[str(i) for i in range(9)]])
        windows = extract_micro_tables(table, 0, 4, 1)
        assert len(windows) == 6
        for start, mt in enumerate(windows):
            assert [c.raw_text for c in mt.target.cells] \
                == cells[start:start + 4]
            assert [c.raw_text for c in mt.surrounding[0].cells] \
                == [str(i) for i in range(start, start + 4)]
            assert mt.surrounding[0].kind == ColumnKind.NUMBER

    def test_surrounding_taken_left_to_right(self):
        table = _build_table("t", [["1"] * 5, ["a"] * 5, ["x"] * 5,
                                   ["y"] * 5, ["z"] * 5])
        mt = extract_micro_tables(table, 1, 5, 2)[0]
        assert mt.surrounding[0].cells[0].raw_text == "1"
        assert mt.surrounding[1].cells[0].raw_text == "x"

    def test_non_entity_target_rejected(self):
        table = _build_table("t", [["1", "2", "3"]])
        with pytest.raises(ValueError):
            extract_micro_tables(table, 0, 3, 0)

    def test_target_index_out_of_range(self):
        table = entity_table("t", ["a"] * 5)
        with pytest.raises(IndexError):
            extract_micro_tables(table, 3, 5, 0)


class TestBuildTrainingSet:
    def test_one_column_two_windows(self):
        cat = ClassCatalog([("A", "ia"), ("B", "ib")])
        table = entity_table("t", ["a"] * 6)
        samples = build_training_set([(table, 0, "B")], cat, 5, 4)
        assert len(samples) == 2
        assert all(s.label == 1 for s in samples)

    def test_empty_input(self):
        cat = ClassCatalog([("A", "ia")])
        assert build_training_set([], cat, 5, 4) == []

    def test_total_is_sum_of_window_counts(self):
        cat = ClassCatalog([("A", "ia")])
        cols = [(entity_table("t%d" % i, ["a"] * 5), 0, "A") for i in range(2)]
        assert len(build_training_set(cols, cat, 5, 4)) == 2

    def test_unknown_class_rejected(self):
        cat = ClassCatalog([("A", "ia")])
        table = entity_table("t", ["a"] * 5)
        with pytest.raises(KeyError):
            build_training_set([(table, 0, "Z")], cat, 5, 4)


class TestSplitDataset:
    def test_sizes(self):
        train, test = split_dataset(list(range(10)), SplitSpec(0, 0.7))
        assert (len(train), len(test)) == (7, 3)

    def test_411_columns(self):
        train, test = split_dataset(list(range(411)), SplitSpec(1, 0.7))
        assert (len(train), len(test)) == (287, 124)

    def test_deterministic(self):
        cols = list(range(50))
        assert split_dataset(cols, SplitSpec(5, 0.7)) \
            == split_dataset(cols, SplitSpec(5, 0.7))

    def test_disjoint_and_covering(self):
        rng = np.random.RandomState(0)
        for _ in range(10):
            n = rng.randint(1, 60)
            frac = rng.uniform(0.1, 0.9)
            cols = list(range(n))
            train, test = split_dataset(cols, SplitSpec(int(rng.randint(100)),
                                                        frac))
            assert set(train) | set(test) == set(cols)
            assert set(train) & set(test) == set()

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            SplitSpec(0, 1.0)
        with pytest.raises(ValueError):
            SplitSpec(0, 0.0)


def test_training_set_manifest_round_trip(tmp_path):
    cat = ClassCatalog([("A", "ia"), ("B", "ib")])
    table = _build_table("t", [["a", "b", "c", "d", "e", "f"],
                               ["1", "2", "3", "4", "5", "6"]])
    samples = build_training_set([(table, 0, "A")], cat, 5, 1)
    path = tmp_path / "train.jsonl"
    save_training_set(samples, path)
    loaded = load_training_set(path)
    assert len(loaded) == len(samples)
    for orig, back in zip(samples, loaded):
        assert back.label == orig.label
        assert [c.raw_text for c in back.micro_table.target.cells] \
            == [c.raw_text for c in orig.micro_table.target.cells]
        for co, cb in zip(orig.micro_table.surrounding,
                          back.micro_table.surrounding):
            assert cb.kind == co.kind
            assert [c.raw_text for c in cb.cells] \
                == [c.raw_text for c in co.cells]
