"""Synthetic fixture generator: a small KB plus labeled columns.

Builds a knowledge base whose classes carry discriminative properties and
tables whose target columns are entity labels, so that both the neural
path (class-specific vocabulary) and the property path (matching objects
in surrounding columns) carry signal.  Fully deterministic per seed.
"""

from dataclasses import dataclass

import numpy as np

from .encoder import EmbeddingTable
from .kb import (RDF_TYPE, RDFS_LABEL, KBSnapshot, Triple, TripleObject,
                 build_snapshot)
from .tables import ClassCatalog, Table, _build_table

NS = "http://example.org/"


@dataclass
class SyntheticData:
    snapshot: KBSnapshot
    catalog: ClassCatalog
    embedding: EmbeddingTable
    tables: dict                 # table_id -> Table
    gold: dict                   # (table_id, column_index) -> class_id
    labeled_columns: list        # (Table, target_index, class_id)
    triples: list


def generate(seed=0, n_classes=4, entities_per_class=40, n_columns=200,
             rows_per_column=5, words_per_class=30, d_w=24):
    rng = np.random.RandomState(seed)

    class_ids = ["Class%d" % c for c in range(n_classes)]
    catalog = ClassCatalog([(cid, NS + cid) for cid in class_ids])

    # class-specific vocabulary for entity labels
    vocab = {c: ["c%dw%d" % (c, j) for j in range(words_per_class)]
             for c in range(n_classes)}
    all_words = [w for words in vocab.values() for w in words]
    embedding = EmbeddingTable(
        {w: rng.normal(0.0, 0.5, d_w) for w in all_words}, d_w)

    triples = []
    entity_label = {}
    entity_value = {}
    entities = {c: [] for c in range(n_classes)}
    for c in range(n_classes):
        for i in range(entities_per_class):
            iri = NS + "e%d_%d" % (c, i)
            words = rng.choice(vocab[c], size=2, replace=False)
            label = "%s %s" % (words[0], words[1])
            value = "v%dx%d" % (c, i)
            entity_label[iri] = label
            entity_value[iri] = value
            entities[c].append(iri)
            triples.append(Triple(iri, RDF_TYPE,
                                  TripleObject("entity", NS + class_ids[c])))
            triples.append(Triple(iri, RDFS_LABEL,
                                  TripleObject("text", label, "en")))
            # class-discriminative property with a per-entity object value
            triples.append(Triple(iri, NS + "prop%d" % c,
                                  TripleObject("text", value)))
            # non-discriminative property shared by every class
            triples.append(Triple(iri, NS + "common",
                                  TripleObject("number", str(i))))
    snapshot = build_snapshot(triples)

    tables = {}
    gold = {}
    labeled_columns = []
    for idx in range(n_columns):
        c = idx % n_classes
        picks = rng.choice(entities_per_class, size=rows_per_column,
                           replace=False)
        col_entities = [entities[c][p] for p in picks]
        target = [entity_label[e] for e in col_entities]
        values = [entity_value[e] for e in col_entities]
        numbers = ["%d" % rng.randint(0, 5000) for _ in col_entities]
        dates = ["%04d-%02d-%02d" % (rng.randint(1900, 2030),
                                     rng.randint(1, 13), rng.randint(1, 29))
                 for _ in col_entities]
        fillers = ["misc item %d" % rng.randint(0, 100) for _ in col_entities]
        table_id = "t%03d" % idx
        table = _build_table(table_id, [target, values, numbers, dates, fillers])
        tables[table_id] = table
        gold[(table_id, 0)] = class_ids[c]
        labeled_columns.append((table, 0, class_ids[c]))

    return SyntheticData(snapshot, catalog, embedding, tables, gold,
                         labeled_columns, triples)
