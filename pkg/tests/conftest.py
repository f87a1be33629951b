"""Shared fixtures: tiny models, a small embedding table, a fixture KB."""

import numpy as np
import pytest

from tabsema.encoder import EmbeddingTable
from tabsema.hnn import HNNConfig, HNNModel
from tabsema.kb import (RDF_TYPE, RDFS_LABEL, RDFS_SUBCLASSOF, Triple,
                        TripleObject, build_snapshot)
from tabsema.tables import ClassCatalog, Column, ColumnKind, MicroTable

EX = "http://ex.org/"


def tiny_hnn_config(**overrides):
    """Small architecture used by unit tests and gradient checks."""
    kwargs = dict(m=3, l=1, t_len=3, hidden=4, attn_size=3, theta1=(2,),
                  theta2=(2,), kappa1=2, kappa2=2, d_w=4, k=3)
    kwargs.update(overrides)
    return HNNConfig(**kwargs)


def make_micro_table(target_texts, surrounding_specs):
    """surrounding_specs: list of (kind, [cell texts])."""
    return MicroTable(
        Column(target_texts, ColumnKind.ENTITY),
        [Column(cells, ColumnKind(kind)) for kind, cells in surrounding_specs])


@pytest.fixture
def tiny_emb():
    rng = np.random.RandomState(7)
    words = ["apple", "inc", "google", "amazon", "alien", "avatar",
             "ridley", "scott", "james", "cameron", "foo", "bank"]
    return EmbeddingTable({w: rng.normal(0, 0.5, 4) for w in words}, 4)


@pytest.fixture
def tiny_model(tiny_emb):
    return HNNModel.init(tiny_hnn_config(), seed=0)


def company_film_triples():
    """Companies (one via a subclass), films with directors; mixed literals."""
    t = []

    def ent(iri, label, cls=None):
        t.append(Triple(iri, RDFS_LABEL, TripleObject("text", label, "en")))
        if cls:
            t.append(Triple(iri, RDF_TYPE, TripleObject("entity", cls)))

    ent(EX + "Google", "Google", EX + "Company")
    t.append(Triple(EX + "Google", EX + "industry", TripleObject("text", "Search")))
    t.append(Triple(EX + "Google", EX + "founded",
                    TripleObject("date", "1998-09-04")))
    t.append(Triple(EX + "Google", EX + "employees",
                    TripleObject("number", "190234")))

    ent(EX + "Amazon", "Amazon", EX + "Company")
    t.append(Triple(EX + "Amazon", EX + "industry", TripleObject("text", "Retail")))
    t.append(Triple(EX + "Amazon", EX + "founded",
                    TripleObject("date", "1994-07-05")))

    ent(EX + "AppleInc", "Apple Inc.", EX + "Company")
    t.append(Triple(EX + "AppleInc", EX + "industry",
                    TripleObject("text", "Electronics")))

    ent(EX + "FooBank", "Foo Bank", EX + "Bank")
    t.append(Triple(EX + "Bank", RDFS_SUBCLASSOF,
                    TripleObject("entity", EX + "Company")))

    ent(EX + "Alien", "Alien", EX + "Film")
    t.append(Triple(EX + "Alien", EX + "director",
                    TripleObject("entity", EX + "RidleyScott")))
    t.append(Triple(EX + "Alien", EX + "released",
                    TripleObject("date", "1979-05-25")))

    ent(EX + "Avatar", "Avatar", EX + "Film")
    t.append(Triple(EX + "Avatar", EX + "director",
                    TripleObject("entity", EX + "JamesCameron")))
    t.append(Triple(EX + "Avatar", EX + "released",
                    TripleObject("date", "2009-12-18")))

    ent(EX + "RidleyScott", "Ridley Scott")
    ent(EX + "JamesCameron", "James Cameron")
    return t


@pytest.fixture
def company_kb():
    return build_snapshot(company_film_triples())


@pytest.fixture
def company_catalog():
    return ClassCatalog([("Company", EX + "Company"), ("Film", EX + "Film")])


def labels_map_of(snapshot):
    """iri -> labels, for the independent oracles."""
    return {iri: list(rec.labels) for iri, rec in snapshot.entities.items()
            if rec.labels}
