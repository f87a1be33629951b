"""Candidate-property mining and property-vector (P2Vec) extraction.

A P2Vec marks which candidate KB properties link the micro table's main
cell entity to the first-row cells of the surrounding columns, normalized
to unit length.  Matching is boolean by design: a slot is either set or
not, never a degree.
"""

import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

import numpy as np

from .kernels import jaro as _jaro
from .kb import TripleObject, normalize_phrase
from .tables import MicroTable, parse_date


def jaro_similarity(a: str, b: str) -> float:
    """Standard Jaro similarity in [0, 1] (no normalization applied)."""
    return _jaro(a, b)


def _parse_decimal(text):
    try:
        return Decimal(text.strip())
    except (InvalidOperation, ValueError, ArithmeticError):
        return None


def _year_of(text):
    parsed = parse_date(text)
    if parsed is not None:
        return parsed[0]
    # xsd:dateTime lexical forms carry a leading ISO date
    parsed = parse_date(text.strip()[:10])
    return parsed[0] if parsed is not None else None


def cell_object_match(cell_text: str, obj: TripleObject, alpha: float, kb) -> bool:
    """Boolean match of a table cell against a triple object.

    Entities compare by English label (Jaro >= alpha), texts by Jaro,
    dates by year equality, numbers by exact decimal equality.
    """
    if obj.kind == "entity":
        cell_norm = normalize_phrase(cell_text)
        for label in kb.labels_of(obj.value):
            if _jaro(cell_norm, normalize_phrase(label)) >= alpha:
                return True
        return False
    if obj.kind == "text":
        return _jaro(normalize_phrase(cell_text),
                     normalize_phrase(obj.value)) >= alpha
    if obj.kind == "number":
        cell_value = _parse_decimal(cell_text)
        obj_value = _parse_decimal(obj.value)
        return (cell_value is not None and obj_value is not None
                and cell_value == obj_value)
    if obj.kind == "date":
        cell_year = _year_of(cell_text)
        obj_year = _year_of(obj.value)
        return cell_year is not None and cell_year == obj_year
    raise ValueError("unknown object kind: %r" % obj.kind)


@dataclass(frozen=True)
class CandidatePropertySet:
    """Merged frequent properties; slot order is fixed (IRI-sorted)."""
    sigma: float
    properties: tuple          # IRI-sorted, no duplicates
    per_class: dict            # class_id -> sorted list of its frequent props

    def __post_init__(self):
        props = tuple(self.properties)
        if list(props) != sorted(set(props)):
            raise ValueError("properties must be IRI-sorted and unique")

    @property
    def d1(self):
        return len(self.properties)

    def index(self, prop_iri):
        return self.properties.index(prop_iri)


def mine_candidate_properties(catalog, sigma: float, kb,
                              log=None) -> CandidatePropertySet:
    """Frequent properties per class, merged and IRI-sorted.

    A property is frequent for a class when at least a fraction sigma of
    the class's entities are its subjects.  Costs exactly K class queries
    plus one subject query per entity in the union of the class extents.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must be in [0,1]")
    class_entities = {}
    for idx in range(catalog.k):
        class_id = catalog.class_id(idx)
        class_entities[class_id] = kb.entities_of_class(catalog.class_iri(idx))
        if not class_entities[class_id] and log is not None:
            log("class %s has no entities; no frequent properties" % class_id)

    union = sorted({e for ents in class_entities.values() for e in ents})
    entity_properties = {}
    for e in union:
        entity_properties[e] = {t.predicate for t in kb.triples_of_subject(e)}

    per_class = {}
    for class_id, ents in class_entities.items():
        if not ents:
            per_class[class_id] = []
            continue
        counts = {}
        for e in ents:
            for p in entity_properties[e]:
                counts[p] = counts.get(p, 0) + 1
        per_class[class_id] = sorted(
            p for p, c in counts.items() if c / len(ents) >= sigma)

    merged = sorted({p for props in per_class.values() for p in props})
    return CandidatePropertySet(sigma, tuple(merged), per_class)


def p2vec_extract(mt: MicroTable, props: CandidatePropertySet, n: int,
                  alpha: float, kb, lookup_alpha=None, match_alpha=None,
                  stats=None) -> np.ndarray:
    """Property vector of a micro table (zero vector or unit L2 norm).

    Only the first row participates: the main cell anchors the entity
    lookup and each surrounding column contributes its first cell.  alpha
    is shared between lookup and text matching unless overridden.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lookup_alpha = alpha if lookup_alpha is None else lookup_alpha
    match_alpha = alpha if match_alpha is None else match_alpha
    v = np.zeros(props.d1)
    slot = {p: i for i, p in enumerate(props.properties)}
    candidates = kb.entity_lookup(mt.main_cell.raw_text, lookup_alpha, n)[:n]
    first_row = [col.cells[0].raw_text for col in mt.surrounding]
    for e in candidates:
        for t in kb.triples_of_subject(e):
            j = slot.get(t.predicate)
            if j is None or v[j] == 1.0:
                continue
            for cell_text in first_row:
                if stats is not None:
                    stats["match_calls"] = stats.get("match_calls", 0) + 1
                if cell_object_match(cell_text, t.object, match_alpha, kb):
                    v[j] = 1.0
    norm = np.linalg.norm(v)
    if norm > 0.0:
        v = v / norm
    return v


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_properties(props: CandidatePropertySet, path):
    doc = {"sigma": props.sigma,
           "classes": {cid: list(p) for cid, p in sorted(props.per_class.items())},
           "properties": list(props.properties)}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=0, sort_keys=True)


def load_properties(path) -> CandidatePropertySet:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return CandidatePropertySet(doc["sigma"], tuple(doc["properties"]),
                                {cid: list(p) for cid, p in doc["classes"].items()})


def write_p2vec_batch(records, path):
    """records: iterable of (sample_id, vector); written as JSON lines."""
    with open(path, "w", encoding="utf-8") as f:
        for sample_id, v in records:
            f.write(json.dumps({"sample_id": sample_id,
                                "v": [float(x) for x in v]}) + "\n")


def read_p2vec_batch(path):
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                obj = json.loads(line)
                out.append((obj["sample_id"], np.asarray(obj["v"])))
    return out
