"""Knowledge-base access: offline triple snapshot, lookup index, remote client.

The snapshot and the remote endpoint expose the same three query shapes:
entities of a class (with subclass closure), triples of a subject, and
fuzzy entity lookup by label.
"""

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass, field

from .kernels import jaro as _jaro

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
RDFS_SUBCLASSOF = "http://www.w3.org/2000/01/rdf-schema#subClassOf"

_XSD = "http://www.w3.org/2001/XMLSchema#"
_NUMERIC_DATATYPES = {_XSD + t for t in
                      ("integer", "decimal", "double", "float", "int",
                       "long", "short", "nonNegativeInteger")}
_DATE_DATATYPES = {_XSD + t for t in ("date", "dateTime", "gYear", "gYearMonth")}

SNAPSHOT_VERSION = 1


class NTriplesParseError(ValueError):
    """Raised with the offending line number on malformed N-Triples input."""


class OfflineCacheMissError(RuntimeError):
    """Offline mode was requested but the query is not in the cache."""


class RemoteQueryError(RuntimeError):
    """Network failure or malformed endpoint response; retryable."""


@dataclass(frozen=True)
class TripleObject:
    kind: str          # entity | text | number | date
    value: str         # IRI, text, or the literal's lexical form
    lang: str = ""

    def as_tuple(self):
        return (self.kind, self.value, self.lang)


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: TripleObject

    def __post_init__(self):
        if not self.subject or not self.predicate:
            raise ValueError("subject and predicate must be nonempty IRIs")


@dataclass
class EntityRecord:
    iri: str
    labels: list = field(default_factory=list)
    classes: set = field(default_factory=set)


_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


def normalize_phrase(phrase: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return " ".join(_PUNCT_RE.sub(" ", phrase.lower()).split())


# ---------------------------------------------------------------------------
# N-Triples parsing (subset: IRIs, plain and typed literals)
# ---------------------------------------------------------------------------

_NT_LINE_RE = re.compile(
    r'^<([^>]*)>\s+<([^>]*)>\s+'
    r'(?:<([^>]*)>|"((?:[^"\\]|\\.)*)"(?:@([A-Za-z0-9-]+)|\^\^<([^>]*)>)?)'
    r'\s*\.\s*$')

_ESCAPES = {'\\"': '"', "\\\\": "\\", "\\n": "\n", "\\t": "\t", "\\r": "\r"}


def _unescape(text):
    return re.sub(r'\\["\\ntr]', lambda m: _ESCAPES[m.group(0)], text)


def _classify_literal(lexical, lang, datatype):
    if datatype in _NUMERIC_DATATYPES:
        return TripleObject("number", lexical)
    if datatype in _DATE_DATATYPES:
        return TripleObject("date", lexical)
    return TripleObject("text", lexical, lang or "")


def parse_ntriples(lines):
    """Parse N-Triples lines into Triple objects; comments/blank lines skipped."""
    triples = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _NT_LINE_RE.match(stripped)
        if not m:
            raise NTriplesParseError("malformed N-Triples at line %d: %r"
                                     % (lineno, stripped))
        subject, predicate, obj_iri, lexical, lang, datatype = m.groups()
        if obj_iri is not None:
            obj = TripleObject("entity", obj_iri)
        else:
            obj = _classify_literal(_unescape(lexical), lang, datatype)
        triples.append(Triple(subject, predicate, obj))
    return triples


# ---------------------------------------------------------------------------
# Snapshot backend
# ---------------------------------------------------------------------------

class KBSnapshot:
    """Immutable in-memory triple store with materialized subclass closure."""

    def __init__(self, entities, triples_by_subject, class_members):
        self.entities = entities                  # iri -> EntityRecord
        self.triples_by_subject = triples_by_subject
        self.class_members = class_members        # class iri -> sorted entity iris
        self._label_index = []                    # (normalized label, iri)
        for iri in sorted(entities):
            for label in entities[iri].labels:
                self._label_index.append((normalize_phrase(label), iri))
        self.counters = {"q1": 0, "q2": 0, "lookup": 0}

    def entities_of_class(self, class_iri):
        """Q1: entity IRIs of a class, subclass closure included, IRI-sorted."""
        self.counters["q1"] += 1
        return list(self.class_members.get(class_iri, []))

    def triples_of_subject(self, entity_iri):
        """Q2: all stored triples with the given subject, stored order."""
        self.counters["q2"] += 1
        return list(self.triples_by_subject.get(entity_iri, []))

    def entity_lookup(self, phrase, alpha, n):
        """Entities whose label is Jaro-similar to the phrase.

        Candidates need similarity >= alpha; ranked by similarity descending
        with IRI-ascending tie break; at most n results.
        """
        self.counters["lookup"] += 1
        if n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must be in [0,1]")
        query = normalize_phrase(phrase)
        best = {}
        for label, iri in self._label_index:
            sim = _jaro(query, label)
            if sim >= alpha and sim > best.get(iri, -1.0):
                best[iri] = sim
        ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
        return [iri for iri, _ in ranked[:n]]

    def label_of(self, entity_iri):
        rec = self.entities.get(entity_iri)
        return rec.labels[0] if rec and rec.labels else None

    def labels_of(self, entity_iri):
        rec = self.entities.get(entity_iri)
        return list(rec.labels) if rec else []

    def classes_of(self, entity_iri):
        rec = self.entities.get(entity_iri)
        return set(rec.classes) if rec else set()

    def all_property_iris(self):
        props = set()
        for triples in self.triples_by_subject.values():
            props.update(t.predicate for t in triples)
        return sorted(props)

    def reset_counters(self):
        for key in self.counters:
            self.counters[key] = 0


def _transitive_closure(edges):
    """edges: dict node -> set of direct successors; returns full closure."""
    closure = {}

    def visit(node, seen):
        if node in closure:
            return closure[node]
        result = set()
        for succ in edges.get(node, ()):
            if succ in seen:
                continue  # defensive: cycles in subclass declarations
            result.add(succ)
            result |= visit(succ, seen | {succ})
        closure[node] = result
        return result

    for node in list(edges):
        visit(node, {node})
    return closure


def build_snapshot(source, label_property=RDFS_LABEL, type_property=RDF_TYPE):
    """Build a KBSnapshot from an N-Triples file path, lines, or Triple list."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as f:
            triples = parse_ntriples(f)
    elif source and isinstance(source[0], Triple):
        triples = list(source)
    else:
        triples = parse_ntriples(source)

    subclass_edges = {}
    for t in triples:
        if t.predicate == RDFS_SUBCLASSOF and t.object.kind == "entity":
            subclass_edges.setdefault(t.subject, set()).add(t.object.value)
    superclasses = _transitive_closure(subclass_edges)

    entities = {}
    triples_by_subject = {}

    def record(iri):
        if iri not in entities:
            entities[iri] = EntityRecord(iri)
        return entities[iri]

    for t in triples:
        record(t.subject)
        triples_by_subject.setdefault(t.subject, []).append(t)
        if t.predicate == label_property and t.object.kind == "text":
            if t.object.lang in ("", "en"):
                record(t.subject).labels.append(t.object.value)
        elif t.predicate == type_property and t.object.kind == "entity":
            direct = t.object.value
            rec = record(t.subject)
            rec.classes.add(direct)
            rec.classes |= superclasses.get(direct, set())

    class_members = {}
    for iri, rec in entities.items():
        for c in rec.classes:
            class_members.setdefault(c, []).append(iri)
    for c in class_members:
        class_members[c] = sorted(class_members[c])
    return KBSnapshot(entities, triples_by_subject, class_members)


def save_snapshot(snapshot: KBSnapshot, path):
    """Serialize a snapshot to a versioned JSON file."""
    doc = {
        "version": SNAPSHOT_VERSION,
        "entities": {
            iri: {"labels": rec.labels, "classes": sorted(rec.classes)}
            for iri, rec in snapshot.entities.items()
        },
        "triples": [
            [t.subject, t.predicate, t.object.kind, t.object.value, t.object.lang]
            for triples in snapshot.triples_by_subject.values()
            for t in triples
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_snapshot(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != SNAPSHOT_VERSION:
        raise ValueError("unsupported snapshot version: %r" % doc.get("version"))
    entities = {}
    class_members = {}
    for iri, rec in doc["entities"].items():
        entities[iri] = EntityRecord(iri, list(rec["labels"]), set(rec["classes"]))
        for c in rec["classes"]:
            class_members.setdefault(c, []).append(iri)
    for c in class_members:
        class_members[c] = sorted(class_members[c])
    triples_by_subject = {}
    for s, p, kind, value, lang in doc["triples"]:
        triples_by_subject.setdefault(s, []).append(
            Triple(s, p, TripleObject(kind, value, lang)))
    return KBSnapshot(entities, triples_by_subject, class_members)


# ---------------------------------------------------------------------------
# Persistent query cache
# ---------------------------------------------------------------------------

class QueryCache:
    """On-disk cache: one JSON file per key hash; atomic writes."""

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, kind, args):
        key = hashlib.sha256(
            json.dumps([kind, args], sort_keys=True).encode("utf-8")).hexdigest()
        return os.path.join(self.directory, key + ".json")

    def get(self, kind, args):
        path = self._path(kind, args)
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as f:
            return json.load(f)["result"]

    def put(self, kind, args, result):
        path = self._path(kind, args)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump({"kind": kind, "args": args, "result": result}, f)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# ---------------------------------------------------------------------------
# Remote endpoint backend
# ---------------------------------------------------------------------------

def _default_transport(endpoint, query, timeout):
    import requests

    try:
        resp = requests.get(endpoint, params={"query": query, "format": "json"},
                            headers={"Accept": "application/sparql-results+json"},
                            timeout=timeout)
        resp.raise_for_status()
        return resp.json()
    except Exception as exc:
        raise RemoteQueryError("endpoint query failed: %s" % exc) from exc


class RemoteKB:
    """SPARQL endpoint backend with a persistent response cache.

    In offline mode queries are answered only from the cache; a cold cache
    raises OfflineCacheMissError.
    """

    def __init__(self, endpoint, cache: QueryCache = None, offline=False,
                 timeout=30.0, transport=None,
                 label_property=RDFS_LABEL, type_property=RDF_TYPE):
        self.endpoint = endpoint
        self.cache = cache
        self.offline = offline
        self.timeout = timeout
        self.transport = transport or _default_transport
        self.label_property = label_property
        self.type_property = type_property
        self.counters = {"q1": 0, "q2": 0, "lookup": 0}

    def _cached(self, kind, args, compute):
        if self.cache is not None:
            hit = self.cache.get(kind, args)
            if hit is not None:
                return hit
        if self.offline:
            raise OfflineCacheMissError("offline cache miss: %s %r" % (kind, args))
        result = compute()
        if self.cache is not None:
            self.cache.put(kind, args, result)
        return result

    def _sparql(self, query):
        doc = self.transport(self.endpoint, query, self.timeout)
        try:
            return doc["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise RemoteQueryError("malformed SPARQL JSON response") from exc

    def entities_of_class(self, class_iri):
        self.counters["q1"] += 1

        def compute():
            query = ("SELECT DISTINCT ?e WHERE { ?e <%s> <%s> }"
                     % (self.type_property, class_iri))
            return sorted(b["e"]["value"] for b in self._sparql(query))

        return list(self._cached("q1", [class_iri], compute))

    def triples_of_subject(self, entity_iri):
        self.counters["q2"] += 1

        def compute():
            query = "SELECT ?p ?o WHERE { <%s> ?p ?o }" % entity_iri
            rows = []
            for b in self._sparql(query):
                p = b["p"]["value"]
                o = b["o"]
                if o["type"] == "uri":
                    obj = ("entity", o["value"], "")
                else:
                    lit = _classify_literal(o["value"], o.get("xml:lang", ""),
                                            o.get("datatype", ""))
                    obj = lit.as_tuple()
                rows.append([p, list(obj)])
            return rows

        rows = self._cached("q2", [entity_iri], compute)
        return [Triple(entity_iri, p, TripleObject(kind, value, lang))
                for p, (kind, value, lang) in rows]

    def _all_labels(self):
        def compute():
            query = ("SELECT ?e ?label WHERE { ?e <%s> ?label . "
                     "FILTER (lang(?label) = 'en' || lang(?label) = '') }"
                     % self.label_property)
            return sorted([b["e"]["value"], b["label"]["value"]]
                          for b in self._sparql(query))

        return self._cached("labels", [], compute)

    def entity_lookup(self, phrase, alpha, n):
        self.counters["lookup"] += 1

        def compute():
            query = normalize_phrase(phrase)
            best = {}
            for iri, label in self._all_labels():
                sim = _jaro(query, normalize_phrase(label))
                if sim >= alpha and sim > best.get(iri, -1.0):
                    best[iri] = sim
            ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
            return [iri for iri, _ in ranked[:n]]

        return list(self._cached("lookup", [normalize_phrase(phrase), alpha, n],
                                 compute))

    def labels_of(self, entity_iri):
        labels = [t.object.value for t in self.triples_of_subject(entity_iri)
                  if t.predicate == self.label_property
                  and t.object.kind == "text" and t.object.lang in ("", "en")]
        return labels

    def label_of(self, entity_iri):
        labels = self.labels_of(entity_iri)
        return labels[0] if labels else None

    def classes_of(self, entity_iri):
        return {t.object.value for t in self.triples_of_subject(entity_iri)
                if t.predicate == self.type_property and t.object.kind == "entity"}

    def reset_counters(self):
        for key in self.counters:
            self.counters[key] = 0
