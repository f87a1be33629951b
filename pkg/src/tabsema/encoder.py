"""Cell encoding: tokenization, word-embedding lookup, number/date vectors."""

import re

import numpy as np

from .tables import parse_date, parse_number

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Padding token; maps to the zero vector like any unknown word.
PAD = ""


class EmbeddingTable:
    """Word -> vector table loaded from a text embedding file.

    Unknown words (and the padding token) map to the zero vector.
    """

    def __init__(self, vectors, dim):
        self.dim = dim
        self._vectors = {}
        self._zero = np.zeros(dim)
        for word, vec in vectors.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise ValueError("vector for %r has dimension %d, expected %d"
                                 % (word, vec.shape[0], dim))
            self._vectors[word] = vec

    def __contains__(self, word):
        return word in self._vectors

    def __len__(self):
        return len(self._vectors)

    def lookup(self, word):
        return self._vectors.get(word, self._zero)

    @classmethod
    def load(cls, path):
        """Load a text embedding file: one `word v1 ... v_dw` line per word.

        An optional first header line `count dim` is skipped.
        """
        vectors = {}
        dim = None
        with open(path, encoding="utf-8") as f:
            first = f.readline()
            parts = first.split()
            if len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
                pass  # header line: count dim
            elif parts:
                vectors[parts[0]] = [float(x) for x in parts[1:]]
                dim = len(parts) - 1
            for line in f:
                parts = line.split()
                if not parts:
                    continue
                word, vals = parts[0], [float(x) for x in parts[1:]]
                if dim is None:
                    dim = len(vals)
                elif len(vals) != dim:
                    raise ValueError("inconsistent embedding dimension for %r" % word)
                vectors[word] = vals
        if dim is None:
            raise ValueError("embedding file holds no vectors")
        return cls(vectors, dim)


def tokenize_and_crop(phrase: str, t_len: int):
    """Lowercase, split on whitespace/punctuation, crop/pad to exactly t_len."""
    if t_len < 1:
        raise ValueError("t_len must be >= 1")
    tokens = _TOKEN_RE.findall(phrase.lower())[:t_len]
    return tokens + [PAD] * (t_len - len(tokens))


def embed_entity_cell(phrase: str, emb: EmbeddingTable, t_len: int):
    """Embed a cell phrase as a t_len x d_w matrix of word vectors."""
    tokens = tokenize_and_crop(phrase, t_len)
    out = np.zeros((t_len, emb.dim))
    for t, tok in enumerate(tokens):
        if tok != PAD:
            out[t] = emb.lookup(tok)
    return out


def mean_word_vector(phrase: str, emb: EmbeddingTable, t_len: int):
    """Mean of the word vectors of the (cropped) non-padding tokens."""
    tokens = [t for t in tokenize_and_crop(phrase, t_len) if t != PAD]
    if not tokens:
        return np.zeros(emb.dim)
    return np.mean([emb.lookup(t) for t in tokens], axis=0)


def encode_number_cell(text: str, d0: int):
    """Deterministic vector for a number cell: slot 0 = tanh(value/1000).

    The tanh keeps the entry bounded in (-1, 1); unparseable text yields the
    zero vector.
    """
    if d0 < 1:
        raise ValueError("d0 must be >= 1")
    out = np.zeros(d0)
    value = parse_number(text)
    if value is not None:
        out[0] = np.tanh(value / 1000.0)
    return out


def encode_date_cell(text: str, d0: int):
    """Deterministic vector for a date cell: (year/3000, month/12, day/31, 0...)."""
    if d0 < 3:
        raise ValueError("d0 must be >= 3 for date cells")
    out = np.zeros(d0)
    parsed = parse_date(text)
    if parsed is not None:
        year, month, day = parsed
        out[0] = year / 3000.0
        out[1] = month / 12.0
        out[2] = day / 31.0
    return out
