"""
Sparse document-term counts, file ingestion, collapsing by response group
and mean-shifted document frequencies.

Corpus files are UTF-8 triplet TSV::

    #docs	3	#vocab	2
    # any other line starting with '#' is a comment
    0	0	1
    0	1	2
    1	0	3

and responses live in a sidecar with one ``doc<TAB>y`` row per document.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CorpusFormatError, DegenerateDataError, InputError

__all__ = [
    "SparseCorpus",
    "CollapsedCounts",
    "FreqMatrix",
    "load_corpus",
    "load_responses",
    "write_corpus",
    "collapse",
    "mean_shift_frequencies",
    "concat",
]

HEADER_DOCS = "#docs"
HEADER_VOCAB = "#vocab"


@dataclass(frozen=True, eq=False)
class SparseCorpus:
    """Documents x vocabulary count matrix with per-document responses.

    Parameters
    ----------
    counts : scipy.sparse.csr_matrix, shape (n_docs, vocab_size)
        Nonnegative integer counts. Explicit zeros are not allowed.
    responses : np.ndarray, shape (n_docs,), optional
        Response per document. Binary 0/1 for the collapsed path; any real
        values are accepted and checked for binarity where it matters.
    vocab_labels : list of str, optional
    """

    counts: sp.csr_matrix
    responses: np.ndarray | None = None
    vocab_labels: list[str] | None = None
    doc_totals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        counts = sp.csr_matrix(self.counts)
        if counts.dtype.kind not in "iu":
            data = counts.data
            if not np.all(np.isfinite(data)) or np.any(data != np.round(data)):
                raise InputError("counts must be integers")
            counts = counts.astype(np.int64)
        else:
            counts = counts.astype(np.int64)
        counts.sum_duplicates()
        counts.sort_indices()
        if counts.nnz and counts.data.min() < 0:
            raise InputError("counts must be nonnegative")
        if counts.nnz and counts.data.min() == 0:
            raise InputError("zero counts must not be stored explicitly")
        object.__setattr__(self, "counts", counts)

        totals = np.asarray(counts.sum(axis=1)).ravel().astype(np.int64)
        object.__setattr__(self, "doc_totals", totals)

        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float)
            if y.shape != (counts.shape[0],):
                raise InputError(
                    f"responses have shape {y.shape}, expected ({counts.shape[0]},)"
                )
            if not np.all(np.isfinite(y)):
                raise InputError("responses must be finite")
            object.__setattr__(self, "responses", y)
        if self.vocab_labels is not None and len(self.vocab_labels) != counts.shape[1]:
            raise InputError("vocab_labels length does not match vocabulary size")

    @classmethod
    def from_entries(cls, n_docs, vocab_size, entries, responses=None, vocab_labels=None):
        """Build from ``(doc, word, count)`` triplets, rejecting duplicates."""
        entries = list(entries)
        if entries:
            arr = np.asarray(entries, dtype=np.int64).reshape(-1, 3)
        else:
            arr = np.zeros((0, 3), dtype=np.int64)
        rows, cols, vals = arr[:, 0], arr[:, 1], arr[:, 2]
        if np.any(rows < 0) or np.any(rows >= n_docs):
            raise InputError("document index out of bounds")
        if np.any(cols < 0) or np.any(cols >= vocab_size):
            raise InputError("word index out of bounds")
        if np.any(vals <= 0):
            raise InputError("counts must be positive when stored")
        keys = rows * vocab_size + cols
        if np.unique(keys).size != keys.size:
            raise InputError("duplicate (doc, word) entry")
        counts = sp.csr_matrix((vals, (rows, cols)), shape=(n_docs, vocab_size))
        return cls(counts, responses, vocab_labels)

    @classmethod
    def from_dense(cls, x, responses=None, vocab_labels=None):
        x = np.asarray(x)
        if x.ndim != 2:
            raise InputError("dense counts must be a 2-d array")
        return cls(sp.csr_matrix(x), responses, vocab_labels)

    @property
    def n_docs(self) -> int:
        return self.counts.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.counts.shape[1]

    @property
    def total_words(self) -> int:
        """M, the total number of words in the corpus."""
        return int(self.doc_totals.sum())

    def entries(self):
        """Iterate stored ``(doc, word, count)`` triplets in row-major order."""
        coo = self.counts.tocoo()
        for i, j, c in zip(coo.row, coo.col, coo.data):
            yield int(i), int(j), int(c)

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=0)).ravel().astype(np.int64)

    def with_responses(self, responses) -> "SparseCorpus":
        return SparseCorpus(self.counts, responses, self.vocab_labels)

    def require_positive_totals(self):
        bad = np.flatnonzero(self.doc_totals == 0)
        if bad.size:
            raise DegenerateDataError(
                f"document {int(bad[0])} has zero total words; frequencies undefined"
            )


@dataclass(frozen=True)
class CollapsedCounts:
    """Word counts summed within each response group."""

    c0: np.ndarray
    c1: np.ndarray
    n_docs: int
    n_pos: int

    @property
    def C0(self) -> int:
        return int(self.c0.sum())

    @property
    def C1(self) -> int:
        return int(self.c1.sum())

    @property
    def total_words(self) -> int:
        return self.C0 + self.C1

    @property
    def pi_hat(self) -> float:
        return self.n_pos / self.n_docs

    @property
    def vocab_size(self) -> int:
        return self.c0.size


@dataclass(frozen=True)
class FreqMatrix:
    """Mean-shifted frequencies ``f_i = x_i / m_i - fbar``.

    Stored as the sparse raw-frequency matrix plus the dense offset
    ``fbar`` so that products cost O(nnz + p).
    """

    freqs: sp.csr_matrix
    offset: np.ndarray

    @property
    def shape(self):
        return self.freqs.shape

    def dot(self, v) -> np.ndarray:
        """Return ``F @ v`` for a vector or a (p, d) matrix."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.freqs.shape[1]:
            raise InputError(
                f"loading length {v.shape[0]} does not match vocabulary size "
                f"{self.freqs.shape[1]}"
            )
        out = self.freqs @ v
        return np.asarray(out) - self.offset @ v

    def toarray(self) -> np.ndarray:
        return self.freqs.toarray() - self.offset[None, :]


def _raw_frequencies(corpus: SparseCorpus) -> sp.csr_matrix:
    corpus.require_positive_totals()
    inv = sp.diags(1.0 / corpus.doc_totals.astype(float))
    return sp.csr_matrix(inv @ corpus.counts.astype(float))


def mean_shift_frequencies(corpus: SparseCorpus, offset=None) -> FreqMatrix:
    """Centered document frequencies.

    With ``offset=None`` the corpus is centered on its own mean frequency
    vector. Passing the training ``offset`` centers new documents exactly
    the way the training documents were centered.
    """
    freqs = _raw_frequencies(corpus)
    if offset is None:
        if corpus.n_docs == 0:
            offset = np.zeros(corpus.vocab_size)
        else:
            offset = np.asarray(freqs.mean(axis=0)).ravel()
    else:
        offset = np.asarray(offset, dtype=float)
        if offset.shape != (corpus.vocab_size,):
            raise InputError("offset length does not match vocabulary size")
    return FreqMatrix(freqs, offset)


def _binary_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0) | (y == 1)):
        raise InputError("collapsed model requires binary 0/1 responses")
    return y.astype(bool)


def collapse(corpus: SparseCorpus, labels=None) -> CollapsedCounts:
    """Sum counts within the y=0 and y=1 groups.

    ``labels`` overrides ``corpus.responses`` as the grouping variable.
    """
    y = corpus.responses if labels is None else labels
    if y is None:
        raise InputError("corpus has no responses to collapse on")
    g = _binary_labels(y)
    if g.shape != (corpus.n_docs,):
        raise InputError("labels length does not match number of documents")
    n_pos = int(g.sum())
    if n_pos == 0 or n_pos == corpus.n_docs:
        raise DegenerateDataError(
            "degenerate grouping: need at least one document with y=0 and one with y=1"
        )
    counts = corpus.counts
    c1 = np.asarray(counts[g].sum(axis=0)).ravel().astype(np.int64)
    c0 = np.asarray(counts[~g].sum(axis=0)).ravel().astype(np.int64)
    return CollapsedCounts(c0=c0, c1=c1, n_docs=corpus.n_docs, n_pos=n_pos)


def concat(a: SparseCorpus, b: SparseCorpus) -> SparseCorpus:
    """Stack two corpora over a shared vocabulary."""
    if a.vocab_size != b.vocab_size:
        raise InputError("cannot concatenate corpora with different vocabularies")
    if (a.responses is None) != (b.responses is None):
        raise InputError("either both corpora carry responses or neither does")
    y = None if a.responses is None else np.concatenate([a.responses, b.responses])
    return SparseCorpus(sp.vstack([a.counts, b.counts], format="csr"), y, a.vocab_labels)


# -- file io -----------------------------------------------------------------


def _parse_int(token, path, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise CorpusFormatError(f"{what} {token!r} is not an integer", path, lineno) from None


def _read_header(tokens, path, lineno):
    if len(tokens) != 4 or tokens[0] != HEADER_DOCS or tokens[2] != HEADER_VOCAB:
        raise CorpusFormatError(
            f"header must read '{HEADER_DOCS}<TAB>n<TAB>{HEADER_VOCAB}<TAB>p'", path, lineno
        )
    n = _parse_int(tokens[1], path, lineno, "n_docs")
    p = _parse_int(tokens[3], path, lineno, "vocab_size")
    if n < 0 or p < 1:
        raise CorpusFormatError("header sizes must satisfy n >= 0 and p >= 1", path, lineno)
    return n, p


def load_responses(path, n_docs, binary=True) -> np.ndarray:
    """Read a ``doc<TAB>y`` sidecar. Every document needs exactly one row."""
    path = Path(path)
    if not path.is_file():
        raise CorpusFormatError("responses file not found", path)
    y = np.full(n_docs, np.nan)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tokens = s.split()
            if len(tokens) != 2:
                raise CorpusFormatError("expected 'doc<TAB>y'", path, lineno)
            i = _parse_int(tokens[0], path, lineno, "doc index")
            try:
                v = float(tokens[1])
            except ValueError:
                raise CorpusFormatError(f"response {tokens[1]!r} is not a number", path, lineno) from None
            if not 0 <= i < n_docs:
                raise CorpusFormatError(
                    f"doc index {i} out of bounds for {n_docs} documents", path, lineno
                )
            if not math.isnan(y[i]):
                raise CorpusFormatError(f"duplicate response for doc {i}", path, lineno)
            if not math.isfinite(v):
                raise CorpusFormatError("response must be finite", path, lineno)
            if binary and v not in (0.0, 1.0):
                raise CorpusFormatError(f"response {tokens[1]!r} is not 0 or 1", path, lineno)
            y[i] = v
    missing = np.flatnonzero(np.isnan(y))
    if missing.size:
        raise CorpusFormatError(f"no response for doc {int(missing[0])}", path)
    return y


def load_corpus(path, responses_path=None, format="triplet-tsv", binary=True,
                vocab_path=None) -> SparseCorpus:
    """Load and validate a triplet-TSV corpus.

    Parameters
    ----------
    path : path-like
        Corpus file with a ``#docs n #vocab p`` header and ``doc word count`` rows.
    responses_path : path-like, optional
        Sidecar with ``doc y`` rows.
    binary : bool
        Require responses in {0, 1}. Pass False for real-valued covariates.
    vocab_path : path-like, optional
        Sidecar with ``word label`` rows.

    Raises
    ------
    CorpusFormatError
        Malformed rows, out-of-bounds indices, explicit zero counts,
        duplicate entries, documents with no words.
    """
    if format != "triplet-tsv":
        raise InputError(f"unsupported corpus format {format!r}")
    path = Path(path)
    if not path.is_file():
        raise CorpusFormatError("corpus file not found", path)

    n = p = None
    rows, cols, vals = [], [], []
    seen = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            tokens = s.split()
            if tokens[0] == HEADER_DOCS:
                if n is not None:
                    raise CorpusFormatError("duplicate header", path, lineno)
                n, p = _read_header(tokens, path, lineno)
                continue
            if s.startswith("#"):
                continue
            if n is None:
                raise CorpusFormatError("data row before header", path, lineno)
            if len(tokens) != 3:
                raise CorpusFormatError("expected 'doc<TAB>word<TAB>count'", path, lineno)
            i = _parse_int(tokens[0], path, lineno, "doc index")
            j = _parse_int(tokens[1], path, lineno, "word index")
            c = _parse_int(tokens[2], path, lineno, "count")
            if not 0 <= i < n:
                raise CorpusFormatError(f"doc index {i} out of bounds for {n} documents", path, lineno)
            if not 0 <= j < p:
                raise CorpusFormatError(f"word index {j} out of bounds for vocabulary {p}", path, lineno)
            if c == 0:
                raise CorpusFormatError("zero count stored explicitly", path, lineno)
            if c < 0:
                raise CorpusFormatError("negative count", path, lineno)
            if (i, j) in seen:
                raise CorpusFormatError(
                    f"duplicate entry ({i}, {j}); first seen on line {seen[(i, j)]}", path, lineno
                )
            seen[(i, j)] = lineno
            rows.append(i)
            cols.append(j)
            vals.append(c)
    if n is None:
        raise CorpusFormatError("missing header line", path)

    counts = sp.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (np.asarray(rows, dtype=np.int64),
                                            np.asarray(cols, dtype=np.int64))),
        shape=(n, p),
    )
    totals = np.asarray(counts.sum(axis=1)).ravel()
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        raise CorpusFormatError(f"document {int(empty[0])} has zero total words", path)

    y = None
    if responses_path is not None:
        y = load_responses(responses_path, n, binary=binary)
    labels = None
    if vocab_path is not None:
        labels = _load_vocab(vocab_path, p)
    return SparseCorpus(counts, y, labels)


def _load_vocab(path, p):
    path = Path(path)
    if not path.is_file():
        raise CorpusFormatError("vocabulary file not found", path)
    labels = [None] * p
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.rstrip("\n")
            if not s.strip() or s.startswith("#"):
                continue
            tokens = s.split("\t")
            if len(tokens) != 2:
                raise CorpusFormatError("expected 'word<TAB>label'", path, lineno)
            j = _parse_int(tokens[0], path, lineno, "word index")
            if not 0 <= j < p:
                raise CorpusFormatError(f"word index {j} out of bounds", path, lineno)
            labels[j] = tokens[1]
    missing = [j for j, s in enumerate(labels) if s is None]
    if missing:
        raise CorpusFormatError(f"no label for word {missing[0]}", path)
    return labels


def _format_response(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_corpus(corpus: SparseCorpus, path, responses_path=None):
    """Write a corpus (and optionally its responses) in the triplet-TSV format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{HEADER_DOCS}\t{corpus.n_docs}\t{HEADER_VOCAB}\t{corpus.vocab_size}\n")
        for i, j, c in corpus.entries():
            fh.write(f"{i}\t{j}\t{c}\n")
    if responses_path is not None:
        if corpus.responses is None:
            raise InputError("corpus has no responses to write")
        with open(responses_path, "w", encoding="utf-8") as fh:
            for i, v in enumerate(corpus.responses):
                fh.write(f"{i}\t{_format_response(v)}\n")
