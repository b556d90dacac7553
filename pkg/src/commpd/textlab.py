"""Chat clustering: token cleanup, embedding-sum document vectors, k-means,
elbow selection and relative-rank-differential reports."""

from __future__ import annotations

import csv
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

# sideways faces in both directions plus hearts; matched before words
_EMOTICON = (
    r"(?:[:;=][\-o^']?[)(\]\[dDpP/\\|*3oO@$])"
    r"|(?:(?<!\w)[xX8]-?[D)(](?!\w))"
    r"|(?:[)(\]\[/\\|][\-o^']?[:;=])"
    r"|(?:<3+)"
    r"|(?:\^_*\^)"
)
_TOKEN_RE = re.compile(rf"({_EMOTICON})|(\w+)", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lower-cased word tokens and verbatim emoticons; other punctuation is dropped."""
    out = []
    for emo, word in _TOKEN_RE.findall(text):
        out.append(emo if emo else word.lower())
    return out


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def load_map(path) -> dict[str, str]:
    """Two whitespace-separated columns per line: ``variant canonical``."""
    mapping = {}
    for lineno, line in _read_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'variant canonical', got {line!r}")
        mapping[parts[0].lower()] = parts[1].lower()
    return mapping


def load_stopwords(path) -> set[str]:
    words = set()
    for lineno, line in _read_lines(path):
        parts = line.split()
        if len(parts) != 1:
            raise ValueError(f"{path}:{lineno}: expected one stopword per line, got {line!r}")
        words.add(parts[0].lower())
    return words


def preprocess_text(text: str, spelling: dict | None = None, lemmas: dict | None = None,
                    stopwords=None) -> list[str]:
    spelling = spelling or {}
    lemmas = lemmas or {}
    stopwords = stopwords or ()
    tokens = [spelling.get(t, t) for t in tokenize(text)]
    tokens = [lemmas.get(t, t) for t in tokens]
    return [t for t in tokens if t not in stopwords]


def preprocess(corpus: dict[str, str], spelling_map=None, lemma_map=None,
               stopwords=None) -> dict[str, list[str]]:
    """Tokenize every document, then apply spelling fixes, lemmas and the
    stopword filter, in that order. Resource arguments may be paths or
    already-loaded mappings."""
    spelling = load_map(spelling_map) if isinstance(spelling_map, (str, Path)) else spelling_map
    lemmas = load_map(lemma_map) if isinstance(lemma_map, (str, Path)) else lemma_map
    stops = load_stopwords(stopwords) if isinstance(stopwords, (str, Path)) else stopwords
    return {doc_id: preprocess_text(text, spelling, lemmas, stops)
            for doc_id, text in corpus.items()}


def load_corpus(path) -> dict[str, str]:
    """A directory of ``*.txt`` files (id = file stem) or an ``id,text`` CSV."""
    path = Path(path)
    corpus: dict[str, str] = {}
    if path.is_dir():
        for f in sorted(path.glob("*.txt")):
            corpus[f.stem] = f.read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header[:2]] != ["id", "text"]:
                raise ValueError(f"{path}: expected header 'id,text'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                if row[0] in corpus:
                    raise ValueError(f"{path}:{lineno}: duplicate document id {row[0]!r}")
                corpus[row[0]] = row[1]
    if not corpus:
        raise ValueError(f"{path}: no documents found")
    return corpus


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab[token]]


def load_embeddings(path) -> EmbeddingTable:
    """Read word2vec text format: ``count dim`` header, then ``token v1 .. vdim``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'vocab_size dim'")
        try:
            declared, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{path}:1: header values must be integers") from None
        if dim < 1:
            raise ValueError(f"{path}:1: dimension must be positive")
        vocab: dict[str, int] = {}
        rows: list[list[float]] = []
        for lineno, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values for "
                                 f"{token!r}, got {len(values)}")
            try:
                vec = [float(v) for v in values]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value for {token!r}") from None
            if token in vocab:
                warnings.warn(f"{path}:{lineno}: duplicate token {token!r}, keeping the last one")
                rows[vocab[token]] = vec
            else:
                vocab[token] = len(rows)
                rows.append(vec)
    if len(vocab) != declared:
        log.warning("%s: header declares %d tokens, read %d", path, declared, len(vocab))
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(vocab, vectors)


def dump_embeddings(table: EmbeddingTable, path, precision: int = 9) -> None:
    tokens = sorted(table.vocab, key=table.vocab.get)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(tokens)} {table.dim}\n")
        for t in tokens:
            vals = " ".join(f"{v:.{precision}g}" for v in table[t])
            fh.write(f"{t} {vals}\n")


@dataclass
class DocumentVector:
    doc_id: str
    vector: np.ndarray
    n_tokens: int = 0
    n_oov: int = 0

    @property
    def empty(self) -> bool:
        return self.n_tokens - self.n_oov == 0


def embed_document(tokens, table: EmbeddingTable, doc_id: str = "") -> DocumentVector:
    """Sum of the embeddings of the in-vocabulary tokens."""
    vec = np.zeros(table.dim)
    oov = 0
    for t in tokens:
        idx = table.vocab.get(t)
        if idx is None:
            oov += 1
        else:
            vec += table.vectors[idx]
    return DocumentVector(doc_id, vec, len(tokens), oov)


@dataclass
class ClusteringResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wcss_trace: list[float] = field(default_factory=list)
    n_iter: int = 0
    seed: int | None = None

    @property
    def wcss(self) -> float:
        return self.wcss_trace[-1]

    def assignments(self, ids) -> dict[str, int]:
        return dict(zip(ids, (int(c) for c in self.labels)))


def _as_matrix(vectors) -> np.ndarray:
    if len(vectors) and isinstance(vectors[0], DocumentVector):
        return np.vstack([v.vector for v in vectors])
    return np.asarray(vectors, dtype=np.float64)


def _sequential_sum(values: np.ndarray) -> float:
    # fixed left-to-right order so both kernel backends give identical totals
    return float(np.cumsum(values)[-1]) if values.size else 0.0


def _n_distinct(X: np.ndarray) -> int:
    return np.unique(X, axis=0).shape[0]


def _kmeans_pp(X: np.ndarray, k: int, rng) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, k):
        _, d2 = kernels.nearest_centroid(X, np.vstack(centers))
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
    return np.vstack(centers)


def kmeans(vectors, k: int, seed: int = 0, max_iter: int = 300,
           metric: str = "euclidean") -> ClusteringResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments no longer change or after ``max_iter`` updates.
    An empty cluster takes the point farthest from its current centroid.
    ``metric='cosine'`` clusters the L2-normalized vectors instead.
    """
    X = _as_matrix(vectors)
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if _n_distinct(X) < k:
        raise ValueError(f"need at least {k} distinct vectors, got {_n_distinct(X)}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    labels, d2 = kernels.nearest_centroid(X, centroids)
    trace = [_sequential_sum(d2)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids = _update_centroids(X, labels, d2, k)
        new_labels, d2 = kernels.nearest_centroid(X, centroids)
        trace.append(_sequential_sum(d2))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusteringResult(k, centroids, labels, trace, n_iter, seed)


def _update_centroids(X, labels, d2, k) -> np.ndarray:
    centroids = np.zeros((k, X.shape[1]))
    counts = np.bincount(labels, minlength=k)
    taken = set()
    for c in range(k):
        if counts[c]:
            centroids[c] = X[labels == c].mean(axis=0)
    for c in np.flatnonzero(counts == 0):
        # repair: steal the worst-fitting point not already used for a repair
        order = np.argsort(-d2, kind="mergesort")
        pick = next(i for i in order if i not in taken)
        taken.add(pick)
        centroids[c] = X[pick]
    return centroids


def wcss_curve(vectors, k_max: int, seed: int = 0, restarts: int = 10,
               metric: str = "euclidean") -> list[tuple[int, float]]:
    """Best WCSS over ``restarts`` seeded runs for each ``k = 1..k_max``.

    Restart ``r`` uses seed ``seed + r``; ties go to the lower restart.
    Once ``k`` reaches the number of distinct vectors every point can sit
    on its own centroid, so those entries are exactly 0.
    """
    X = _as_matrix(vectors)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    n_distinct = _n_distinct(X)
    curve = []
    for k in range(1, k_max + 1):
        if k >= n_distinct and k > 1:
            curve.append((k, 0.0))
            continue
        best = min(kmeans(X, k, seed + r, metric=metric).wcss for r in range(restarts))
        curve.append((k, best))
    return curve


def best_kmeans(vectors, k: int, seed: int = 0, restarts: int = 10,
                metric: str = "euclidean") -> ClusteringResult:
    best = None
    for r in range(restarts):
        res = kmeans(vectors, k, seed + r, metric=metric)
        if best is None or res.wcss < best.wcss:
            best = res
    return best


@dataclass(frozen=True)
class ElbowChoice:
    k: int
    flat: bool
    curvature: dict[int, float]


def select_k(curve, rel_tol: float = 1e-9) -> ElbowChoice:
    """Pick the ``k`` with the largest discrete curvature
    ``W(k-1) - 2 W(k) + W(k+1)``. A curve with no positive curvature is
    reported as flat with ``k = 1``."""
    ks = [int(k) for k, _ in curve]
    w = [float(v) for _, v in curve]
    if len(w) < 3:
        raise ValueError("elbow selection needs the curve up to k_max >= 3")
    curvature = {ks[i]: w[i - 1] - 2 * w[i] + w[i + 1] for i in range(1, len(w) - 1)}
    scale = max(abs(w[0]), 1.0)
    best_k = max(curvature, key=lambda k: (curvature[k], -k))
    if curvature[best_k] <= rel_tol * scale:
        return ElbowChoice(1, True, curvature)
    return ElbowChoice(best_k, False, curvature)


def frequency_ranks(counts: Counter, vocabulary) -> dict[str, float]:
    """Rank 1 = most frequent; equal counts share their average rank.
    Tokens of ``vocabulary`` missing from ``counts`` tie at the bottom."""
    freqs = sorted(((counts.get(t, 0), t) for t in vocabulary), key=lambda x: -x[0])
    ranks = {}
    i = 0
    while i < len(freqs):
        j = i
        while j + 1 < len(freqs) and freqs[j + 1][0] == freqs[i][0]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for _, t in freqs[i:j + 1]:
            ranks[t] = avg
        i = j + 1
    return ranks


@dataclass(frozen=True)
class RankRow:
    token: str
    corpus_count: int
    r1: float
    r2: float
    rrd1: float
    rrd2: float
    in_both: bool

    @property
    def distinguishing(self) -> bool:
        return self.rrd1 >= 1.0 or self.rrd2 >= 1.0


def rank_and_rrd(labels, tokens: dict[str, list[str]], clusters=(0, 1),
                 top_n: int = 30, k: int | None = None) -> list[RankRow]:
    """Relative rank differentials ``(r2-r1)/r1`` and ``(r1-r2)/r2`` for
    the ``top_n`` most frequent corpus tokens.

    ``labels`` maps document id to cluster (or is a :class:`ClusteringResult`
    paired with the id order of ``tokens``). Ranks are taken over the whole
    corpus vocabulary inside each of the two chosen clusters.
    """
    ids = list(tokens)
    if isinstance(labels, ClusteringResult):
        k = labels.k if k is None else k
        labels = labels.assignments(ids)
    if len(clusters) != 2 or clusters[0] == clusters[1]:
        raise ValueError("the report compares exactly two distinct clusters")
    if k is not None and k < 2:
        raise ValueError(f"rank report needs at least two clusters, got k={k}")
    c1, c2 = clusters
    counts = {c1: Counter(), c2: Counter()}
    corpus = Counter()
    for doc_id in ids:
        corpus.update(tokens[doc_id])
        c = labels[doc_id]
        if c in counts:
            counts[c].update(tokens[doc_id])
    for c in (c1, c2):
        if not counts[c]:
            raise ValueError(f"cluster {c} has no tokens")
    vocab = sorted(corpus)
    r1 = frequency_ranks(counts[c1], vocab)
    r2 = frequency_ranks(counts[c2], vocab)
    top = sorted(corpus.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    rows = []
    for token, n in top:
        a, b = r1[token], r2[token]
        rows.append(RankRow(token, n, a, b, (b - a) / a, (a - b) / b,
                            counts[c1][token] > 0 and counts[c2][token] > 0))
    return rows


def rand_index(labels_a, labels_b) -> float:
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    n = a.size
    if n < 2:
        return 1.0
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    iu = np.triu_indices(n, 1)
    return float((same_a == same_b)[iu].mean())



def canonical_labels(labels) -> np.ndarray:
    """Renumber clusters by first appearance so equal partitions print equally."""
    labels = np.asarray(labels)
    mapping = {}
    for c in labels:
        mapping.setdefault(int(c), len(mapping))
    return np.array([mapping[int(c)] for c in labels], dtype=np.int64)
