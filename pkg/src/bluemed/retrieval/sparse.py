"""BM25-Okapi keyword index.

Score of document d for query q:

    sum over query term occurrences t of
        idf(t) * tf(t, d) * (k1 + 1) / (tf(t, d) + k1 * (1 - b + b * |d| / avgdl))

with idf(t) = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5)), the non-negative
Okapi variant. Repeated query terms contribute once per occurrence.

Tokenization is lowercase alphanumeric runs. Postings are flattened into
CSR-style arrays so the scoring loop can run through the numba kernel.
"""

from __future__ import annotations

import math
import re
from collections import Counter

import numpy as np

from bluemed.errors import IndexError_
from bluemed.kb.corpus import Collection
from bluemed.retrieval.fusion import Method, RankedList
from bluemed.retrieval.kernels import bm25_scores

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class SparseIndex:
    """Tokenized BM25 index over one collection."""

    def __init__(self, chunk_ids: list[str], texts: list[str], k1: float = 1.5, b: float = 0.75) -> None:
        if not chunk_ids:
            raise IndexError_("sparse index built over an empty collection")
        self.chunk_ids = list(chunk_ids)
        self.k1 = float(k1)
        self.b = float(b)

        docs = [tokenize(t) for t in texts]
        n = len(docs)
        doc_lens = np.array([len(d) for d in docs], dtype=np.float64)
        avgdl = float(doc_lens.mean()) if doc_lens.sum() > 0 else 1.0
        self.len_norm = self.k1 * (1.0 - self.b + self.b * doc_lens / avgdl)

        # Vocabulary in first-seen order; postings flattened per term.
        self.vocab: dict[str, int] = {}
        postings: list[tuple[list[int], list[int]]] = []
        for doc_idx, doc in enumerate(docs):
            for term, tf in Counter(doc).items():
                tid = self.vocab.get(term)
                if tid is None:
                    tid = len(self.vocab)
                    self.vocab[term] = tid
                    postings.append(([], []))
                postings[tid][0].append(doc_idx)
                postings[tid][1].append(tf)

        indptr = [0]
        flat_docs: list[int] = []
        flat_tfs: list[int] = []
        idf = np.empty(len(self.vocab), dtype=np.float64)
        for tid, (p_docs, p_tfs) in enumerate(postings):
            flat_docs.extend(p_docs)
            flat_tfs.extend(p_tfs)
            indptr.append(len(flat_docs))
            df = len(p_docs)
            idf[tid] = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        self.indptr = np.array(indptr, dtype=np.int64)
        self.posting_docs = np.array(flat_docs, dtype=np.int64)
        self.posting_tfs = np.array(flat_tfs, dtype=np.float64)
        self.idf = idf
        self.n_docs = n

    @classmethod
    def build(cls, collection: Collection, k1: float = 1.5, b: float = 0.75) -> "SparseIndex":
        if len(collection) == 0:
            raise IndexError_(f"collection {collection.name} is empty")
        return cls([c.chunk_id for c in collection.chunks], [c.text for c in collection.chunks], k1=k1, b=b)

    def scores(self, query: str) -> np.ndarray:
        """BM25 score per document; zeros for an empty or out-of-vocabulary query."""
        term_ids = [self.vocab[t] for t in tokenize(query) if t in self.vocab]
        if not term_ids:
            return np.zeros(self.n_docs, dtype=np.float64)
        return bm25_scores(
            np.array(term_ids, dtype=np.int64),
            self.indptr,
            self.posting_docs,
            self.posting_tfs,
            self.idf,
            self.len_norm,
            self.k1,
            self.n_docs,
        )

    def search(self, query: str, top_k: int) -> RankedList:
        """Top-k positive-scoring chunks; an unmatched query yields an empty list."""
        scores = self.scores(query)
        matched = [i for i in range(self.n_docs) if scores[i] > 0.0]
        matched.sort(key=lambda i: (-scores[i], self.chunk_ids[i]))
        entries = [(self.chunk_ids[i], float(scores[i])) for i in matched[:top_k]]
        return RankedList(method=Method.SPARSE, entries=entries)
