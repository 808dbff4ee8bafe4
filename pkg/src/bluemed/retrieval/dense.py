"""Exact full-scan cosine index over a collection's chunk embeddings."""

from __future__ import annotations

import numpy as np

from bluemed.errors import IndexError_
from bluemed.kb.corpus import Collection
from bluemed.retrieval.fusion import Method, RankedList
from bluemed.retrieval.kernels import cosine_scores


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return vec
    return vec / norm


class DenseIndex:
    """Chunk ids plus an L2-normalized embedding matrix, scanned exhaustively.

    Exact search is fine at this corpus scale; approximate structures are
    deliberately out of scope.
    """

    def __init__(self, chunk_ids: list[str], matrix: np.ndarray) -> None:
        if len(chunk_ids) == 0:
            raise IndexError_("dense index built over an empty collection")
        if matrix.ndim != 2 or matrix.shape[0] != len(chunk_ids):
            raise IndexError_(
                f"embedding matrix shape {matrix.shape} does not match {len(chunk_ids)} chunks"
            )
        self.chunk_ids = list(chunk_ids)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        self.matrix = np.ascontiguousarray(matrix / norms, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def build(cls, collection: Collection, embed) -> "DenseIndex":
        """Embed every chunk text with ``embed(text) -> vector``."""
        if len(collection) == 0:
            raise IndexError_(f"collection {collection.name} is empty")
        vectors = np.stack([np.asarray(embed(c.text), dtype=np.float64) for c in collection.chunks])
        return cls([c.chunk_id for c in collection.chunks], vectors)

    def search(self, query_embedding: np.ndarray, top_k: int) -> RankedList:
        """Top-k chunks by cosine similarity, ties broken by chunk_id."""
        q = np.asarray(query_embedding, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.dim:
            raise IndexError_(f"query dimension {q.shape} does not match index dim {self.dim}")
        scores = cosine_scores(self.matrix, l2_normalize(q))
        order = sorted(range(len(self.chunk_ids)), key=lambda i: (-scores[i], self.chunk_ids[i]))
        entries = [(self.chunk_ids[i], float(scores[i])) for i in order[:top_k]]
        return RankedList(method=Method.DENSE, entries=entries)
