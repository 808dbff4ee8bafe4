"""Hot scoring kernels: dense cosine scan and BM25 accumulation.

Both kernels have a numba ``@njit`` implementation and a pure-numpy fallback.
The numpy path is selected when ``BLUEMED_PURE_NUMPY`` is set to a truthy
value in the environment, or automatically when numba is not importable.
``benchmarks/bench_kernels.py`` compares the two.

fastmath stays off: both paths must produce bit-stable results so that
repeated runs of the pipeline are byte-identical.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("BLUEMED_PURE_NUMPY", "").lower() in {"1", "true", "yes", "on"}

try:
    if _FORCE_NUMPY:
        raise ImportError("pure-numpy path forced via BLUEMED_PURE_NUMPY")
    from numba import njit

    _HAS_NUMBA = True
except ImportError:
    _HAS_NUMBA = False


def active_backend() -> str:
    """``"numba"`` or ``"numpy"``, whichever the kernels below dispatch to."""
    return "numba" if _HAS_NUMBA else "numpy"


def _cosine_scores_np(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    return matrix @ query


def _bm25_scores_np(
    term_ids: np.ndarray,
    indptr: np.ndarray,
    posting_docs: np.ndarray,
    posting_tfs: np.ndarray,
    idf: np.ndarray,
    len_norm: np.ndarray,
    k1: float,
    n_docs: int,
) -> np.ndarray:
    scores = np.zeros(n_docs, dtype=np.float64)
    for t in term_ids:
        lo, hi = indptr[t], indptr[t + 1]
        docs = posting_docs[lo:hi]
        tfs = posting_tfs[lo:hi]
        np.add.at(scores, docs, idf[t] * tfs * (k1 + 1.0) / (tfs + len_norm[docs]))
    return scores


if _HAS_NUMBA:

    @njit(cache=True)
    def _cosine_scores_nb(matrix, query):  # pragma: no cover - jitted
        n, dim = matrix.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(dim):
                acc += matrix[i, j] * query[j]
            out[i] = acc
        return out

    @njit(cache=True)
    def _bm25_scores_nb(term_ids, indptr, posting_docs, posting_tfs, idf, len_norm, k1, n_docs):  # pragma: no cover - jitted
        scores = np.zeros(n_docs, dtype=np.float64)
        for qi in range(term_ids.shape[0]):
            t = term_ids[qi]
            for p in range(indptr[t], indptr[t + 1]):
                d = posting_docs[p]
                f = posting_tfs[p]
                scores[d] += idf[t] * f * (k1 + 1.0) / (f + len_norm[d])
        return scores


def cosine_scores(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Dot products of ``query`` against each row of ``matrix``.

    Rows and query are expected to be L2-normalized, making this cosine
    similarity. Shapes: matrix (n, dim), query (dim,); returns (n,).
    """
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if _HAS_NUMBA:
        return _cosine_scores_nb(matrix, query)
    return _cosine_scores_np(matrix, query)


def bm25_scores(
    term_ids: np.ndarray,
    indptr: np.ndarray,
    posting_docs: np.ndarray,
    posting_tfs: np.ndarray,
    idf: np.ndarray,
    len_norm: np.ndarray,
    k1: float,
    n_docs: int,
) -> np.ndarray:
    """Accumulate BM25 contributions for each query term occurrence.

    ``term_ids`` lists the in-vocabulary query terms, one entry per
    occurrence. Postings are stored CSR-style: ``indptr[t]:indptr[t+1]``
    slices ``posting_docs``/``posting_tfs`` for term ``t``. ``len_norm`` holds
    the precomputed per-document ``k1 * (1 - b + b * dl / avgdl)``.
    """
    term_ids = np.ascontiguousarray(term_ids, dtype=np.int64)
    if _HAS_NUMBA:
        return _bm25_scores_nb(
            term_ids, indptr, posting_docs, posting_tfs, idf, len_norm, float(k1), n_docs
        )
    return _bm25_scores_np(term_ids, indptr, posting_docs, posting_tfs, idf, len_norm, float(k1), n_docs)
