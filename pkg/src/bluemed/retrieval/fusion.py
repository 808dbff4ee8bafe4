"""Weighted Reciprocal Rank Fusion and fingerprint deduplication.

Each retrieval method contributes ``w_method / (k + rank)`` for every
document it returns, with 1-based ranks; a document's fused score is the sum
of its contributions. Scores are fused per sub-query and deduplicated by
content fingerprint afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from bluemed.errors import IndexError_


class Method(str, Enum):
    DENSE = "DENSE"
    SPARSE = "SPARSE"
    ONLINE = "ONLINE"


@dataclass(frozen=True)
class FusionConfig:
    """Fusion weights and smoothing constant.

    Dense carries the highest weight for paraphrase coverage, sparse keeps
    exact lexical matches, online is a low-weight freshness supplement.
    ``candidates_per_method`` sizes the per-method pool fed into fusion.
    """

    w_dense: float = 0.5
    w_sparse: float = 0.3
    w_online: float = 0.2
    k: float = 60.0
    top_k_per_expert: int = 5
    candidates_per_method: int = 20

    def __post_init__(self) -> None:
        for name in ("w_dense", "w_sparse", "w_online"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if self.top_k_per_expert < 1:
            raise ValueError("top_k_per_expert must be >= 1")
        if self.candidates_per_method < 1:
            raise ValueError("candidates_per_method must be >= 1")

    def weight(self, method: Method) -> float:
        return {
            Method.DENSE: self.w_dense,
            Method.SPARSE: self.w_sparse,
            Method.ONLINE: self.w_online,
        }[method]


@dataclass
class RankedList:
    """One method's ordered results: (chunk_id, raw_score), best first."""

    method: Method
    entries: list[tuple[str, float]] = field(default_factory=list)
    weight: float = 0.0

    def __post_init__(self) -> None:
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"{self.method.value} entries must be sorted by score descending")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")


@dataclass
class FusedResult:
    chunk_id: str
    rrf_score: float
    contributing_methods: dict[Method, int] = field(default_factory=dict)  # method -> 1-based rank


def fuse_rrf(lists: list[RankedList], config: FusionConfig) -> list[FusedResult]:
    """Fuse per-method ranked lists into one list ordered by RRF score.

    Ties are broken by ascending chunk_id so runs are reproducible.
    """
    seen_methods: set[Method] = set()
    for rl in lists:
        if rl.method in seen_methods:
            raise ValueError(f"method {rl.method.value} appears more than once")
        seen_methods.add(rl.method)

    scores: dict[str, float] = {}
    contribs: dict[str, dict[Method, int]] = {}
    for rl in lists:
        w = config.weight(rl.method)
        for rank, (chunk_id, _raw) in enumerate(rl.entries, start=1):
            scores[chunk_id] = scores.get(chunk_id, 0.0) + w / (config.k + rank)
            contribs.setdefault(chunk_id, {})[rl.method] = rank

    fused = [
        FusedResult(chunk_id=cid, rrf_score=score, contributing_methods=contribs[cid])
        for cid, score in scores.items()
    ]
    fused.sort(key=lambda r: (-r.rrf_score, r.chunk_id))
    return fused


def dedup(results: list[FusedResult], fingerprint_of: Callable[[str], str] | Mapping[str, str]) -> list[FusedResult]:
    """Keep only the best-scoring entry per content fingerprint.

    Relative order of the survivors is preserved. ``fingerprint_of`` maps a
    chunk_id to its fingerprint; unresolvable ids raise.
    """
    if not callable(fingerprint_of):
        mapping = fingerprint_of
        fingerprint_of = lambda cid: mapping[cid]  # noqa: E731

    fps: list[str] = []
    best: dict[str, float] = {}
    for res in results:
        try:
            fp = fingerprint_of(res.chunk_id)
        except KeyError as exc:
            raise IndexError_(f"no fingerprint for chunk_id {res.chunk_id}") from exc
        fps.append(fp)
        if fp not in best or res.rrf_score > best[fp]:
            best[fp] = res.rrf_score

    survivors: list[FusedResult] = []
    claimed: set[str] = set()
    for res, fp in zip(results, fps):
        if fp in claimed or res.rrf_score != best[fp]:
            continue
        claimed.add(fp)
        survivors.append(res)
    return survivors
