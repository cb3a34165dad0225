"""Cosine-similarity retrieval of same-graph diagrams, scored by MAP@k and MRR@k."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import DatasetManifest
from .embeddings import EmbeddingTable
from .errors import ZeroVector


def _unit_rows(vectors: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise ZeroVector(f"embedding for id {ids[zero[0]]!r} has zero norm")
    return vectors / norms[:, None]


def rank_by_cosine(query: np.ndarray, corpus_unit: np.ndarray, id_order: np.ndarray) -> np.ndarray:
    """Corpus row indices sorted by descending cosine similarity, ties by ascending id.

    ``id_order[i]`` is the rank of corpus row ``i``'s id in ascending id order.
    """
    norm = np.linalg.norm(query)
    if norm == 0:
        raise ZeroVector("query embedding has zero norm")
    scores = corpus_unit @ (query / norm)
    return np.lexsort((id_order, -scores))


def average_precision(ranked_relevance: Sequence[bool], n_relevant: int, cutoff: int = 100) -> Fraction:
    """Sum of precision@k over relevant hits in the top ``cutoff``, divided by min(R, cutoff)."""
    if n_relevant <= 0:
        raise ValueError("query has no relevant items")
    hits = 0
    total = Fraction(0)
    for k, rel in enumerate(ranked_relevance[:cutoff], 1):
        if rel:
            hits += 1
            total += Fraction(hits, k)
    return total / min(n_relevant, cutoff)


def reciprocal_rank(ranked_relevance: Sequence[bool], cutoff: int = 100) -> Fraction:
    for k, rel in enumerate(ranked_relevance[:cutoff], 1):
        if rel:
            return Fraction(1, k)
    return Fraction(0)


def expected_random_ap(n_relevant: int, corpus_size: int, cutoff: int = 100) -> float:
    """E[AP@cutoff] when the corpus is ranked by a uniformly random permutation.

    With R relevant among N, P(rel_k) = R/N and P(rel_j and rel_k) = R(R-1)/(N(N-1)),
    so E[rel_k * prec@k] = (R/N + (k-1) R(R-1)/(N(N-1))) / k.
    """
    R, N = n_relevant, corpus_size
    if R <= 0 or N <= 0 or R > N:
        raise ValueError("need 0 < n_relevant <= corpus_size")
    p1 = R / N
    p2 = R * (R - 1) / (N * (N - 1)) if N > 1 else 0.0
    ks = np.arange(1, min(cutoff, N) + 1, dtype=float)
    return float(np.sum((p1 + (ks - 1) * p2) / ks) / min(R, cutoff))


def expected_random_rr(n_relevant: int, corpus_size: int, cutoff: int = 100) -> float:
    """E[RR@cutoff] under a uniformly random ranking (first hit is hypergeometric)."""
    R, N = n_relevant, corpus_size
    total, p_none_before = 0.0, 1.0
    for k in range(1, min(cutoff, N) + 1):
        remaining = N - (k - 1)
        p_hit = R / remaining if remaining > 0 else 0.0
        total += p_none_before * p_hit / k
        p_none_before *= 1 - p_hit
    return total


@dataclass
class QueryResult:
    query_id: str
    average_precision: Fraction
    reciprocal_rank: Fraction
    n_relevant: int
    top_ids: list[str]


@dataclass
class RetrievalReport:
    per_query: list[QueryResult]
    cutoff: int
    corpus_size: int

    @property
    def map_at_k(self) -> float:
        return float(sum((q.average_precision for q in self.per_query), Fraction(0)) / len(self.per_query))

    @property
    def mrr_at_k(self) -> float:
        return float(sum((q.reciprocal_rank for q in self.per_query), Fraction(0)) / len(self.per_query))

    # names used in reports for the default cutoff
    map_at_100 = map_at_k
    mrr_at_100 = mrr_at_k

    def expected_random_map(self) -> float:
        return float(np.mean([expected_random_ap(q.n_relevant, self.corpus_size, self.cutoff) for q in self.per_query]))

    def expected_random_mrr(self) -> float:
        return float(np.mean([expected_random_rr(q.n_relevant, self.corpus_size, self.cutoff) for q in self.per_query]))

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "corpus_size": self.corpus_size,
            "map": self.map_at_k,
            "mrr": self.mrr_at_k,
            "expected_random_map": self.expected_random_map(),
            "expected_random_mrr": self.expected_random_mrr(),
            "per_query": [
                {"query_id": q.query_id, "average_precision": float(q.average_precision),
                 "reciprocal_rank": float(q.reciprocal_rank), "n_relevant": q.n_relevant}
                for q in self.per_query
            ],
        }


def run_retrieval(manifest: DatasetManifest, query_embeddings: EmbeddingTable, corpus_embeddings: EmbeddingTable,
                  cutoff: int = 100, corpus_split: str = "test", keep_top: int = 10) -> RetrievalReport:
    """Rank the whole ``corpus_split`` for every query sample and score the rankings.

    An item is relevant when it shares the query's labeled key.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be positive")
    corpus = manifest.split(corpus_split)
    if not corpus:
        raise ValueError(f"split {corpus_split!r} is empty")
    corpus_ids = [s.id for s in corpus]
    corpus_keys = np.array([s.labeled_key for s in corpus], dtype=object)
    corpus_unit = _unit_rows(corpus_embeddings.rows(corpus_ids), corpus_ids)
    id_order = np.empty(len(corpus_ids), dtype=np.int64)
    id_order[np.argsort(np.array(corpus_ids))] = np.arange(len(corpus_ids))
    queries = [manifest[qid] for qid in query_embeddings.ids]
    if not queries:
        raise ValueError("no query embeddings")
    q_vectors = query_embeddings.rows([q.id for q in queries])
    _unit_rows(q_vectors, [q.id for q in queries])
    results = []
    for q, vec in zip(queries, q_vectors):
        relevant = corpus_keys == q.labeled_key
        n_rel = int(relevant.sum())
        if n_rel == 0:
            raise ValueError(f"query {q.id!r} has no relevant item in split {corpus_split!r}")
        order = rank_by_cosine(vec, corpus_unit, id_order)
        ranked = relevant[order[:cutoff]].tolist()
        results.append(QueryResult(
            q.id,
            average_precision(ranked, n_rel, cutoff),
            reciprocal_rank(ranked, cutoff),
            n_rel,
            [corpus_ids[i] for i in order[:keep_top]],
        ))
    return RetrievalReport(results, cutoff, len(corpus_ids))
