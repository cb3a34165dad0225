"""Independent reference implementations used as test oracles.

Nothing here imports the code under test, except the DirectedGraph container.
"""

from __future__ import annotations

import random
from fractions import Fraction

LETTERS = "ABCDEFGH"


def straight_line_node_count(rng: random.Random, p: float) -> int:
    """One draw of the graph process, written out longhand; returns the kept node count."""
    while True:
        adj = {v: set() for v in LETTERS}
        for i in range(8):
            for j in range(i + 1, 8):
                if rng.random() < p:
                    a, b = LETTERS[i], LETTERS[j]
                    adj[a].add(b)
                    adj[b].add(a)
        seen, best = set(), 0
        for start in LETTERS:
            if start in seen:
                continue
            stack, size = [start], 0
            seen.add(start)
            while stack:
                v = stack.pop()
                size += 1
                for w in adj[v]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            best = max(best, size)
        if best >= 2:
            return best


def monte_carlo_node_counts(p: float, draws: int, seed: int) -> dict[int, float]:
    rng = random.Random(seed)
    counts = {n: 0 for n in range(2, 9)}
    for _ in range(draws):
        counts[straight_line_node_count(rng, p)] += 1
    return {n: c / draws for n, c in counts.items()}


def undirected_edges(edges) -> set[frozenset]:
    return {frozenset(e) for e in edges}


def brute_isomorphic(nodes1, edges1, nodes2, edges2) -> bool:
    """Search vertex bijections (with partial-assignment pruning) for an undirected isomorphism."""
    nodes1, nodes2 = list(nodes1), list(nodes2)
    if len(nodes1) != len(nodes2):
        return False
    e1, e2 = undirected_edges(edges1), undirected_edges(edges2)
    if len(e1) != len(e2):
        return False
    adj1 = {v: {w for e in e1 if v in e for w in e if w != v} for v in nodes1}
    adj2 = {v: {w for e in e2 if v in e for w in e if w != v} for v in nodes2}
    mapping: dict = {}
    used: set = set()

    def extend(i):
        if i == len(nodes1):
            return True
        v = nodes1[i]
        for w in nodes2:
            if w in used or len(adj1[v]) != len(adj2[w]):
                continue
            if all((mapping[u] in adj2[w]) == (u in adj1[v]) for u in nodes1[:i]):
                mapping[v] = w
                used.add(w)
                if extend(i + 1):
                    return True
                del mapping[v]
                used.discard(w)
        return False

    return extend(0)


def brute_ranking(scores: dict[str, float]) -> list[str]:
    return sorted(scores, key=lambda i: (-scores[i], i))


def brute_ap(ranked_ids, relevant: set, cutoff: int) -> Fraction:
    ap = Fraction(0)
    for k in range(1, min(cutoff, len(ranked_ids)) + 1):
        if ranked_ids[k - 1] in relevant:
            precision_at_k = Fraction(sum(1 for x in ranked_ids[:k] if x in relevant), k)
            ap += precision_at_k
    return ap / min(len(relevant), cutoff)


def brute_rr(ranked_ids, relevant: set, cutoff: int) -> Fraction:
    for k in range(1, min(cutoff, len(ranked_ids)) + 1):
        if ranked_ids[k - 1] in relevant:
            return Fraction(1, k)
    return Fraction(0)
