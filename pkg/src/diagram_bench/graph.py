"""Labeled directed graphs over the letters A-H, random sampling, and canonical keys."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ResampleLimitExceeded
from .seeding import derive_seed

LABELS: tuple[str, ...] = tuple("ABCDEFGH")
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}
LABEL_PAIRS: tuple[tuple[str, str], ...] = tuple(itertools.combinations(LABELS, 2))

Edge = tuple[str, str]


def _check_label(label: str) -> None:
    if label not in LABEL_INDEX:
        raise ValueError(f"node label must be one of A-H, got {label!r}")


@dataclass(frozen=True)
class DirectedGraph:
    """A weakly connected digraph without self-loops or 2-cycles.

    ``nodes`` and ``edges`` are stored sorted so that equal graphs compare
    and hash equal.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        edges = tuple(sorted(set((str(s), str(t)) for s, t in self.edges)))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        self._validate()

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], nodes: Iterable[str] | None = None) -> DirectedGraph:
        edges = list(edges)
        if nodes is None:
            nodes = {x for e in edges for x in e}
        return cls(tuple(nodes), tuple(edges))

    def _validate(self) -> None:
        if not 2 <= len(self.nodes) <= 8:
            raise ValueError(f"graph must have 2-8 nodes, got {len(self.nodes)}")
        for label in self.nodes:
            _check_label(label)
        node_set = set(self.nodes)
        edge_set = set(self.edges)
        for s, t in self.edges:
            if s == t:
                raise ValueError(f"self-loop on {s}")
            if s not in node_set or t not in node_set:
                raise ValueError(f"edge {s}->{t} has an endpoint outside the node set")
            if (t, s) in edge_set:
                raise ValueError(f"bidirectional pair {s}<->{t}")
        if len(weakly_connected_components(self.edges, self.nodes)) != 1:
            raise ValueError("graph is not weakly connected")

    @property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    def has_edge(self, source: str, target: str) -> bool:
        return (source, target) in self.edge_set

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class GenerationConfig:
    edge_probability: float = 0.3
    master_seed: int = 0
    resample_limit: int = 100

    def __post_init__(self):
        if not 0.0 < self.edge_probability <= 1.0:
            raise ValueError(f"edge_probability must be in (0, 1], got {self.edge_probability}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.resample_limit < 1:
            raise ValueError("resample_limit must be positive")


def weakly_connected_components(edges: Iterable[Edge], labels: Iterable[str] = LABELS) -> list[frozenset[str]]:
    """Components of the undirected version of ``edges``.

    Every label in ``labels`` and every edge endpoint ends up in exactly one
    component; isolated labels are singletons. Components are returned in
    order of their alphabetically smallest member.
    """
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for label in labels:
        parent.setdefault(label, label)
    for s, t in edges:
        parent.setdefault(s, s)
        parent.setdefault(t, t)
        rs, rt = find(s), find(t)
        if rs != rt:
            if rt < rs:
                rs, rt = rt, rs
            parent[rt] = rs
    groups: dict[str, set[str]] = {}
    for x in parent:
        groups.setdefault(find(x), set()).add(x)
    return [frozenset(groups[root]) for root in sorted(groups, key=lambda r: min(groups[r]))]


def largest_component(components: list[frozenset[str]]) -> frozenset[str]:
    # ties go to the component holding the alphabetically smallest label
    return min(components, key=lambda c: (-len(c), min(c)))


def _draw_edges(rng: random.Random, p: float) -> list[Edge]:
    edges = []
    for a, b in LABEL_PAIRS:
        if rng.random() < p:
            edges.append((a, b) if rng.random() < 0.5 else (b, a))
    return edges


def sample_graph(config: GenerationConfig, sample_index: int, stream: str = "graph") -> DirectedGraph:
    """Draw the graph for ``sample_index``.

    Each of the 28 label pairs carries an edge with probability
    ``edge_probability``, oriented by a fair coin; only the largest weakly
    connected component is kept. Draws whose largest component is a single
    node are redrawn from a fresh seed.
    """
    for attempt in range(config.resample_limit):
        rng = random.Random(derive_seed(config.master_seed, stream, sample_index, attempt))
        edges = _draw_edges(rng, config.edge_probability)
        keep = largest_component(weakly_connected_components(edges))
        if len(keep) >= 2:
            return DirectedGraph(tuple(keep), tuple(e for e in edges if e[0] in keep))
    raise ResampleLimitExceeded(
        f"{config.resample_limit} consecutive draws for sample {sample_index} had no edge "
        f"(edge_probability={config.edge_probability})"
    )


@dataclass(frozen=True)
class CanonicalKey:
    labeled_key: bytes
    unlabeled_undirected_key: bytes


def labeled_key(g: DirectedGraph) -> bytes:
    return ("".join(g.nodes) + "|" + ",".join(s + t for s, t in g.edges)).encode("ascii")


def _pair_index(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    # position of unordered pair (a, b), a < b, in row-major upper-triangle order
    return a * n - a * (a + 1) // 2 + (b - a - 1)


@lru_cache(maxsize=None)
def _pair_weight_table(n: int) -> np.ndarray:
    """weights[pair, perm] = value of that original pair's bit under ``perm``.

    For each of the n! relabelings, original node ``u`` moves to position
    ``perm[u]``; an undirected edge {u, v} then sets bit
    ``pair_index(perm[u], perm[v])`` of an m-bit string read MSB first.
    """
    m = n * (n - 1) // 2
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    table = np.empty((m, len(perms)), dtype=np.int64)
    for k, (u, v) in enumerate(itertools.combinations(range(n), 2)):
        pu, pv = perms[:, u], perms[:, v]
        pos = _pair_index(np.minimum(pu, pv), np.maximum(pu, pv), n)
        table[k] = np.left_shift(np.int64(1), (m - 1 - pos))
    table.setflags(write=False)
    return table


@lru_cache(maxsize=65536)
def _min_adjacency_code(n: int, pairs: frozenset[tuple[int, int]]) -> int:
    if not pairs:
        return 0
    table = _pair_weight_table(n)
    rows = [_pair_index(np.int64(u), np.int64(v), n) for u, v in pairs]
    codes = table[rows].sum(axis=0)
    return int(codes.min())


def unlabeled_undirected_key(g: DirectedGraph) -> bytes:
    """Lexicographically smallest upper-triangle adjacency bitstring over all n! orderings."""
    n = len(g.nodes)
    index = {label: i for i, label in enumerate(g.nodes)}
    pairs = frozenset(tuple(sorted((index[s], index[t]))) for s, t in g.edges)
    m = n * (n - 1) // 2
    code = _min_adjacency_code(n, pairs)
    return bytes([n]) + code.to_bytes((m + 7) // 8, "big")


def canonical_key(g: DirectedGraph) -> CanonicalKey:
    return CanonicalKey(labeled_key(g), unlabeled_undirected_key(g))


def is_isomorphic_unlabeled_undirected(g1: DirectedGraph, g2: DirectedGraph) -> bool:
    return unlabeled_undirected_key(g1) == unlabeled_undirected_key(g2)
