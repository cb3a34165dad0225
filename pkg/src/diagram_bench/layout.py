"""Fruchterman-Reingold placement from a random start, plus overlap cleanup."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DegenerateLayout
from .graph import DirectedGraph


@dataclass(frozen=True)
class LayoutConfig:
    """Force-directed placement parameters, in canvas units.

    ``optimal_distance_k`` and ``initial_temperature`` default to
    ``k_coefficient * min(canvas) / sqrt(n)`` and ``0.1 * canvas width`` when
    left as None.
    """

    iterations: int = 50
    optimal_distance_k: float | None = None
    k_coefficient: float = 0.7
    initial_temperature: float | None = None
    cooling: float = 0.95
    node_diameter: float = 0.16
    canvas: tuple[float, float] = (1.0, 1.0)
    overlap_passes: int = 20

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.k_coefficient <= 0:
            raise ValueError("k_coefficient must be positive")
        if self.optimal_distance_k is not None and self.optimal_distance_k <= 0:
            raise ValueError("optimal_distance_k must be positive")
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise ValueError("initial_temperature must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        if self.node_diameter <= 0:
            raise ValueError("node_diameter must be positive")
        if min(self.canvas) <= 0:
            raise ValueError("canvas sides must be positive")

    def k_for(self, n_nodes: int) -> float:
        if self.optimal_distance_k is not None:
            return self.optimal_distance_k
        return self.k_coefficient * min(self.canvas) / math.sqrt(n_nodes)

    def temperature(self) -> float:
        if self.initial_temperature is not None:
            return self.initial_temperature
        return 0.1 * self.canvas[0]


@dataclass(frozen=True)
class Layout:
    positions: dict[str, tuple[float, float]]
    canvas: tuple[float, float]
    layout_seed: int
    node_diameter: float = field(default=0.16)

    def array(self, nodes: Iterable[str]) -> np.ndarray:
        return np.array([self.positions[v] for v in nodes], dtype=float)


def _fruchterman_reingold(pos, adjacency, k, temperature, cooling, iterations, canvas):
    n = len(pos)
    w, h = canvas
    off_diag = ~np.eye(n, dtype=bool)
    k2 = k * k
    for _ in range(iterations):
        delta = pos[:, None, :] - pos[None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", delta, delta)
        np.maximum(dist2, 1e-18, out=dist2)
        # per unit of delta: repulsion k^2/d^2, attraction along edges d/k
        coef = k2 / dist2 - adjacency * (np.sqrt(dist2) / k)
        coef *= off_diag
        disp = np.einsum("ij,ijk->ik", coef, delta)
        length = np.sqrt(np.einsum("ij,ij->i", disp, disp))
        safe = np.where(length > 0, length, 1.0)
        pos = pos + disp * (np.minimum(length, temperature) / safe)[:, None]
        np.clip(pos[:, 0], 0.0, w, out=pos[:, 0])
        np.clip(pos[:, 1], 0.0, h, out=pos[:, 1])
        temperature *= cooling
    return pos


def _clamp(p, w, h):
    return [min(max(p[0], 0.0), w), min(max(p[1], 0.0), h)]


def resolve_overlaps(points: list[list[float]], diameter: float, canvas, max_passes: int = 20, slack: float = 0.02) -> list[list[float]]:
    """Push overlapping pairs apart along their separation vector until none overlap.

    Coincident pairs separate along +x. When the canvas border absorbs part of
    a push, the remaining separation is taken by the other node.
    """
    w, h = canvas
    target = diameter * (1.0 + slack)
    pts = [list(p) for p in points]
    n = len(pts)
    for _ in range(max_passes):
        moved = False
        for i in range(n):
            for j in range(i + 1, n):
                dx = pts[i][0] - pts[j][0]
                dy = pts[i][1] - pts[j][1]
                d = math.hypot(dx, dy)
                if d >= diameter:
                    continue
                moved = True
                if d == 0.0:
                    ux, uy = 1.0, 0.0
                else:
                    ux, uy = dx / d, dy / d
                half = (target - d) / 2.0
                pts[i] = _clamp((pts[i][0] + ux * half, pts[i][1] + uy * half), w, h)
                pts[j] = _clamp((pts[j][0] - ux * half, pts[j][1] - uy * half), w, h)
                for mover, sign in ((i, 1.0), (j, -1.0)):
                    dx = pts[i][0] - pts[j][0]
                    dy = pts[i][1] - pts[j][1]
                    d = math.hypot(dx, dy)
                    if d >= diameter:
                        break
                    rest = target - d
                    pts[mover] = _clamp(
                        (pts[mover][0] + sign * ux * rest, pts[mover][1] + sign * uy * rest), w, h
                    )
        if not moved:
            break
    return pts


def min_pairwise_distance(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return math.inf
    delta = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((delta**2).sum(-1))
    return float(dist[np.triu_indices(len(pts), 1)].min())


def initial_positions(n: int, canvas, layout_seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(layout_seed))
    return rng.uniform(0.0, 1.0, size=(n, 2)) * np.asarray(canvas, dtype=float)


def layout_graph(g: DirectedGraph, config: LayoutConfig = LayoutConfig(), layout_seed: int = 0) -> Layout:
    """Place the nodes of ``g`` on the canvas.

    Starts from uniform random positions drawn from ``layout_seed``; edge
    direction plays no role in the forces.
    """
    nodes = g.nodes
    n = len(nodes)
    index = {v: i for i, v in enumerate(nodes)}
    adjacency = np.zeros((n, n))
    for s, t in g.edges:
        adjacency[index[s], index[t]] = adjacency[index[t], index[s]] = 1.0
    pos = initial_positions(n, config.canvas, layout_seed)
    pos = _fruchterman_reingold(
        pos, adjacency, config.k_for(n), config.temperature(), config.cooling, config.iterations, config.canvas
    )
    if not np.all(np.isfinite(pos)):
        raise DegenerateLayout(f"non-finite coordinates for seed {layout_seed}")
    pts = resolve_overlaps(pos.tolist(), config.node_diameter, config.canvas, config.overlap_passes)
    if min_pairwise_distance(pts) < config.node_diameter:
        raise DegenerateLayout(
            f"could not separate nodes to diameter {config.node_diameter} within {config.overlap_passes} passes"
        )
    positions = {v: (float(p[0]), float(p[1])) for v, p in zip(nodes, pts)}
    return Layout(positions, tuple(config.canvas), layout_seed, config.node_diameter)


def _edge_fraction(items, axis: int) -> float:
    hits = total = 0
    for g, layout in items:
        for s, t in g.edges:
            total += 1
            if axis == 1 and layout.positions[t][1] > layout.positions[s][1]:
                hits += 1
            elif axis == 0 and layout.positions[t][0] < layout.positions[s][0]:
                hits += 1
    if total == 0:
        raise ValueError("no edges in the given layouts")
    return hits / total


def downward_fraction(items) -> float:
    """Share of edges whose target sits lower on screen (larger y) than its source."""
    return _edge_fraction(items, axis=1)


def leftward_fraction(items) -> float:
    """Share of edges whose target sits left of (smaller x than) its source."""
    return _edge_fraction(items, axis=0)
