"""Debiased diagram-caption benchmark: generation and evaluation."""

from .graph import (
    CanonicalKey,
    DirectedGraph,
    GenerationConfig,
    canonical_key,
    is_isomorphic_unlabeled_undirected,
    sample_graph,
    weakly_connected_components,
)
from .layout import Layout, LayoutConfig, downward_fraction, layout_graph, leftward_fraction
from .mermaid import CaptionScore, MermaidCaption, parse_prediction, score_captions, serialize
from .render import RenderConfig, rasterize, render_svg

__version__ = "0.1.0"

__all__ = [
    "CanonicalKey",
    "CaptionScore",
    "DirectedGraph",
    "GenerationConfig",
    "Layout",
    "LayoutConfig",
    "MermaidCaption",
    "RenderConfig",
    "canonical_key",
    "downward_fraction",
    "is_isomorphic_unlabeled_undirected",
    "layout_graph",
    "leftward_fraction",
    "parse_prediction",
    "rasterize",
    "render_svg",
    "sample_graph",
    "score_captions",
    "serialize",
    "weakly_connected_components",
]
