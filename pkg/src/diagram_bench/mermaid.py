"""Mermaid captions: serialization, tolerant parsing of model output, and edge-set F1."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .errors import UnknownSampleId
from .graph import DirectedGraph

HEADER = "graph TD"
INDENT = "    "

EdgeSet = frozenset

_ARROW = re.compile(r"-\.+->|-+>|=+>")
_IDENT = re.compile(r"[A-Za-z0-9_]+")
_HEADER_WORDS = re.compile(r"^\s*(graph|flowchart)\b(\s+(TD|TB|BT|LR|RL)\b)?", re.IGNORECASE)
# node shapes and edge labels, innermost first: A[x], B(x), C{x}, D((x)), -->|x|
_DECORATION = re.compile(r"\[[^\[\]]*\]|\([^()]*\)|\{[^{}]*\}|\|[^|]*\||\"[^\"]*\"")
# inline link text: A -- text --> B
_LINK_TEXT = re.compile(r"(?<![-.=])--\s+[^-<>]+?\s+-->")


@dataclass(frozen=True)
class MermaidCaption:
    text: str

    @property
    def header(self) -> str:
        return self.text.split("\n", 1)[0]

    @property
    def edge_lines(self) -> list[str]:
        return [line.strip() for line in self.text.split("\n")[1:] if line.strip()]

    def __str__(self):
        return self.text


def serialize(g: DirectedGraph) -> MermaidCaption:
    lines = [HEADER] + [f"{INDENT}{s} --> {t}" for s, t in sorted(g.edges)]
    return MermaidCaption("\n".join(lines))


def _strip_decorations(segment: str) -> str:
    while True:
        stripped = _DECORATION.sub(" ", segment)
        if stripped == segment:
            return stripped
        segment = stripped


def _edges_in_segment(segment: str):
    segment = _HEADER_WORDS.sub(" ", segment)
    segment = _strip_decorations(segment)
    segment = _LINK_TEXT.sub(" --> ", segment)
    arrows = list(_ARROW.finditer(segment))
    for i, arrow in enumerate(arrows):
        before_start = arrows[i - 1].end() if i else 0
        after_end = arrows[i + 1].start() if i + 1 < len(arrows) else len(segment)
        before = _IDENT.findall(segment[before_start : arrow.start()])
        after = _IDENT.findall(segment[arrow.end() : after_end])
        if before and after:
            yield before[-1].upper(), after[0].upper()


def parse_prediction(text: str | bytes) -> frozenset[tuple[str, str]]:
    """Extract the directed edge set from arbitrary (possibly messy) Mermaid text.

    Never raises: text without any arrow yields an empty set. Self-loops are
    dropped.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    edges = set()
    for line in text.splitlines():
        if line.lstrip().startswith("```"):
            continue
        for segment in line.split(";"):
            for s, t in _edges_in_segment(segment):
                if s != t:
                    edges.add((s, t))
    return frozenset(edges)


@dataclass(frozen=True)
class CaptionScore:
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def precision(self) -> float:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.true_positives + self.false_positives + self.false_negatives
        return 2 * self.true_positives / denom if denom else 0.0

    def to_dict(self) -> dict:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def score_captions(predictions: Mapping[str, str], gold: Mapping[str, DirectedGraph]) -> CaptionScore:
    """Micro-averaged edge-set precision/recall/F1 over all gold samples.

    A gold sample without a prediction counts as an empty prediction.
    """
    unknown = sorted(set(predictions) - set(gold))
    if unknown:
        raise UnknownSampleId(f"{len(unknown)} prediction id(s) not in gold, e.g. {unknown[0]!r}")
    tp = fp = fn = 0
    for sample_id, graph in gold.items():
        pred = parse_prediction(predictions.get(sample_id, ""))
        truth = graph.edge_set
        hit = len(pred & truth)
        tp += hit
        fp += len(pred) - hit
        fn += len(truth) - hit
    return CaptionScore(tp, fp, fn)
