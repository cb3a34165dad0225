"""Embedding tables exchanged with external image encoders (one JSON record per line)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import UnknownSampleId


@dataclass
class EmbeddingTable:
    ids: list[str]
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValueError("vectors must be a 2-D array with one row per id")
        if self.vectors.shape[1] < 1:
            raise ValueError("embedding dimension must be positive")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in embedding table")
        if not np.all(np.isfinite(self.vectors)):
            bad = self.ids[int(np.nonzero(~np.isfinite(self.vectors).all(axis=1))[0][0])]
            raise ValueError(f"non-finite embedding for id {bad!r}")
        self.index = {sid: i for i, sid in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self):
        return len(self.ids)

    def __contains__(self, sample_id) -> bool:
        return sample_id in self.index

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        ids = list(ids)
        missing = [i for i in ids if i not in self.index]
        if missing:
            raise UnknownSampleId(f"{len(missing)} id(s) have no embedding, e.g. {missing[0]!r}")
        return self.vectors[[self.index[i] for i in ids]]

    def subset(self, ids: Iterable[str]) -> EmbeddingTable:
        ids = list(ids)
        return EmbeddingTable(ids, self.rows(ids))

    def check_against(self, known_ids) -> None:
        unknown = [i for i in self.ids if i not in known_ids]
        if unknown:
            raise UnknownSampleId(f"{len(unknown)} embedding id(s) are not in the manifest, e.g. {unknown[0]!r}")


def load_embeddings(path: str | Path) -> EmbeddingTable:
    ids, vectors, dim = [], [], None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                vec = [float(x) for x in rec["vector"]]
                sid = str(rec["id"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed embedding record ({exc})") from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: vector has dimension {len(vec)}, expected {dim}")
            ids.append(sid)
            vectors.append(vec)
    if not ids:
        raise ValueError(f"{path}: no embedding records")
    return EmbeddingTable(ids, np.array(vectors))


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sid, vec in zip(table.ids, table.vectors):
            f.write(json.dumps({"id": sid, "vector": [float(x) for x in vec]}, separators=(",", ":")) + "\n")
