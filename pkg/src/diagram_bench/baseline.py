"""Random-embedding baseline and the flat summary table used by the CLI."""

from __future__ import annotations

import numpy as np

from .dataset import DatasetManifest
from .embeddings import EmbeddingTable
from .probing import KINDS, ProbeConfig, ProbeReport, run_probing
from .retrieval import RetrievalReport, run_retrieval

TABLE_COLUMNS = ("Method", "Node existence", "Edge existence", "Edge direction", "MAP@100", "MRR@100")


def random_embeddings(manifest: DatasetManifest, dim: int = 512, seed: int = 0) -> EmbeddingTable:
    """Unit-Gaussian vectors for every sample, drawn in manifest order."""
    rng = np.random.default_rng(seed)
    ids = [s.id for s in manifest.samples]
    return EmbeddingTable(ids, rng.standard_normal((len(ids), dim)))


def random_baseline(manifest: DatasetManifest, dim: int = 512, seed: int = 0,
                    probe_config: ProbeConfig = ProbeConfig(), cutoff: int = 100):
    table = random_embeddings(manifest, dim, seed)
    probe = run_probing(manifest, table, probe_config)
    query_ids = [s.id for s in manifest.split("query")]
    retrieval = run_retrieval(manifest, table.subset(query_ids), table, cutoff) if query_ids else None
    return probe, retrieval


def _cell(value, digits):
    return "-" if value is None else f"{value:.{digits}f}"


def summary_row(method: str, probe: ProbeReport | None = None, retrieval: RetrievalReport | None = None) -> list[str]:
    means = probe.means if probe is not None else {}
    row = [method] + [_cell(means.get(kind), 3) for kind in KINDS]
    row.append(_cell(retrieval.map_at_k if retrieval else None, 4))
    row.append(_cell(retrieval.mrr_at_k if retrieval else None, 4))
    return row


def format_table(rows: list[list[str]], columns=TABLE_COLUMNS) -> str:
    widths = [max(len(str(r[i])) for r in [list(columns)] + rows) for i in range(len(columns))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)
