"""Corpus, retrieval-query and held-out split construction, and the manifest format."""

from __future__ import annotations

import dataclasses
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DiagramBenchError, ExhaustedAttempts, InsufficientDistinctGraphs, SampleError
from .graph import DirectedGraph, GenerationConfig, canonical_key, sample_graph, unlabeled_undirected_key
from .layout import LayoutConfig, layout_graph
from .mermaid import serialize
from .render import RenderConfig, rasterize, render_svg
from .seeding import derive_seed, hash_key

FORMAT_VERSION = 1
SPLITS = ("train", "test", "query", "heldout-noniso")
MANIFEST_NAME = "manifest.jsonl"
META_NAME = "dataset.meta.json"


@dataclass(frozen=True)
class BuildConfig:
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    render_images: bool = True

    def to_dict(self) -> dict:
        return {
            "generation": dataclasses.asdict(self.generation),
            "layout": dataclasses.asdict(self.layout),
            "render": dataclasses.asdict(self.render),
            "render_images": self.render_images,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BuildConfig:
        layout = dict(d.get("layout", {}))
        if "canvas" in layout:
            layout["canvas"] = tuple(layout["canvas"])
        return cls(
            GenerationConfig(**d.get("generation", {})),
            LayoutConfig(**layout),
            RenderConfig(**d.get("render", {})),
            d.get("render_images", True),
        )


@dataclass(frozen=True)
class DiagramSample:
    id: str
    split: str
    graph: DirectedGraph
    layout_seed: int
    caption: str
    image_path: str | None
    labeled_key: bytes
    unlabeled_undirected_key: bytes

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "split": self.split,
            "nodes": list(self.graph.nodes),
            "edges": [list(e) for e in self.graph.edges],
            "caption": self.caption,
            "image_path": self.image_path,
            "layout_seed": self.layout_seed,
            "labeled_key": self.labeled_key.hex(),
            "unlabeled_undirected_key": self.unlabeled_undirected_key.hex(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> DiagramSample:
        if rec.get("split") not in SPLITS:
            raise ValueError(f"unknown split {rec.get('split')!r}")
        graph = DirectedGraph(tuple(rec["nodes"]), tuple(tuple(e) for e in rec["edges"]))
        return cls(
            id=str(rec["id"]),
            split=rec["split"],
            graph=graph,
            layout_seed=int(rec["layout_seed"]),
            caption=rec["caption"],
            image_path=rec.get("image_path"),
            labeled_key=bytes.fromhex(rec["labeled_key"]),
            unlabeled_undirected_key=bytes.fromhex(rec["unlabeled_undirected_key"]),
        )


@dataclass
class DatasetManifest:
    config: BuildConfig
    samples: list[DiagramSample]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")
        self._by_id = {s.id: s for s in self.samples}

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, sample_id: str) -> DiagramSample:
        return self._by_id[sample_id]

    def __contains__(self, sample_id) -> bool:
        return sample_id in self._by_id

    def split(self, name: str) -> list[DiagramSample]:
        return [s for s in self.samples if s.split == name]

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in SPLITS}
        for s in self.samples:
            out[s.split] += 1
        return out

    def extend(self, samples: Iterable[DiagramSample], **params) -> DatasetManifest:
        return DatasetManifest(self.config, self.samples + list(samples), {**self.params, **params})

    def meta(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "params": self.params,
            "counts": self.counts(),
            "node_shape": "circle",
        }

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as f:
            for s in self.samples:
                f.write(json.dumps(s.to_record(), sort_keys=True, separators=(",", ":")) + "\n")
        with open(out / META_NAME, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.meta(), f, indent=2, sort_keys=True)
            f.write("\n")
        return out / MANIFEST_NAME

    @classmethod
    def load(cls, path: str | Path) -> DatasetManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        meta_path = path.parent / META_NAME
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        samples = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    samples.append(DiagramSample.from_record(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: malformed manifest record ({exc})") from exc
        config = BuildConfig.from_dict(meta["config"]) if "config" in meta else BuildConfig()
        return cls(config, samples, meta.get("params", {}))


def sample_id(prefix: str, index: int, width: int = 6) -> str:
    return f"{prefix}{index:0{width}d}"


def assign_test_ids(ids: list[str], test_fraction: float, master_seed: int) -> set[str]:
    """Pick exactly floor(test_fraction * len(ids)) ids by ranking a keyed hash of each id."""
    n_test = int(test_fraction * len(ids))
    ranked = sorted(ids, key=lambda i: (hash_key(master_seed, "split", i), i))
    return set(ranked[:n_test])


def make_sample(config: BuildConfig, graph: DirectedGraph, sample_id: str, split: str,
                layout_seed: int, out_dir: str | Path | None) -> DiagramSample:
    key = canonical_key(graph)
    image_path = f"images/{split}/{sample_id}.png"
    if config.render_images and out_dir is not None:
        layout = layout_graph(graph, config.layout, layout_seed)
        svg = render_svg(graph, layout, config.render)
        png = rasterize(svg, config.render.image_side, "png", {"id": sample_id, "layout_seed": str(layout_seed)})
        target = Path(out_dir) / image_path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(png)
    return DiagramSample(
        id=sample_id,
        split=split,
        graph=graph,
        layout_seed=layout_seed,
        caption=serialize(graph).text,
        image_path=image_path if config.render_images else None,
        labeled_key=key.labeled_key,
        unlabeled_undirected_key=key.unlabeled_undirected_key,
    )


def _corpus_job(args):
    config, index, sid, split, out_dir = args
    try:
        graph = sample_graph(config.generation, index)
        layout_seed = derive_seed(config.generation.master_seed, "layout", index)
        return make_sample(config, graph, sid, split, layout_seed, out_dir)
    except DiagramBenchError as exc:
        raise SampleError(index, exc) from exc


def _run_jobs(fn, jobs_args, jobs: int):
    if jobs <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args, chunksize=64))


def build_corpus(config: BuildConfig, total: int, test_fraction: float,
                 out_dir: str | Path | None = None, jobs: int = 1) -> DatasetManifest:
    """Generate ``total`` samples and split them into train/test.

    Sample ``i`` uses graph index ``i`` and a layout seed derived from the
    master seed, so the result does not depend on ``jobs``.
    """
    if total < 1:
        raise ValueError("total must be at least 1")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    width = max(6, len(str(total - 1)))
    ids = [sample_id("g", i, width) for i in range(total)]
    test_ids = assign_test_ids(ids, test_fraction, config.generation.master_seed)
    args = [(config, i, sid, "test" if sid in test_ids else "train", out_dir) for i, sid in enumerate(ids)]
    samples = _run_jobs(_corpus_job, args, jobs)
    return DatasetManifest(config, samples, {"total": total, "test_fraction": test_fraction})


def relevant_ids(manifest: DatasetManifest, key: bytes, split: str = "test") -> list[str]:
    return [s.id for s in manifest.samples if s.split == split and s.labeled_key == key]


def build_query_set(manifest: DatasetManifest, n_queries: int, out_dir: str | Path | None = None) -> list[DiagramSample]:
    """Re-render ``n_queries`` distinct test graphs with fresh layouts.

    Each query's relevant items are the test samples sharing its labeled key.
    """
    config = manifest.config
    master = config.generation.master_seed
    test = manifest.split("test")
    if not test:
        raise InsufficientDistinctGraphs("test split is empty")
    by_key: dict[bytes, list[DiagramSample]] = {}
    for s in test:
        by_key.setdefault(s.labeled_key, []).append(s)
    keys = sorted(by_key)
    if n_queries > len(keys):
        raise InsufficientDistinctGraphs(
            f"requested {n_queries} queries but the test split has only {len(keys)} distinct graphs"
        )
    chosen = random.Random(derive_seed(master, "query-select")).sample(keys, n_queries)
    queries = []
    for j, key in enumerate(chosen):
        group = by_key[key]
        used = {s.layout_seed for s in group}
        attempt = 0
        seed = derive_seed(master, "query-layout", j, attempt)
        while seed in used:
            attempt += 1
            seed = derive_seed(master, "query-layout", j, attempt)
        queries.append(make_sample(config, group[0].graph, sample_id("q", j, 5), "query", seed, out_dir))
    return queries


def build_noniso_split(manifest: DatasetManifest, n: int, max_attempts: int,
                       out_dir: str | Path | None = None) -> list[DiagramSample]:
    """Fresh samples whose unlabeled, undirected structure never occurs in train."""
    config = manifest.config
    master = config.generation.master_seed
    train = manifest.split("train")
    if not train:
        raise ValueError("train split is empty")
    train_keys = {s.unlabeled_undirected_key for s in train}
    found: list[DiagramSample] = []
    for attempt in range(max_attempts):
        if len(found) == n:
            break
        graph = sample_graph(config.generation, attempt, stream="noniso")
        if unlabeled_undirected_key(graph) in train_keys:
            continue
        j = len(found)
        seed = derive_seed(master, "noniso-layout", j)
        found.append(make_sample(config, graph, sample_id("n", j, 5), "heldout-noniso", seed, out_dir))
    if len(found) < n:
        raise ExhaustedAttempts(
            f"found {len(found)} of {n} non-isomorphic graphs in {max_attempts} attempts", len(found), found
        )
    return found
