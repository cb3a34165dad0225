"""End-to-end acceptance checks, one test (or group) per criterion."""

import hashlib
import itertools
import json
import random
import time
import xml.etree.ElementTree as ET
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from diagram_bench.baseline import random_baseline
from diagram_bench.cli import main
from diagram_bench.dataset import BuildConfig, DatasetManifest, build_corpus, build_noniso_split, build_query_set
from diagram_bench.embeddings import EmbeddingTable
from diagram_bench.errors import ExhaustedAttempts
from diagram_bench.graph import (
    LABEL_PAIRS,
    LABELS,
    DirectedGraph,
    GenerationConfig,
    is_isomorphic_unlabeled_undirected,
    sample_graph,
    unlabeled_undirected_key,
)
from diagram_bench.layout import LayoutConfig, layout_graph
from diagram_bench.mermaid import parse_prediction, score_captions, serialize
from diagram_bench.probing import logistic_objective, train_probe
from diagram_bench.render import render_svg
from diagram_bench.retrieval import average_precision, run_retrieval
from diagram_bench.seeding import derive_seed
from oracles import brute_isomorphic
from scenarios import check_against_oracle, random_corpus

SVG_NS = "{http://www.w3.org/2000/svg}"
# held-out graphs found in 1,000 draws against the seed-0 desk train split
NONISO_FOUND_IN_1000_ATTEMPTS = 135


@pytest.fixture(scope="module")
def graphs_1e5():
    cfg = GenerationConfig(0.3, 2025)
    start = time.perf_counter()
    graphs = [sample_graph(cfg, i) for i in range(100_000)]
    return graphs, time.perf_counter() - start


@pytest.fixture(scope="module")
def desk_manifest():
    """Desk-scale dataset (10k samples, 200 queries, 500 held-out), manifest only."""
    config = BuildConfig(GenerationConfig(0.3, 0), render_images=False)
    m = build_corpus(config, 10_000, 0.1)
    m = m.extend(build_query_set(m, 200), n_queries=200)
    return m.extend(build_noniso_split(m, 500, 100_000), n_noniso=500)


@pytest.mark.criterion(1, "generation invariants over 1e5 graphs, < 60 s")
def test_ac1_generation_invariants(graphs_1e5, detail):
    graphs, elapsed = graphs_1e5
    sizes = Counter()
    for g in graphs:
        edges = g.edge_set
        assert all(s != t for s, t in edges)
        assert all((t, s) not in edges for s, t in edges)
        # re-validate connectivity independently of the constructor
        reach, frontier = {g.nodes[0]}, [g.nodes[0]]
        while frontier:
            v = frontier.pop()
            for s, t in edges:
                for a, b in ((s, t), (t, s)):
                    if a == v and b not in reach:
                        reach.add(b)
                        frontier.append(b)
        assert reach == set(g.nodes)
        sizes[len(g)] += 1
    assert set(sizes) == set(range(2, 9))
    detail(f"{elapsed:.1f} s, sizes {dict(sorted(sizes.items()))}")
    assert elapsed < 60


@pytest.mark.criterion(2, "per-pair direction counts pass two-sided binomial tests (alpha 0.001)")
def test_ac2_textual_debiasing(graphs_1e5, detail):
    graphs, _ = graphs_1e5
    forward = Counter()
    total = Counter()
    for g in graphs:
        for s, t in g.edges:
            pair = (s, t) if s < t else (t, s)
            total[pair] += 1
            forward[pair] += s < t
    assert sum(total.values()) >= 10_000
    pvalues = {pair: stats.binomtest(forward[pair], total[pair], 0.5).pvalue for pair in LABEL_PAIRS}
    worst = min(pvalues, key=pvalues.get)
    detail(f"{sum(total.values())} edges, min p {pvalues[worst]:.4f} at {''.join(worst)}")
    assert all(p > 0.001 for p in pvalues.values())


@pytest.mark.criterion(3, "downward and leftward edge fractions in [0.48, 0.52] over 1e4 rendered layouts")
def test_ac3_positional_debiasing(detail):
    cfg = GenerationConfig(0.3, 303)
    down = left = n_edges = ties = 0
    for i in range(10_000):
        g = sample_graph(cfg, i)
        svg = render_svg(g, layout_graph(g, LayoutConfig(), derive_seed(303, "layout", i)))
        # measure on the emitted picture: each line runs from source toward target
        for line in ET.fromstring(svg).iter(SVG_NS + "line"):
            x1, y1, x2, y2 = (float(line.get(k)) for k in ("x1", "y1", "x2", "y2"))
            down += y2 > y1
            left += x2 < x1
            ties += y2 == y1
            n_edges += 1
    fd, fl = down / n_edges, left / n_edges
    # edges between nodes clamped to the same wall are exactly level and count as neither
    detail(f"down {fd:.4f}, left {fl:.4f} over {n_edges} edges, {ties / n_edges:.3f} level")
    assert 0.48 <= fd <= 0.52
    assert 0.48 <= fl <= 0.52


@pytest.mark.criterion(4, "parse(serialize(g)) == g.edges for 1e4 graphs")
def test_ac4_round_trip(graphs_1e5):
    graphs, _ = graphs_1e5
    for g in graphs[:10_000]:
        assert parse_prediction(serialize(g).text) == g.edge_set


@pytest.mark.criterion(5, "MAP/MRR match brute-force oracle on 1,000 corpora; worked AP = 0.8333")
def test_ac5_metric_oracle(detail):
    assert f"{float(average_precision([True, False, True], 2)):.4f}" == "0.8333"
    rng = random.Random(5)
    for _ in range(1000):
        check_against_oracle(rng, random_corpus(rng, rng.randint(1, 20)), rng.choice([1, 2, 5, 10, 100]))
    detail("1000 corpora, exact Fractions")


def _connected_labeled_graphs(n):
    nodes = LABELS[:n]
    pairs = list(itertools.combinations(nodes, 2))
    rng = random.Random(n)
    for mask in range(1, 1 << len(pairs)):
        chosen = [p for i, p in enumerate(pairs) if mask >> i & 1]
        edges = [(a, b) if rng.random() < 0.5 else (b, a) for a, b in chosen]
        try:
            yield DirectedGraph(nodes, tuple(edges))
        except ValueError:
            continue


@pytest.mark.criterion(6, "isomorphism keys agree with brute force: exhaustive to 5 nodes, 1,000 pairs at 6-8")
def test_ac6_isomorphism_exhaustive(detail):
    graphs = [g for n in range(2, 6) for g in _connected_labeled_graphs(n)]
    keys = [unlabeled_undirected_key(g) for g in graphs]
    compared = 0
    for i, j in itertools.combinations(range(len(graphs)), 2):
        g1, g2 = graphs[i], graphs[j]
        assert (keys[i] == keys[j]) == brute_isomorphic(g1.nodes, g1.edges, g2.nodes, g2.edges)
        compared += 1
    detail(f"{len(graphs)} graphs, {compared} pairs")


@pytest.mark.criterion(6, "isomorphism keys agree with brute force: exhaustive to 5 nodes, 1,000 pairs at 6-8")
def test_ac6_isomorphism_random_large(detail):
    rng = random.Random(66)
    positives = 0
    for trial in range(1000):
        n = rng.randint(6, 8)
        g1 = _random_connected(rng, n)
        if trial % 2:
            # relabeled copy with random edge reversals: always isomorphic
            perm = dict(zip(g1.nodes, rng.sample(LABELS, n)))
            edges = [(perm[s], perm[t]) if rng.random() < 0.5 else (perm[t], perm[s]) for s, t in g1.edges]
            g2 = DirectedGraph.from_edges(edges, perm.values())
        else:
            g2 = _random_connected(rng, n, len(g1.edges))
        brute = brute_isomorphic(g1.nodes, g1.edges, g2.nodes, g2.edges)
        positives += brute
        assert is_isomorphic_unlabeled_undirected(g1, g2) == brute
    detail(f"{positives} isomorphic of 1000")


def _random_connected(rng, n, m=None):
    nodes = rng.sample(LABELS, n)
    pairs = list(itertools.combinations(nodes, 2))
    while True:
        m_edges = m if m is not None else rng.randint(n - 1, len(pairs))
        chosen = rng.sample(pairs, m_edges)
        try:
            return DirectedGraph(tuple(nodes), tuple((a, b) if rng.random() < 0.5 else (b, a) for a, b in chosen))
        except ValueError:
            continue


@pytest.mark.criterion(7, "random Gaussian baseline: probes 0.50 +- 0.03, MAP within 5x of expectation, MRR >= MAP")
def test_ac7_random_baseline(desk_manifest, detail):
    start = time.perf_counter()
    probe, retrieval = random_baseline(desk_manifest, dim=512, seed=0)
    elapsed = time.perf_counter() - start
    means = probe.means
    expected = retrieval.expected_random_map()
    detail(
        "node {node-existence:.3f} edge {edge-existence:.3f} dir {edge-direction:.3f}".format(**means)
        + f", MAP {retrieval.map_at_k:.4f} (expected {expected:.4f}), MRR {retrieval.mrr_at_k:.4f}, {elapsed:.0f} s"
    )
    for value in means.values():
        assert abs(value - 0.5) <= 0.03
    assert expected / 5 <= retrieval.map_at_k <= expected * 5
    assert retrieval.mrr_at_k >= retrieval.map_at_k
    assert all(q.reciprocal_rank >= q.average_precision for q in retrieval.per_query)
    assert elapsed < 600


@pytest.mark.criterion(8, "probe sanity: separable 1.0, independent 0.5 +- 0.05, gradient rel. error < 1e-5")
def test_ac8_probe_sanity(detail):
    rng = np.random.default_rng(8)
    y = rng.random(2000) < 0.5
    X = rng.standard_normal((2000, 10))
    X[:, 0] += np.where(y, 3.0, -3.0) * (np.abs(X[:, 0]) + 1)
    sep = train_probe(X[:1000], y[:1000]).accuracy(X[1000:], y[1000:])
    Xi = rng.standard_normal((2000, 10))
    indep = train_probe(Xi[:1000], y[:1000]).accuracy(Xi[1000:], y[1000:])
    params = rng.standard_normal(11)
    _, grad = logistic_objective(params, X[:200], y[:200].astype(float), 1.0)
    h = 1e-6
    fd = np.array([
        (logistic_objective(params + h * e, X[:200], y[:200].astype(float), 1.0)[0]
         - logistic_objective(params - h * e, X[:200], y[:200].astype(float), 1.0)[0]) / (2 * h)
        for e in np.eye(11)
    ])
    rel = np.linalg.norm(fd - grad) / np.linalg.norm(grad)
    detail(f"separable {sep:.3f}, independent {indep:.3f}, grad rel err {rel:.1e}")
    assert sep == 1.0
    assert abs(indep - 0.5) <= 0.05
    assert rel < 1e-5


@pytest.mark.criterion(9, "queries embedded like their relevant items give MAP@100 = MRR@100 = 1.0")
def test_ac9_retrieval_upper_bound(desk_manifest, detail):
    ids = [s.id for s in desk_manifest.samples]
    vectors = np.array([
        np.random.default_rng(int.from_bytes(hashlib.sha256(s.labeled_key).digest()[:8], "big")).standard_normal(64)
        for s in desk_manifest.samples
    ])
    table = EmbeddingTable(ids, vectors)
    queries = [s.id for s in desk_manifest.split("query")]
    report = run_retrieval(desk_manifest, table.subset(queries), table)
    assert max(q.n_relevant for q in report.per_query) <= 100
    detail(f"{len(queries)} queries, MAP {report.map_at_k}, MRR {report.mrr_at_k}")
    assert report.map_at_k == 1.0 and report.mrr_at_k == 1.0


@pytest.mark.criterion(10, "caption scorer: echo 1.000, reversed 0.000, TP1/FP1/FN1 0.500")
def test_ac10_caption_scorer(desk_manifest):
    gold = {s.id: s.graph for s in desk_manifest.split("test")}
    echo = {k: serialize(g).text for k, g in gold.items()}
    reverse = {k: "graph TD\n" + "\n".join(f"    {t} --> {s}" for s, t in g.edges) for k, g in gold.items()}
    assert f"{score_captions(echo, gold).f1:.3f}" == "1.000"
    assert score_captions(reverse, gold).f1 == 0.0
    half = score_captions({"x": "A --> B\nC --> D"}, {"x": DirectedGraph.from_edges([("A", "B"), ("B", "C")])})
    assert (half.true_positives, half.false_positives, half.false_negatives) == (1, 1, 1)
    assert half.f1 == 0.5


def _digest(root):
    h = hashlib.sha256()
    files = sorted(p for p in root.rglob("*") if p.is_file())
    for p in files:
        h.update(str(p.relative_to(root)).encode() + b"\0" + p.read_bytes())
    return h.hexdigest(), len(files)


@pytest.mark.criterion(11, "two generate runs with identical flags are byte-identical")
def test_ac11_determinism(tmp_path, detail):
    flags = ["--total", "1000", "--seed", "11", "--queries", "20", "--noniso", "20"]
    assert main(["generate", "--out", str(tmp_path / "a"), *flags]) == 0
    assert main(["generate", "--out", str(tmp_path / "b"), *flags]) == 0
    da, na = _digest(tmp_path / "a")
    db, nb = _digest(tmp_path / "b")
    detail(f"{na} files, sha256 {da[:12]}")
    assert (da, na) == (db, nb)
    meta = json.loads((tmp_path / "a" / "dataset.meta.json").read_text())
    assert meta["counts"] == {"train": 900, "test": 100, "query": 20, "heldout-noniso": 20}


@pytest.mark.criterion(12, "every heldout-noniso key is absent from the train key set")
def test_ac12_noniso_split(desk_manifest, tmp_path, detail):
    desk_manifest.write(tmp_path)
    m = DatasetManifest.load(tmp_path)
    train_keys = {s.unlabeled_undirected_key for s in m.split("train")}
    held = m.split("heldout-noniso")
    assert len(held) == 500
    for s in held:
        assert s.unlabeled_undirected_key not in train_keys
        assert unlabeled_undirected_key(s.graph) == s.unlabeled_undirected_key
    # frozen from a run of the builder on this manifest; a regression fixture, not ground truth
    with pytest.raises(ExhaustedAttempts) as info:
        build_noniso_split(m, 500, 1000)
    assert info.value.found == NONISO_FOUND_IN_1000_ATTEMPTS
    detail(f"{len(held)} held-out vs {len(train_keys)} train structures")
