"""Linear probes on frozen embeddings: node existence, edge existence, edge direction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import DatasetManifest
from .embeddings import EmbeddingTable
from .errors import EmptyTaskData, NonConvergence
from .graph import LABEL_PAIRS, LABELS, DirectedGraph
from .seeding import derive_seed

KINDS = ("node-existence", "edge-existence", "edge-direction")


@dataclass(frozen=True, order=True)
class ProbeTask:
    kind: str
    subject: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown probe kind {self.kind!r}")
        arity = 1 if self.kind == "node-existence" else 2
        if len(self.subject) != arity:
            raise ValueError(f"{self.kind} needs {arity} label(s), got {self.subject!r}")
        if any(v not in LABELS for v in self.subject):
            raise ValueError(f"probe subject must use labels A-H, got {self.subject!r}")
        if arity == 2 and self.subject[0] == self.subject[1]:
            raise ValueError("pair elements must be distinct")
        if self.kind == "edge-existence":
            object.__setattr__(self, "subject", tuple(sorted(self.subject)))

    @property
    def name(self) -> str:
        if self.kind == "node-existence":
            return f"{self.kind}:{self.subject[0]}"
        sep = "-" if self.kind == "edge-existence" else "->"
        return f"{self.kind}:{self.subject[0]}{sep}{self.subject[1]}"

    def label(self, graph: DirectedGraph) -> bool | None:
        """Binary target for ``graph``, or None when the sample is excluded."""
        if self.kind == "node-existence":
            return self.subject[0] in graph.nodes
        a, b = self.subject
        if self.kind == "edge-existence":
            if a not in graph.nodes or b not in graph.nodes:
                return None
            return graph.has_edge(a, b) or graph.has_edge(b, a)
        if graph.has_edge(a, b):
            return True
        if graph.has_edge(b, a):
            return False
        return None


def all_probe_tasks() -> list[ProbeTask]:
    tasks = [ProbeTask("node-existence", (v,)) for v in LABELS]
    tasks += [ProbeTask("edge-existence", pair) for pair in LABEL_PAIRS]
    tasks += [ProbeTask("edge-direction", pair) for pair in itertools.permutations(LABELS, 2)]
    return tasks


def balanced_indices(labels: np.ndarray, seed: int) -> np.ndarray:
    """Indices of an exactly balanced subset: the majority class is undersampled without replacement."""
    labels = np.asarray(labels, dtype=bool)
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    m = min(len(pos), len(neg))
    rng = np.random.Generator(np.random.PCG64(seed))
    if len(pos) > m:
        pos = np.sort(rng.choice(pos, size=m, replace=False))
    if len(neg) > m:
        neg = np.sort(rng.choice(neg, size=m, replace=False))
    return np.sort(np.concatenate([pos, neg]))


def build_probe_dataset(task: ProbeTask, manifest: DatasetManifest, embeddings: EmbeddingTable,
                        balance_seed: int, split: str = "test", balance: bool = True):
    """Features and binary labels for ``task`` over one split, after exclusions and balancing."""
    ids, labels = [], []
    for s in manifest.samples:
        if s.split != split:
            continue
        y = task.label(s.graph)
        if y is None:
            continue
        ids.append(s.id)
        labels.append(y)
    y = np.array(labels, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise EmptyTaskData(f"{task.name} on {split}: {n_pos} positive / {len(y) - n_pos} negative")
    X = embeddings.rows(ids)
    if balance:
        keep = balanced_indices(y, derive_seed(balance_seed, "balance", *_task_ints(task), _split_int(split)))
        X, y = X[keep], y[keep]
    return X, y.astype(np.float64)


def _task_ints(task: ProbeTask) -> tuple[int, ...]:
    return (KINDS.index(task.kind),) + tuple(LABELS.index(v) for v in task.subject)


def _split_int(split: str) -> int:
    return {"train": 0, "test": 1, "query": 2, "heldout-noniso": 3}[split]


def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, reg_strength: float):
    """Mean logistic loss plus ``reg_strength / (2n) * |w|^2`` and its gradient.

    ``params`` is ``[w..., b]``; the bias is not penalized.
    """
    n = len(y)
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + reg_strength / (2 * n) * (w @ w)
    r = _sigmoid(z) - y
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r / n + reg_strength / n * w
    grad[-1] = r.mean()
    return loss, grad


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass
class LinearProbe:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    iterations: int = 0
    grad_norm: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        return ((np.asarray(X, dtype=float) - self.mean) / self.scale) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X) > 0

    def accuracy(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y, dtype=bool)))


def train_probe(features, labels, reg_strength: float = 1.0, tolerance: float = 1e-6,
                max_iter: int = 10_000) -> LinearProbe:
    """Fit an L2-regularized logistic regression by damped Newton steps.

    Features are standardized with the training mean/std, which are kept on the
    probe. Stops once the gradient norm is at most ``tolerance``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if min(int((y == 1).sum()), int((y == 0).sum())) < 2:
        raise ValueError("need at least two examples of each class")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    n, d = Z.shape
    Z1 = np.hstack([Z, np.ones((n, 1))])
    ridge = np.full(d + 1, reg_strength / n)
    ridge[-1] = 0.0
    params = np.zeros(d + 1)
    loss, grad = logistic_objective(params, Z, y, reg_strength)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > tolerance:
        if it >= max_iter:
            raise NonConvergence(f"gradient norm {gnorm:.3e} after {max_iter} iterations", gnorm)
        p = _sigmoid(Z1 @ params)
        hess = (Z1.T * (p * (1 - p))) @ Z1 / n + np.diag(ridge)
        hess[-1, -1] += 1e-12
        step = np.linalg.solve(hess, -grad)
        t = 1.0
        while True:
            new_loss, new_grad = logistic_objective(params + t * step, Z, y, reg_strength)
            if new_loss <= loss + 1e-4 * t * (grad @ step) or t < 1e-10:
                break
            t *= 0.5
        params = params + t * step
        loss, grad = new_loss, new_grad
        gnorm = float(np.linalg.norm(grad))
        it += 1
    return LinearProbe(params[:-1].copy(), float(params[-1]), mean, scale, it, gnorm)


@dataclass(frozen=True)
class ProbeConfig:
    reg_strength: float = 1.0
    tolerance: float = 1e-6
    max_iter: int = 10_000
    balance_seed: int = 0
    balance_train: bool = True
    balance_eval: bool = True
    train_split: str = "train"
    eval_split: str = "test"


@dataclass
class ProbeReport:
    per_task_accuracy: dict[ProbeTask, float]
    eval_sizes: dict[ProbeTask, int] = field(default_factory=dict)
    skipped: dict[ProbeTask, str] = field(default_factory=dict)

    def mean_accuracy(self, kind: str) -> float:
        accs = [a for t, a in self.per_task_accuracy.items() if t.kind == kind]
        return float(np.mean(accs)) if accs else float("nan")

    @property
    def means(self) -> dict[str, float]:
        return {kind: self.mean_accuracy(kind) for kind in KINDS}

    def coverage(self) -> dict[str, dict[str, int]]:
        total = {kind: 0 for kind in KINDS}
        for t in all_probe_tasks():
            total[t.kind] += 1
        done = {kind: sum(1 for t in self.per_task_accuracy if t.kind == kind) for kind in KINDS}
        return {kind: {"evaluated": done[kind], "total": total[kind]} for kind in KINDS}

    def to_dict(self) -> dict:
        return {
            "mean_accuracy": self.means,
            "coverage": self.coverage(),
            "per_task": [
                {"task": t.name, "kind": t.kind, "subject": list(t.subject),
                 "accuracy": a, "eval_size": self.eval_sizes.get(t)}
                for t, a in sorted(self.per_task_accuracy.items())
            ],
            "skipped": [{"task": t.name, "reason": r} for t, r in sorted(self.skipped.items())],
        }


def run_probing(manifest: DatasetManifest, embeddings: EmbeddingTable, config: ProbeConfig = ProbeConfig(),
                tasks: list[ProbeTask] | None = None) -> ProbeReport:
    """Fit one probe per task on the train split and score it on the test split."""
    report = ProbeReport({})
    for task in tasks or all_probe_tasks():
        try:
            Xtr, ytr = build_probe_dataset(task, manifest, embeddings, config.balance_seed,
                                           config.train_split, config.balance_train)
            Xte, yte = build_probe_dataset(task, manifest, embeddings, config.balance_seed,
                                           config.eval_split, config.balance_eval)
            probe = train_probe(Xtr, ytr, config.reg_strength, config.tolerance, config.max_iter)
        except EmptyTaskData as exc:
            report.skipped[task] = str(exc)
            continue
        except ValueError as exc:
            report.skipped[task] = f"{task.name}: {exc}"
            continue
        report.per_task_accuracy[task] = probe.accuracy(Xte, yte)
        report.eval_sizes[task] = len(yte)
    return report
