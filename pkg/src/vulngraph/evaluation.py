"""Repeated-split evaluation protocol and feature/edge-type ablations."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .cpg import Cpg
from .gat.train import evaluate, train
from .metrics import METRIC_NAMES, RunMetrics
from .pipeline import FeatureModel, featurize, fit_feature_model

log = logging.getLogger(__name__)

HELD_OUT_FRACTION = 0.1

ABLATIONS = [
    ("sem.+strct.*", "both", True),
    ("sem.*", "semantic", True),
    ("struct.*", "structural", True),
    ("sem.+strct.†", "both", False),
    ("sem.†", "semantic", False),
    ("struct.†", "structural", False),
]


def _quotas(total: int, class_sizes: dict[int, int]) -> dict[int, int]:
    """Split ``total`` across classes in proportion, by largest remainder, then
    make sure every class with at least three members gets one slot."""
    n = sum(class_sizes.values())
    exact = {c: total * k / n for c, k in class_sizes.items()}
    quota = {c: int(np.floor(v)) for c, v in exact.items()}
    left = total - sum(quota.values())
    for c in sorted(exact, key=lambda c: (-(exact[c] - quota[c]), c))[:left]:
        quota[c] += 1
    if total >= len(class_sizes):
        for c, k in sorted(class_sizes.items()):
            if quota[c] == 0 and k >= 3:
                donor = max(quota, key=lambda d: (quota[d], -d))
                quota[donor] -= 1
                quota[c] += 1
    return quota


def split(labels: Sequence[int], seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified, seeded 80/10/10 split of sample indices.

    Validation and test each receive floor(0.1 n) samples; the remainder trains.
    """
    labels = np.asarray(labels).astype(int)
    n = len(labels)
    if n < 10:
        raise ValueError("need at least 10 samples to split")
    rng = np.random.default_rng(seed)
    held = int(np.floor(HELD_OUT_FRACTION * n))
    pools = {c: list(rng.permutation(np.flatnonzero(labels == c))) for c in sorted(set(labels.tolist()))}
    sizes = {c: len(p) for c, p in pools.items()}
    parts = []
    for _ in range(2):  # validation, then test
        quota = _quotas(held, {c: len(p) for c, p in pools.items()})
        part = []
        for c in sorted(pools):
            take = min(quota[c], len(pools[c]) - 1 if sizes[c] > 1 else len(pools[c]))
            part.extend(pools[c][:take])
            pools[c] = pools[c][take:]
        parts.append(part)
    # quotas clipped above can leave a held-out part short; refill from the largest class
    for part in parts:
        while len(part) < held:
            c = max(pools, key=lambda c: (len(pools[c]), -c))
            part.append(pools[c].pop(0))
    train_idx = [i for c in sorted(pools) for i in pools[c]]
    train_idx, val_idx, test_idx = (rng.permutation(np.asarray(x, dtype=np.int64)) for x in (train_idx, *parts))
    if len(set(labels[train_idx].tolist())) < 2:
        raise ValueError("training split must contain both classes")
    return train_idx, val_idx, test_idx


@dataclass
class RunResult:
    run: int
    seed: int
    metrics: RunMetrics


def run_once(
    graphs: Sequence[Cpg],
    cfg: PipelineConfig,
    seed: int,
    modality: str = "both",
    use_edge_types: bool = True,
    feature_model: FeatureModel | None = None,
) -> RunMetrics:
    labels = [g.label for g in graphs]
    if any(y not in (0, 1) for y in labels):
        raise ValueError("every graph needs a 0/1 label for evaluation")
    tr, va, te = split(labels, seed)
    train_graphs = [graphs[i] for i in tr]
    fm = feature_model or fit_feature_model(train_graphs, cfg.walk, cfg.embedding, seed)
    inputs = featurize(graphs, fm, seed, modality)
    train_set = [(inputs[i], labels[i]) for i in tr]
    val_set = [(inputs[i], labels[i]) for i in va]
    test_set = [(inputs[i], labels[i]) for i in te]
    model_cfg = replace(cfg.model, seed=seed, use_edge_types=use_edge_types)
    params, _ = train(train_set, val_set, model_cfg, cfg.train, np.random.default_rng(seed))
    return evaluate(params, test_set)


@dataclass
class ProtocolSummary:
    mean: dict[str, float]
    std: dict[str, float]
    best: dict[str, float]
    n_runs: int

    def as_dict(self) -> dict:
        return {"n_runs": self.n_runs, "std_kind": "population", "mean": self.mean,
                "std": self.std, "best": self.best}


def summarize(metrics: Sequence[RunMetrics]) -> ProtocolSummary:
    if not metrics:
        raise ValueError("no runs to summarize")
    table = {name: np.array([getattr(m, name) for m in metrics], dtype=np.float64) for name in METRIC_NAMES}
    return ProtocolSummary(
        mean={k: float(np.mean(v)) for k, v in table.items()},
        std={k: float(np.std(v)) for k, v in table.items()},
        best={k: float(np.max(v)) for k, v in table.items()},
        n_runs=len(metrics),
    )


def _run_job(args):
    graphs, cfg, seed, modality, use_edge_types, fm = args
    return run_once(graphs, cfg, seed, modality, use_edge_types, fm)


def run_protocol(
    graphs: Sequence[Cpg],
    cfg: PipelineConfig,
    n_runs: int | None = None,
    base_seed: int | None = None,
    modality: str = "both",
    use_edge_types: bool = True,
    jobs: int = 1,
) -> tuple[ProtocolSummary, list[RunResult]]:
    """Run ``n_runs`` independent split/embed/train/test cycles; run i uses seed base_seed + i."""
    n_runs = cfg.protocol.n_runs if n_runs is None else n_runs
    base_seed = cfg.protocol.base_seed if base_seed is None else base_seed
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    shared = None
    if cfg.protocol.reuse_embeddings:
        log.warning("reuse_embeddings: embeddings fit once on all graphs (not leakage-free)")
        shared = fit_feature_model(graphs, cfg.walk, cfg.embedding, base_seed)
    jobs_args = [(graphs, cfg, base_seed + i, modality, use_edge_types, shared) for i in range(n_runs)]
    if jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(_run_job, jobs_args))
    else:
        metrics = [_run_job(a) for a in jobs_args]
    results = [RunResult(i, base_seed + i, m) for i, m in enumerate(metrics)]
    return summarize(metrics), results


def ablation_suite(
    graphs: Sequence[Cpg], cfg: PipelineConfig, n_runs: int | None = None,
    base_seed: int | None = None, jobs: int = 1,
) -> dict[str, ProtocolSummary]:
    """Six modality x edge-type configurations, keyed by a short configuration label."""
    out = {}
    for name, modality, edges in ABLATIONS:
        out[name], _ = run_protocol(graphs, cfg, n_runs, base_seed, modality, edges, jobs)
    return out


def runs_csv(results: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "seed", *METRIC_NAMES])
    for r in results:
        w.writerow([r.run, r.seed, *(f"{getattr(r.metrics, k):.10f}" for k in METRIC_NAMES)])
    return buf.getvalue()


def summary_json(summary: ProtocolSummary, config: dict | None = None) -> str:
    doc = summary.as_dict()
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
