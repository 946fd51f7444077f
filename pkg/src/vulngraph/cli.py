"""Command line entry point: ``vulngraph <subcommand> ...``.

Exit codes: 0 on success, 1 on validation errors (bad input, bad config,
missing artifacts), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_keys, load_config
from .cpg import CpgError, filter_dataset, load_jsonl, validate, write_jsonl
from .embedding import (
    build_features, load_embeddings, load_feature_cache, save_embeddings, save_feature_cache,
)
from .evaluation import ablation_suite, run_protocol, runs_csv, split, summary_json
from .explain import explain, render
from .frontend import LexError, ParseError, build_cpg
from .gat import checkpoint
from .gat.model import NonFiniteError
from .gat.train import predict, train
from .pipeline import FeatureModel, featurize, fit_feature_model, graph_key, graph_walks, to_graph_input
from .synthetic import synthetic_dataset
from .walks import write_walks

log = logging.getLogger("vulngraph")

CHECKPOINT = "checkpoint.bin"
HISTORY = "history.csv"
SEMANTIC_VEC = "semantic.vec"
STRUCTURAL_VEC = "structural.vec"
FEATURES = "features.bin"


class ValidationError(Exception):
    pass


class MissingArtifact(ValidationError):
    def __init__(self, path, producer: str):
        super().__init__(f"missing {path}; run `vulngraph {producer}` first to produce it")


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(path, producer)
    return path


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _overrides(args) -> dict:
    out = {}
    for item in (args.set or []) + (getattr(args, "set_after", None) or []):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = _parse_value(value)
    if args.seed is not None:
        out["protocol.base_seed"] = args.seed
    return out


def _config(args) -> PipelineConfig:
    try:
        return load_config(args.config, _overrides(args))
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"config: {exc}") from exc


def _load_graphs(path, cfg: PipelineConfig | None = None, labelled: bool = False):
    graphs, summary = load_jsonl(path)
    for err in summary.record_errors + summary.rejected:
        log.warning("%s: %s", path, err)
    if summary.dropped_edges:
        log.warning("%s: dropped %d edges with unknown types", path, summary.dropped_edges)
    if cfg is not None:
        graphs, report = filter_dataset(graphs, cfg.filter.max_nodes)
        if report.dropped:
            log.info("filter dropped %d oversized and %d CFG-less graphs",
                     report.dropped_size, report.dropped_no_cfg)
    if not graphs:
        raise ValidationError(f"{path}: no usable graphs")
    if labelled and any(g.label not in (0, 1) for g in graphs):
        raise ValidationError(f"{path}: every graph needs a 0/1 label")
    return graphs


DEFAULT_DIRS = {"embed": "embeddings", "train": "model", "explain": "explanations",
                "evaluate": "evaluation", "ablate": "ablation"}


def _resolve_dirs(args, cfg: PipelineConfig) -> None:
    """Fill unset directory arguments from ``paths.work_dir``."""
    work = Path(cfg.paths.work_dir)
    if getattr(args, "output", "-") is None and args.command in DEFAULT_DIRS:
        args.output = str(work / DEFAULT_DIRS[args.command])
    if getattr(args, "embeddings", "-") is None:
        args.embeddings = str(work / DEFAULT_DIRS["embed"])
    if getattr(args, "model", "-") is None:
        args.model = str(work / DEFAULT_DIRS["train"])


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_config(out: Path, cfg: PipelineConfig) -> None:
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _feature_model(emb_dir: Path, cfg: PipelineConfig) -> FeatureModel:
    sem = load_embeddings(_require(emb_dir / SEMANTIC_VEC, "embed"))
    strc = load_embeddings(_require(emb_dir / STRUCTURAL_VEC, "embed"))
    return FeatureModel(sem, strc, cfg.walk)


def _check_dims(fm: FeatureModel, in_dim: int) -> None:
    if fm.in_dim != in_dim:
        raise ValidationError(f"embeddings give {fm.in_dim} features but the model expects {in_dim}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_cpg(args, cfg) -> int:
    graphs, failed = [], 0
    for src in args.inputs:
        try:
            g = build_cpg(Path(src).read_text(encoding="utf-8"))
        except (LexError, ParseError, CpgError, OSError) as exc:
            print(f"{src}: {exc}", file=sys.stderr)
            failed += 1
            continue
        graphs.append(g.with_label(args.label) if args.label is not None else g)
    write_jsonl(args.output, graphs)
    print(f"wrote {len(graphs)} graph(s) to {args.output}")
    return 1 if failed else 0


def cmd_synth(args, cfg) -> int:
    graphs = synthetic_dataset(args.vulnerable, args.safe, cfg.protocol.base_seed)
    write_jsonl(args.output, graphs)
    print(f"wrote {len(graphs)} graph(s) to {args.output}")
    return 0


def cmd_ingest_validate(args, cfg) -> int:
    graphs, summary = load_jsonl(args.input)
    problems = 0
    bad_records = summary.record_errors + summary.rejected
    for err in bad_records:
        print(str(err), file=sys.stderr)
        problems += 1
    for g in graphs:
        for v in validate(g):
            print(f"{g.function_name}: {v.invariant}: {v.detail} {list(v.ids)}", file=sys.stderr)
            problems += 1
    kept, report = filter_dataset(graphs, cfg.filter.max_nodes)
    doc = {
        "records": len(graphs) + len(bad_records),
        "parsed": len(graphs),
        "record_errors": len(bad_records),
        "dropped_edges": summary.dropped_edges,
        "violations": problems - len(bad_records),
        "kept": len(kept),
        "dropped_size": report.dropped_size,
        "dropped_no_cfg": report.dropped_no_cfg,
    }
    print(json.dumps(doc, sort_keys=True))
    if args.output:
        write_jsonl(args.output, kept)
    return 1 if problems else 0


def cmd_walk(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg)
    walks = graph_walks(graphs, cfg.walk, cfg.protocol.base_seed)
    write_walks(args.output, walks, cfg.walk.length, cfg.walk.walks_per_node, cfg.protocol.base_seed)
    print(f"wrote {sum(map(len, walks))} walks for {len(graphs)} graph(s) to {args.output}")
    return 0


def cmd_embed(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg)
    out = _out_dir(args.output)
    seed = cfg.protocol.base_seed
    # walks are regenerated from the seed; the walk file carries no graph attribution
    walks = graph_walks(graphs, cfg.walk, seed)
    fm = fit_feature_model(graphs, cfg.walk, cfg.embedding, seed, walks)
    save_embeddings(out / SEMANTIC_VEC, fm.semantic)
    save_embeddings(out / STRUCTURAL_VEC, fm.structural)
    feats = {}
    for i, (g, ws) in enumerate(zip(graphs, walks)):
        feats[graph_key(i, g)] = build_features(g, ws, fm.semantic, fm.structural, cfg.walk.attribution).fused
    save_feature_cache(out / FEATURES, feats)
    _write_config(out, cfg)
    print(f"wrote {SEMANTIC_VEC}, {STRUCTURAL_VEC} and {FEATURES} ({len(feats)} graphs) to {out}")
    return 0


def cmd_train(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg, labelled=True)
    cache = load_feature_cache(_require(Path(args.embeddings) / FEATURES, "embed"))
    missing = [graph_key(i, g) for i, g in enumerate(graphs) if graph_key(i, g) not in cache]
    if missing:
        raise ValidationError(f"feature cache lacks {len(missing)} graph(s) (e.g. {missing[0]}); "
                              "rerun `vulngraph embed` on the same input")
    inputs = [to_graph_input(g, cache[graph_key(i, g)]) for i, g in enumerate(graphs)]
    if inputs[0].x.shape[1] != cfg.model.in_dim:
        raise ValidationError(f"cached features have width {inputs[0].x.shape[1]}, model.in_dim is {cfg.model.in_dim}")
    seed = cfg.protocol.base_seed
    t = cfg.train
    print(f"effective hyperparameters: lr={t.lr:g} batch={t.batch_size} patience={t.early_stop_patience} "
          f"halve_patience={t.lr_halve_patience} weight_decay={t.weight_decay:g} max_epochs={t.max_epochs} "
          f"loss={t.loss} seed={seed}")
    labels = [g.label for g in graphs]
    tr, va, _ = split(labels, seed)
    train_set = [(inputs[i], labels[i]) for i in tr]
    val_set = [(inputs[i], labels[i]) for i in va]
    model_cfg = replace(cfg.model, seed=seed)
    params, history = train(train_set, val_set, model_cfg, t, np.random.default_rng(seed))
    out = _out_dir(args.output)
    digest = checkpoint.save(out / CHECKPOINT, params, {"config": cfg.to_dict(), "best_epoch": history.best_epoch})
    history.write_csv(out / HISTORY)
    _write_config(out, cfg)
    print(f"best epoch {history.best_epoch}; wrote {CHECKPOINT} (sha256 {digest[:16]}) and {HISTORY} to {out}")
    return 0


def _load_model(model_dir: Path):
    try:
        return checkpoint.load(_require(model_dir / CHECKPOINT, "train"))
    except checkpoint.CheckpointError as exc:
        raise ValidationError(f"{model_dir / CHECKPOINT}: {exc}") from exc


def cmd_predict(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg)
    params, _ = _load_model(Path(args.model))
    fm = _feature_model(Path(args.embeddings), cfg)
    _check_dims(fm, params.config.in_dim)
    inputs = featurize(graphs, fm, cfg.protocol.base_seed)
    lines = ["function,predicted,p_vulnerable,label"]
    for g, x in zip(graphs, inputs):
        label, probs = predict(params, x)
        lines.append(f"{g.function_name},{label},{probs[1]:.10f},{'' if g.label is None else g.label}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_explain(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg)
    if args.function:
        graphs = [g for g in graphs if g.function_name == args.function]
        if not graphs:
            raise ValidationError(f"no graph named {args.function!r} in {args.input}")
    model_dir = Path(args.model)
    params, _ = _load_model(model_dir)
    digest = checkpoint.file_digest(model_dir / CHECKPOINT)
    fm = _feature_model(Path(args.embeddings), cfg)
    _check_dims(fm, params.config.in_dim)
    inputs = featurize(graphs, fm, cfg.protocol.base_seed)
    out = _out_dir(args.output)
    ecfg = cfg.explain
    k = args.k or ecfg.k
    provenance = {"checkpoint_sha256": digest, "config": cfg.to_dict()}
    names = [g.function_name for g in graphs]
    for i, (g, x) in enumerate(zip(graphs, inputs)):
        expl = explain(params, x, g, k, ecfg.target, None if ecfg.normalize == "none" else ecfg.normalize)
        # repeated function names get their position appended so files do not collide
        stem = g.function_name if names.count(g.function_name) == 1 else f"{g.function_name}.{i}"
        (out / f"{stem}.expl.json").write_bytes(render(expl, g, "json", provenance))
        if args.dot:
            (out / f"{stem}.dot").write_bytes(render(expl, g, "dot"))
    print(f"wrote {len(graphs)} explanation(s) to {out}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg, labelled=True)
    n_runs = args.runs or cfg.protocol.n_runs
    summary, results = run_protocol(graphs, cfg, n_runs, cfg.protocol.base_seed, jobs=args.jobs)
    out = _out_dir(args.output)
    (out / "runs.csv").write_text(runs_csv(results))
    (out / "summary.json").write_text(summary_json(summary, cfg.to_dict()))
    print(f"{n_runs} run(s): mean f1={summary.mean['f1']:.4f} accuracy={summary.mean['accuracy']:.4f}; "
          f"wrote runs.csv and summary.json to {out}")
    return 0


def cmd_ablate(args, cfg) -> int:
    graphs = _load_graphs(args.input, cfg, labelled=True)
    n_runs = args.runs or cfg.protocol.n_runs
    table = ablation_suite(graphs, cfg, n_runs, cfg.protocol.base_seed, jobs=args.jobs)
    out = _out_dir(args.output)
    doc = {"config": cfg.to_dict(), "results": {name: s.as_dict() for name, s in table.items()}}
    (out / "ablation.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    for name, s in table.items():
        print(f"{name:14s} f1={s.mean['f1']:.4f}±{s.std['f1']:.4f} accuracy={s.mean['accuracy']:.4f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _shared_options(parser: argparse.ArgumentParser, after: bool) -> argparse.ArgumentParser:
    def default(value):
        return argparse.SUPPRESS if after else value

    parser.add_argument("--config", default=default(None), help="JSON config file")
    parser.add_argument("--set", action="append", dest="set_after" if after else "set",
                        default=default(None), metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--seed", type=int, default=default(None), help="base seed (overrides protocol.base_seed)")
    parser.add_argument("--jobs", type=int, default=default(1), help="maximum parallel workers")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))
    return parser


def build_parser() -> argparse.ArgumentParser:
    epilog = "configuration keys (override with --set key=value):\n  " + "\n  ".join(config_keys())
    # shared options are accepted before or after the subcommand; the copy on
    # the subcommands suppresses its defaults so it cannot clobber values
    # already parsed by the main parser
    common = _shared_options(argparse.ArgumentParser(add_help=False), after=False)
    common_sub = _shared_options(argparse.ArgumentParser(add_help=False), after=True)

    p = argparse.ArgumentParser(
        prog="vulngraph", description=__doc__, epilog=epilog, parents=[common],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, parents=[common_sub], epilog=epilog,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        return sp

    sp = add("build-cpg", cmd_build_cpg, "build CPG-JSONL from single-function C files")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--label", type=int, choices=(0, 1), help="label to attach to every graph")

    sp = add("synth", cmd_synth, "write the synthetic labelled corpus")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--vulnerable", type=int, default=10)
    sp.add_argument("--safe", type=int, default=10)

    sp = add("ingest-validate", cmd_ingest_validate, "check a CPG-JSONL file and apply the dataset filter")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="write the graphs that pass the filter")

    sp = add("walk", cmd_walk, "generate metapath walks")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", required=True)

    sp = add("embed", cmd_embed, "train both embedding channels and cache node features")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="output directory (default under paths.work_dir)")

    sp = add("train", cmd_train, "train the classifier")
    sp.add_argument("input")
    sp.add_argument("--embeddings", help="directory written by embed")
    sp.add_argument("-o", "--output", help="output directory (default under paths.work_dir)")

    sp = add("predict", cmd_predict, "classify graphs with a trained checkpoint")
    sp.add_argument("input")
    sp.add_argument("--model", help="directory written by train")
    sp.add_argument("--embeddings", help="directory written by embed")
    sp.add_argument("-o", "--output", help="CSV path (default: stdout)")

    sp = add("explain", cmd_explain, "rank the nodes and edges behind each prediction")
    sp.add_argument("input")
    sp.add_argument("--model", help="directory written by train")
    sp.add_argument("--embeddings", help="directory written by embed")
    sp.add_argument("--function", help="only explain this function")
    sp.add_argument("-k", type=int, help="entries to keep (default explain.k)")
    sp.add_argument("--dot", action="store_true", help="also write a Graphviz file")
    sp.add_argument("-o", "--output", help="output directory (default under paths.work_dir)")

    sp = add("evaluate", cmd_evaluate, "repeated split/train/test protocol")
    sp.add_argument("input")
    sp.add_argument("--runs", type=int, help="number of runs (default protocol.n_runs)")
    sp.add_argument("-o", "--output", help="output directory (default under paths.work_dir)")

    sp = add("ablate", cmd_ablate, "feature and edge-type ablations")
    sp.add_argument("input")
    sp.add_argument("--runs", type=int, help="runs per configuration (default protocol.n_runs)")
    sp.add_argument("-o", "--output", help="output directory (default under paths.work_dir)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        cfg = _config(args)
        _resolve_dirs(args, cfg)
        return args.func(args, cfg)
    except (ValidationError, CpgError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteError, FloatingPointError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
