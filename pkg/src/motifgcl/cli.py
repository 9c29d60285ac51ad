"""Command-line pipeline driver.

Every stage reads and writes plain files in the run directory, so stages can
be rerun, inspected, and tested independently. Outputs are deterministic for
a fixed config+seed; each command drops a manifest carrying the config hash.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, config_hash, load_config
from .errors import ConfigError, InputDataError, PipelineError
from .evaluate import logistic_eval_repeated, make_splits, mlknn_eval
from .graphs import (LabelSet, SparseGraph, load_directed_edge_list,
                     load_edge_list, load_features, load_labels)
from .motifs import cooccurrence, enumerate_instances
from .semantic import SemanticGraphSet, build_semantic_graphs
from .synth import generate
from .training import train
from .views import ppr_diffusion

log = logging.getLogger(__name__)


def _write_manifest(out: Path, command: str, cfg: PipelineConfig) -> None:
    payload = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
    }
    with open(out / f"manifest_{command}.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _manifest_matches(out: Path, command: str, cfg: PipelineConfig) -> bool:
    path = out / f"manifest_{command}.json"
    if not path.exists():
        return False
    with open(path) as fh:
        payload = json.load(fh)
    return payload.get("config_hash") == config_hash(cfg)


def _load_dataset(cfg: PipelineConfig) -> tuple[SparseGraph, np.ndarray, LabelSet | None]:
    if not cfg.dataset.edges or not cfg.dataset.features:
        raise ConfigError("dataset.edges and dataset.features must be set")
    x = load_features(cfg.dataset.features)
    n = cfg.dataset.num_nodes or x.shape[0]
    if x.shape[0] != n:
        raise InputDataError(
            f"feature rows ({x.shape[0]}) disagree with num_nodes ({n})")
    g = load_edge_list(cfg.dataset.edges, n)
    labels = load_labels(cfg.dataset.labels) if cfg.dataset.labels else None
    if labels is not None and len(labels) != n:
        raise InputDataError(f"label rows ({len(labels)}) disagree with node count ({n})")
    return g, x, labels


def _save_matrix_csv(path: Path, mat: np.ndarray) -> None:
    np.savetxt(path, mat, delimiter=",", fmt="%.17g")


def _semantic_file(out: Path, name: str) -> Path:
    return out / f"semantic_{name.replace('/', '_')}.txt"


def _write_semantic_graphs(out: Path, sg: SemanticGraphSet) -> None:
    for name, graph in zip(sg.motif_names, sg.graphs):
        # row-wise top-k graphs are asymmetric: dump every stored entry
        graph.write_edge_list(_semantic_file(out, name), undirected=False)


def _load_semantic_graphs(out: Path, cfg: PipelineConfig, n: int) -> SemanticGraphSet:
    patterns = cfg.motif_patterns()
    graphs = tuple(
        load_directed_edge_list(_semantic_file(out, p.name), n) for p in patterns)
    return SemanticGraphSet(graphs, cfg.semantic.top_k, tuple(p.name for p in patterns))


def cmd_synth(cfg: PipelineConfig, out: Path) -> int:
    synth_cfg = dataclasses.replace(cfg.synth, seed=cfg.seed)
    g, x, labels = generate(synth_cfg)
    g.write_edge_list(out / "edges.txt")
    _save_matrix_csv(out / "features.csv", x)
    with open(out / "labels.csv", "w") as fh:
        for row in labels.labels:
            fh.write(",".join(str(c) for c in row) + "\n")
    _write_manifest(out, "synth", cfg)
    print(f"synthetic graph: {g.n} nodes, {g.nnz // 2} edges, "
          f"{labels.num_classes} communities -> {out}")
    return 0


def cmd_mine(cfg: PipelineConfig, out: Path, dump_instances: bool = False) -> int:
    g, x, _ = _load_dataset(cfg)
    rows = []
    for pattern in cfg.motif_patterns():
        inst = enumerate_instances(g, pattern)
        counts = cooccurrence(inst, g)
        counts.write_edge_list(out / f"cooc_{pattern.name}.txt")
        if dump_instances:
            with open(out / f"instances_{pattern.name}.csv", "w") as fh:
                for tup in inst.instances:
                    fh.write(",".join(str(v) for v in tup) + "\n")
        rows.append((pattern.name, len(inst)))
        print(f"{pattern.name}: {len(inst)}")
    with open(out / "motif_counts.csv", "w") as fh:
        fh.write("motif,instances\n")
        for name, count in rows:
            fh.write(f"{name},{count}\n")
    _write_manifest(out, "mine", cfg)
    return 0


def _preprocess(cfg: PipelineConfig, out: Path,
                g: SparseGraph, x: np.ndarray) -> SemanticGraphSet:
    sg = build_semantic_graphs(g, x, cfg.motif_patterns(), cfg.semantic.top_k)
    _write_semantic_graphs(out, sg)
    diffusion = ppr_diffusion(g, cfg.view.ppr_alpha, cfg.view.dense_solve_limit,
                              cfg.view.sparsify_threshold)
    if isinstance(diffusion, SparseGraph):
        diffusion.write_edge_list(out / "diffusion.txt", undirected=False)
    else:
        np.save(out / "diffusion.npy", diffusion)
    _write_manifest(out, "preprocess", cfg)
    return sg


def cmd_preprocess(cfg: PipelineConfig, out: Path) -> int:
    g, x, _ = _load_dataset(cfg)
    sg = _preprocess(cfg, out, g, x)
    for name, graph in zip(sg.motif_names, sg.graphs):
        print(f"semantic graph {name}: {graph.nnz} entries (k={sg.k})")
    return 0


def cmd_build_semantic(cfg: PipelineConfig, out: Path) -> int:
    """Semantic graphs only (no diffusion); one weighted edge list per motif."""
    g, x, _ = _load_dataset(cfg)
    sg = build_semantic_graphs(g, x, cfg.motif_patterns(), cfg.semantic.top_k)
    _write_semantic_graphs(out, sg)
    _write_manifest(out, "build-semantic", cfg)
    for name, graph in zip(sg.motif_names, sg.graphs):
        print(f"semantic graph {name}: {graph.nnz} entries (k={sg.k})")
    return 0


def _trace_csv(path: Path, trace: list[dict]) -> None:
    num_semantic = len(trace[0]["semantic"]) if trace else 0
    header = ["step", "lr", "L_holistic", "L_combine"]
    header += [f"L_semantic_{i + 1}" for i in range(num_semantic)]
    header.append("total")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in trace:
            cells = [str(row["step"]), f"{row['lr']:.17g}",
                     f"{row['holistic']:.17g}", f"{row['combine']:.17g}"]
            cells += [f"{s:.17g}" for s in row["semantic"]]
            cells.append(f"{row['total']:.17g}")
            fh.write(",".join(cells) + "\n")


def cmd_train(cfg: PipelineConfig, out: Path) -> int:
    from .model import save_params

    g, x, _ = _load_dataset(cfg)
    if _manifest_matches(out, "preprocess", cfg):
        sg = _load_semantic_graphs(out, cfg, g.n)
        log.info("reusing preprocessed semantic graphs from %s", out)
    else:
        sg = _preprocess(cfg, out, g, x)
    model_cfg = cfg.model_config(x.shape[1], len(sg.graphs))
    result = train(g, x, sg, model_cfg, cfg.train_config())
    _save_matrix_csv(out / "embeddings.csv", result.embeddings)
    _trace_csv(out / "loss_trace.csv", result.trace)
    save_params(result.online, out / "params_online")
    save_params(result.target, out / "params_target")
    _write_manifest(out, "train", cfg)
    print(f"trained {cfg.train.n_total} steps; final loss "
          f"{result.trace[-1]['total']:.6f}; embeddings -> {out / 'embeddings.csv'}")
    return 0


def cmd_eval(cfg: PipelineConfig, out: Path, embeddings: str, labels: str,
             mode: str | None = None) -> int:
    z = load_features(embeddings)
    label_set = load_labels(labels)
    if len(label_set) != z.shape[0]:
        raise InputDataError("embeddings and labels disagree on node count")
    mode = mode or cfg.eval.mode
    if mode == "logistic":
        mean, std, accs = logistic_eval_repeated(
            z, label_set, repeats=cfg.eval.repeats, seed=cfg.seed)
        with open(out / "eval_logistic.csv", "w") as fh:
            fh.write("metric,value\n")
            fh.write(f"mean_accuracy,{mean:.17g}\n")
            fh.write(f"std_accuracy,{std:.17g}\n")
            for i, acc in enumerate(accs):
                fh.write(f"split_{i},{acc:.17g}\n")
        print(f"logistic accuracy: {mean:.4f} +/- {std:.4f} over {cfg.eval.repeats} splits")
    elif mode == "mlknn":
        split = make_splits(z.shape[0], cfg.seed)
        heat = mlknn_eval(z, label_set, split, k_nn=cfg.eval.knn,
                          smoothing=cfg.eval.smoothing,
                          exact_match=cfg.eval.exact_match)
        _save_matrix_csv(out / "heatmap.csv", heat)
        off = heat[~np.eye(heat.shape[0], dtype=bool)]
        print(f"mlknn heatmap -> {out / 'heatmap.csv'} "
              f"(mean diagonal {np.nanmean(np.diag(heat)):.4f}, "
              f"mean off-diagonal {np.nanmean(off):.4f})")
    else:
        raise ConfigError(f"unknown eval mode {mode!r}")
    _write_manifest(out, "eval", cfg)
    return 0


ABLATION_VARIANTS = (
    "full",
    "uniform_w",
    "no_slow",
    "no_semantic_graphs",
    "topk_only",
    "no_L_semantic",
    "no_L_holistic",
)


def ablation_accuracy(cfg: PipelineConfig, z: np.ndarray, labels: LabelSet) -> float:
    """One summary number per trained variant: logistic mean accuracy for
    single-label data, exact-set-match rate under the multilabel kNN else."""
    if cfg.eval.mode == "logistic":
        mean, _, _ = logistic_eval_repeated(z, labels, repeats=cfg.eval.repeats,
                                            seed=cfg.seed)
        return mean
    split = make_splits(z.shape[0], cfg.seed)
    heat = mlknn_eval(z, labels, split, k_nn=cfg.eval.knn,
                      smoothing=cfg.eval.smoothing, exact_match=cfg.eval.exact_match)
    return float(np.nanmean(heat))


def cmd_ablate(cfg: PipelineConfig, out: Path) -> int:
    g, x, labels = _load_dataset(cfg)
    if labels is None:
        raise ConfigError("ablation needs dataset.labels for its accuracy column")
    base_ablation = dataclasses.replace(
        cfg.ablation, uniform_w=False, no_slow=False, no_semantic_graphs=False,
        topk_only=False, no_L_semantic=False, no_L_holistic=False)
    base_cfg = dataclasses.replace(cfg, ablation=base_ablation)
    sg = build_semantic_graphs(g, x, base_cfg.motif_patterns(), base_cfg.semantic.top_k)
    model_cfg = base_cfg.model_config(x.shape[1], len(sg.graphs))

    rows = []
    for variant in ABLATION_VARIANTS:
        ablation = base_ablation if variant == "full" else dataclasses.replace(
            base_ablation, **{variant: True})
        variant_cfg = dataclasses.replace(base_cfg, ablation=ablation)
        result = train(g, x, sg, model_cfg, variant_cfg.train_config())
        acc = ablation_accuracy(variant_cfg, result.embeddings, labels)
        _save_matrix_csv(out / f"embeddings_{variant}.csv", result.embeddings)
        rows.append((variant, acc))
        print(f"{variant}: {acc:.4f}")
    with open(out / "ablation.csv", "w") as fh:
        fh.write("variant,accuracy\n")
        for variant, acc in rows:
            fh.write(f"{variant},{acc:.17g}\n")
    _write_manifest(out, "ablate", cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motifgcl",
        description="Motif-based semantic graphs and negative-free contrastive "
                    "node embeddings: preprocess, train, evaluate, ablate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML config file")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--out", default=None, help="override config out_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common],
                   help="generate a synthetic overlapping-community dataset")
    mine = sub.add_parser("mine", parents=[common],
                          help="enumerate motif instances and co-occurrence counts")
    mine.add_argument("--dump-instances", action="store_true",
                      help="also write one CSV of matched node tuples per motif")
    sub.add_parser("preprocess", parents=[common],
                   help="build semantic graphs and the diffusion matrix")
    semantic = sub.add_parser("build-semantic", parents=[common],
                              help="build only the semantic graphs")
    semantic.add_argument("--k", type=int, default=None, help="override semantic.top_k")
    semantic.add_argument("--motifs", default=None,
                          help="comma-separated built-in motif names")
    sub.add_parser("train", parents=[common], help="run the contrastive training loop")
    evalp = sub.add_parser("eval", parents=[common],
                           help="evaluate frozen embeddings against labels")
    evalp.add_argument("--embeddings", required=True, help="embeddings CSV")
    evalp.add_argument("--labels", required=True, help="labels CSV")
    evalp.add_argument("--mode", choices=("logistic", "mlknn"), default=None)
    sub.add_parser("ablate", parents=[common],
                   help="train all ablation variants and tabulate accuracies")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config,
                          overrides={"seed": args.seed, "out_dir": args.out})
        if args.command == "build-semantic":
            if args.k is not None:
                cfg = dataclasses.replace(
                    cfg, semantic=dataclasses.replace(cfg.semantic, top_k=args.k))
            if args.motifs:
                from .config import MotifSection
                cfg = dataclasses.replace(cfg, motifs=tuple(
                    MotifSection(name=name.strip())
                    for name in args.motifs.split(",")))
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "synth":
            return cmd_synth(cfg, out)
        if args.command == "mine":
            return cmd_mine(cfg, out, dump_instances=args.dump_instances)
        if args.command == "preprocess":
            return cmd_preprocess(cfg, out)
        if args.command == "build-semantic":
            return cmd_build_semantic(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "eval":
            return cmd_eval(cfg, out, args.embeddings, args.labels, args.mode)
        if args.command == "ablate":
            return cmd_ablate(cfg, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except PipelineError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
