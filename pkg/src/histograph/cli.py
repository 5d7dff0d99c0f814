"""Command-line surface for the graph pipeline.

Subcommands: ``synth``, ``build-graph``, ``train``, ``eval``, ``explain``,
``render``. Exit codes are stable for scripting: 0 success, 2 validation or
usage error, 3 numeric failure, 4 I/O failure. ``HISTOGRAPH_SEED`` supplies
the seed when a command's ``--seed`` flag is omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import HistographError, NumericError
from .explain import Method, attention_scores, export_scores, occlusion_scores, read_scores
from .graph import (
    GraphBuildConfig,
    build_graph,
    load_graph,
    read_centroids_csv,
    save_graph,
    with_label,
    write_centroids_csv,
)
from .model import (
    Model,
    ModelSpec,
    TrainConfig,
    Variant,
    evaluate,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    train,
)
from .render import RenderConfig, render_svg
from .synth import SynthClass, dataset_configs, generate, read_manifest, write_manifest


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("HISTOGRAPH_SEED")
    return int(env) if env else 0


def _parse_features(spec: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in spec.split(",") if part.strip())


def _load_dataset(manifest_path: str, build_cfg: GraphBuildConfig):
    """Resolve manifest entries (centroid CSVs or graph JSONs) into graphs."""
    base = Path(manifest_path).parent
    dataset = []
    for rel_path, label in read_manifest(manifest_path):
        p = Path(rel_path)
        if not p.is_absolute():
            p = base / p
        if p.suffix.lower() == ".json":
            g = load_graph(p)
        else:
            g = build_graph(read_centroids_csv(p), build_cfg)
        dataset.append(with_label(g, label))
    return dataset


def cmd_build_graph(args) -> int:
    cfg = GraphBuildConfig(
        distance_threshold=args.threshold,
        feature_recipe=_parse_features(args.features),
    )
    g = build_graph(read_centroids_csv(args.input), cfg)
    save_graph(args.output, g)
    print(f"wrote {args.output}: {g.n_nodes} nodes, "
          f"{int((g.adjacency[:, :, 0] != 0).sum() // 2)} edges")
    return 0


def cmd_synth(args) -> int:
    classes = [SynthClass(c.strip()) for c in args.classes.split(",") if c.strip()]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = dataset_configs(
        classes, args.count_per_class, _resolve_seed(args.seed),
        n_min=args.n_min, n_max=args.n_max,
        jitter_min=args.jitter_min, jitter_max=args.jitter_max,
    )
    entries = []
    counters = {cls: 0 for cls in classes}
    for cfg, label in configs:
        records, _ = generate(cfg)
        cls = classes[label]
        name = f"{cls.value}_{counters[cls]:03d}.csv"
        counters[cls] += 1
        write_centroids_csv(out_dir / name, records)
        entries.append((name, label))
    write_manifest(out_dir / "manifest.csv", entries)
    print(f"wrote {len(entries)} centroid files and manifest.csv to {out_dir}")
    return 0


def cmd_train(args) -> int:
    build_cfg = GraphBuildConfig(
        distance_threshold=args.threshold,
        feature_recipe=_parse_features(args.features),
    )
    dataset = _load_dataset(args.manifest, build_cfg)
    seed = _resolve_seed(args.seed)
    n_classes = max(g.label for g in dataset) + 1
    spec = ModelSpec(
        variant=Variant(args.variant),
        in_features=dataset[0].n_features,
        n_classes=max(n_classes, 2),
        seed=seed,
    )
    model = Model(spec)
    print(f"{spec.variant.value}: {model.param_count()} parameters")
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, shuffle_seed=seed)
    result = train(model, dataset, cfg)
    for epoch, loss in enumerate(result.loss_curve, start=1):
        print(f"epoch {epoch}/{cfg.epochs} loss {loss:.6f}")
    report = evaluate(model, dataset)
    print(f"final train accuracy {report.accuracy:.4f}")
    save_checkpoint(result.checkpoint, args.out)
    print(f"wrote checkpoint {args.out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    build_cfg = GraphBuildConfig(
        distance_threshold=args.threshold,
        feature_recipe=_parse_features(args.features),
    )
    dataset = _load_dataset(args.manifest, build_cfg)
    report = evaluate(model, dataset)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_explain(args) -> int:
    g = load_graph(args.graph)
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    method = Method(args.method)
    if method is Method.OCCLUSION:
        imap = occlusion_scores(model, g, hops=args.hops, workers=args.workers)
    else:
        imap = attention_scores(model, g)
    export_scores(imap, args.out)
    print(f"wrote {args.out} ({method.value}, target class {imap.target_class})")
    return 0


def cmd_render(args) -> int:
    g = load_graph(args.graph)
    _, normalized = read_scores(args.scores)
    cfg = RenderConfig(
        node_radius=args.node_radius,
        margin=args.margin,
        legend=not args.no_legend,
    )
    svg = render_svg(g, normalized, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histograph",
        description="Nucleus-graph classifiers with occlusion and attention importance maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build a graph JSON from a centroid CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--threshold", type=float, default=100.0)
    p.add_argument("--features", default="const,degree")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("synth", help="generate synthetic centroid fields plus a manifest")
    p.add_argument("--classes", default="ring,scatter")
    p.add_argument("--count-per-class", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-min", type=int, default=100)
    p.add_argument("--n-max", type=int, default=300)
    p.add_argument("--jitter-min", type=float, default=6.0)
    p.add_argument("--jitter-max", type=float, default=80.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a variant on a manifest of labeled graphs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="rsf")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threshold", type=float, default=100.0)
    p.add_argument("--features", default="const,degree")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--threshold", type=float, default=100.0)
    p.add_argument("--features", default="const,degree")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="score per-node importance for one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default="occlusion")
    p.add_argument("--hops", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("render", help="render an importance map as an SVG heatmap")
    p.add_argument("--graph", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--node-radius", type=float, default=4.0)
    p.add_argument("--margin", type=float, default=20.0)
    p.add_argument("--no-legend", action="store_true")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (HistographError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
