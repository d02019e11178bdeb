"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numeric failure.
Every run writes plain files into its output directory plus a manifest
naming the inputs, the config hash, and the tool version, so runs are
reproducible from flags and config alone.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, report
from .checkpoint import save_checkpoint
from .config import TrainConfig, config_hash, format_config, parse_config
from .data import (
    coherence_time,
    doppler_shift,
    impute_and_normalize,
    load_dataset,
    load_kg,
    load_telemetry,
    slice_snapshots,
    synthetic_tables,
    write_dataset,
)
from .errors import ConfigError, DataError, DomainError, NumericError, ParseError, SchemaError
from .evaluate import evaluate_embeddings, evaluate_gcn, export_heatmap, write_metrics_json, write_metrics_report
from .graphops import read_adjacency_csv, write_adjacency_csv
from .trainer import ablate, train, write_loss_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _write_manifest(out_dir: Path, command: str, inputs: dict, cfg_hash: str | None = None) -> None:
    manifest = {"tool": "dmgsl", "version": __version__, "command": command, "inputs": inputs}
    if cfg_hash is not None:
        manifest["config_hash"] = cfg_hash
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config(path) -> TrainConfig:
    return parse_config(path) if path else TrainConfig()


def cmd_synth(args) -> int:
    out = Path(_require(args.out, "--out"))
    table, edges, labels = synthetic_tables(
        seed=args.seed,
        n=args.nodes,
        classes=args.classes,
        edge_types=args.edge_types,
        snapshots=args.snapshots,
        dim=args.dim,
        planted=args.planted,
        noise=args.noise,
    )
    write_dataset(out, table, edges, labels, window_rows=args.dim, truth=edges)
    _write_manifest(
        out,
        "synth",
        {
            "seed": args.seed,
            "nodes": args.nodes,
            "classes": args.classes,
            "edge_types": args.edge_types,
            "snapshots": args.snapshots,
            "dim": args.dim,
            "planted": args.planted,
            "noise": args.noise,
        },
    )
    print(f"wrote synthetic dataset to {out}")
    return 0


def cmd_ingest(args) -> int:
    out = Path(_require(args.out, "--out"))
    table = load_telemetry(_require(args.telemetry, "--telemetry"), sample_rate=args.sample_rate)
    table = impute_and_normalize(table)
    edges, labels = load_kg(_require(args.edges, "--edges"), _require(args.labels, "--labels"), table.field_names)
    # validates window/shape consistency before anything is written
    seq = slice_snapshots(table, edges, labels, window_rows=args.window)
    write_dataset(out, table, edges, labels, window_rows=args.window)
    _write_manifest(
        out,
        "ingest",
        {"telemetry": str(args.telemetry), "edges": str(args.edges), "labels": str(args.labels), "window": args.window},
    )
    print(f"ingested {seq.n_steps} snapshots of {seq.n_nodes} nodes (d={seq.feature_dim}) into {out}")
    return 0


def cmd_train(args) -> int:
    data_dir = Path(_require(args.data, "--data"))
    out = Path(_require(args.out, "--out"))
    cfg = _load_config(args.config)
    dataset = load_dataset(data_dir)
    result = train(dataset, cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.checkpoint, out / "checkpoint.dmgsl")
    write_adjacency_csv(result.learned, out / "learned_adjacency.csv")
    write_adjacency_csv(result.learned_raw, out / "learned_adjacency_raw.csv")
    np.savetxt(out / "embeddings.csv", result.embeddings, fmt="%.17g", delimiter=",")
    write_loss_csv(result.loss_trace, out / "loss.csv")
    report.save_loss_curve(result.loss_trace, out / "loss.png")
    (out / "config.txt").write_text(format_config(cfg))
    _write_manifest(out, "train", {"data": str(data_dir), "config": str(args.config or "<defaults>")}, config_hash(cfg))
    print(f"trained {cfg.epochs} epochs; final loss {result.loss_trace[-1]:.6f}; artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    run_dir = Path(_require(args.run, "--run"))
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{run_dir}: missing manifest.json; not a run directory")
    manifest = json.loads(manifest_path.read_text())
    data_dir = manifest.get("inputs", {}).get("data")
    if data_dir is None:
        raise DataError(f"{run_dir}: manifest does not name a data directory")
    dataset = load_dataset(data_dir)
    labels = dataset.labels
    seeds = list(range(args.seeds))
    if args.probe == "gcn":
        adjacency = read_adjacency_csv(run_dir / "learned_adjacency.csv")
        features = np.mean([snap.features for snap in dataset.snapshots], axis=0)
        metrics = evaluate_gcn(features, adjacency, labels, seeds=seeds)
    else:
        emb_path = run_dir / "embeddings.csv"
        if not emb_path.exists():
            raise DataError(f"{run_dir}: missing embeddings.csv")
        embeddings = np.loadtxt(emb_path, delimiter=",", dtype=np.float64)
        metrics = evaluate_embeddings(embeddings, labels, seeds=seeds)
    write_metrics_json(metrics, run_dir / "metrics.json")
    write_metrics_report(metrics, run_dir / "metrics.txt")
    print(
        f"accuracy {metrics['accuracy']:.4f} +/- {metrics['stddevs']['accuracy']:.4f} "
        f"over {args.seeds} seeds; wrote {run_dir / 'metrics.json'}"
    )
    return 0


def cmd_ablate(args) -> int:
    data_dir = Path(_require(args.data, "--data"))
    out = Path(_require(args.out, "--out"))
    cfg = _load_config(args.config)
    dataset = load_dataset(data_dir)
    rows = ablate(dataset, cfg, eval_seeds=list(range(args.seeds)))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.csv", "w") as f:
        f.write("name,accuracy,precision,recall,f1\n")
        for r in rows:
            f.write(f"{r['name']},{r['accuracy']:.6f},{r['precision']:.6f},{r['recall']:.6f},{r['f1']:.6f}\n")
    with open(out / "ablation.json", "w") as f:
        json.dump(rows, f, indent=2)
        f.write("\n")
    report.save_ablation_figure(rows, out / "ablation.png")
    (out / "config.txt").write_text(format_config(cfg))
    _write_manifest(out, "ablate", {"data": str(data_dir), "config": str(args.config or "<defaults>")}, config_hash(cfg))
    for r in rows:
        print(f"{r['name']:<20s} accuracy={r['accuracy']:.4f} f1={r['f1']:.4f}")
    return 0


def cmd_heatmap(args) -> int:
    adjacency = read_adjacency_csv(_require(args.adjacency, "--adjacency"))
    out = Path(_require(args.out, "--out"))
    base = out.with_suffix("") if out.suffix in (".pgm", ".csv", ".png") else out
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, pgm_path = export_heatmap(adjacency, base)
    png_path = report.save_heatmap_figure(adjacency, base.with_suffix(".png"))
    print(f"wrote {csv_path}, {pgm_path}, {png_path}")
    return 0


def cmd_tc(args) -> int:
    freq = _require(args.freq_hz, "--freq-hz")
    speed = _require(args.speed_mps, "--speed-mps")
    fd = doppler_shift(freq, speed)
    tc = coherence_time(freq, speed)
    print(f"doppler_hz={fd:.6e}")
    print(f"coherence_time_s={tc:.6e}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="dmgsl", description="Structure learning for dynamic telemetry knowledge graphs")
    parser.add_argument("--version", action="version", version=f"dmgsl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--seed", type=int, default=0, help="generation seed (default 0)")
    p.add_argument("--nodes", type=int, default=82, help="number of data fields (default 82)")
    p.add_argument("--classes", type=int, default=10, help="number of node classes (default 10)")
    p.add_argument("--edge-types", type=int, default=3, help="number of relation types (default 3)")
    p.add_argument("--snapshots", type=int, default=8, help="number of snapshots (default 8)")
    p.add_argument("--dim", type=int, default=32, help="samples per snapshot window (default 32)")
    p.add_argument("--planted", type=int, default=133, help="planted edge count (default 133)")
    p.add_argument("--noise", type=float, default=0.01, help="AR(1) innovation scale (default 0.01)")
    p.add_argument("--out", type=Path, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="normalize telemetry and build a dataset directory")
    p.add_argument("--telemetry", type=Path, help="telemetry CSV (header of field names)")
    p.add_argument("--edges", type=Path, help="edge CSV: src,dst,type,weight")
    p.add_argument("--labels", type=Path, help="label CSV: node,class")
    p.add_argument("--window", type=int, default=450, help="rows per snapshot window (default 450)")
    p.add_argument("--sample-rate", type=float, default=40.0, help="samples per second (default 40)")
    p.add_argument("--out", type=Path, help="output dataset directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", type=Path, help="dataset directory (from synth or ingest)")
    p.add_argument("--config", type=Path, help="key=value config file (defaults when omitted)")
    p.add_argument("--out", type=Path, help="output run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="node-classification metrics for a run")
    p.add_argument("--run", type=Path, help="run directory written by train")
    p.add_argument("--seeds", type=int, default=5, help="number of evaluation seeds (default 5)")
    p.add_argument("--probe", choices=("linear", "gcn"), default="linear",
                   help="linear: classifier on frozen embeddings; gcn: 2-layer GCN on the exported structure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate the four attention configurations")
    p.add_argument("--data", type=Path, help="dataset directory")
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--out", type=Path, help="output directory for the ablation table")
    p.add_argument("--seeds", type=int, default=5, help="number of evaluation seeds (default 5)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("heatmap", help="export an adjacency CSV as heatmap files")
    p.add_argument("--adjacency", type=Path, help="dense adjacency CSV")
    p.add_argument("--out", type=Path, help="output path (suffix ignored; writes .csv/.pgm/.png)")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("tc", help="coherence time from carrier frequency and speed")
    p.add_argument("--freq-hz", type=float, required=False, help="carrier frequency in Hz (3.5 GHz = 3.5e9; beware MHz-quoted values)")
    p.add_argument("--speed-mps", type=float, required=False, help="receiver radial speed in m/s")
    p.set_defaults(func=cmd_tc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SchemaError, DataError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NumericError, DomainError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
