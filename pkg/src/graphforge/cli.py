"""Command-line surface: dataset building, attribute extraction, training,
generation, evaluation, scheduler tables, and synthetic graph corpora.

Defaults can come from an INI-style config file (sections: dataset, model,
training, scheduler; flat key=value entries). Explicit flags override file
values; unknown keys in the file are rejected. The GRAPHFORGE_CONFIG
environment variable names a default config file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from .dataset import (
    Dataset,
    DatasetConfig,
    GraphRecord,
    build_dataset,
    load_dataset,
    read_records,
    save_dataset,
    write_records,
)
from .evaluation import KNOWN_METRICS, build_report, graph_to_dot
from .graphs import (
    ATTRIBUTE_NAMES,
    AttributeVector,
    barabasi_albert,
    compute_attributes,
    erdos_renyi,
    read_edge_list,
)
from .model import ModelConfig, SchedulerConfig, inclusion_factor
from .training import TrainingConfig, format_loss_log, generate, load_checkpoint, save_checkpoint, train

ENV_CONFIG = "GRAPHFORGE_CONFIG"

_CONFIG_KEYS = {
    "dataset": {"k", "n_max", "splits", "seed", "node_order"},
    "model": {"n_max", "latent_dim", "enc_channels", "dec_channels", "kernel_size", "attr_hidden"},
    "training": {"epochs", "batch_size", "learning_rate", "lambda_d", "lambda_c", "seed"},
    "scheduler": {"beta0", "alpha", "gamma", "mode"},
}


def _parse_splits(text: str) -> tuple:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"splits must be three comma-separated fractions, got {text!r}")
    return tuple(parts)


def _parse_int_pair(text: str) -> tuple:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated integers, got {text!r}")
    return tuple(parts)


def load_run_config(path) -> dict:
    """Read an INI config file into {section: {key: string}}."""
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    out = {}
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise ValueError(f"unknown config section [{section}]")
        keys = dict(parser.items(section))
        unknown = set(keys) - _CONFIG_KEYS[section]
        if unknown:
            raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
        out[section] = keys
    return out


def _config_for(args) -> dict:
    path = getattr(args, "config", None) or os.environ.get(ENV_CONFIG)
    return load_run_config(path) if path else {}


def _pick(cli_value, file_section: dict, key: str, cast, default):
    """Flag beats config file beats default."""
    if cli_value is not None:
        return cli_value
    if key in file_section:
        return cast(file_section[key])
    return default


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_make_dataset(args) -> int:
    cfg = DatasetConfig(
        k=args.k,
        n_max=args.max_nodes,
        split_fractions=_parse_splits(args.splits),
        seed=args.seed,
        node_order=args.order,
    )
    source = read_edge_list(args.input)
    ds = build_dataset(source, cfg)
    save_dataset(ds, args.out)
    total = len(ds.train) + len(ds.val) + len(ds.test)
    discarded = source.num_nodes - total
    print(f"train={len(ds.train)} val={len(ds.val)} test={len(ds.test)} discarded={discarded}")
    return 0


def cmd_extract_attrs(args) -> int:
    records = read_records(args.graphs)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("id\t" + "\t".join(ATTRIBUTE_NAMES) + "\n")
        for rec in records:
            attrs = compute_attributes(rec.graph)
            row = [rec.id] + [repr(getattr(attrs, n)) for n in ATTRIBUTE_NAMES]
            fh.write("\t".join(row) + "\n")
    if not records:
        print("warning: no graph records in input; wrote empty table", file=sys.stderr)
    print(f"wrote {len(records)} attribute rows to {args.out}")
    return 0


def cmd_make_graphs(args) -> int:
    rng = np.random.default_rng(args.seed)
    records = []
    for i in range(args.count):
        gseed = int(rng.integers(0, 2**31))
        if args.kind == "ba":
            g = barabasi_albert(args.nodes, args.attach, gseed)
        else:
            g = erdos_renyi(args.nodes, args.p, gseed)
        records.append(GraphRecord(f"{args.kind}{i}", g, compute_attributes(g)))
    write_records(args.out, records)
    print(f"wrote {len(records)} {args.kind} graph records to {args.out}")
    return 0


def _model_config(file_cfg: dict, args, dataset_n_max: int) -> ModelConfig:
    sec = file_cfg.get("model", {})
    n_max = _pick(getattr(args, "model_n_max", None), sec, "n_max", int, None)
    if n_max is None:
        n_max = dataset_n_max + (dataset_n_max % 2)  # model grid must be even
    return ModelConfig(
        n_max=n_max,
        latent_dim=_pick(args.latent_dim, sec, "latent_dim", int, 128),
        enc_channels=_pick(args.enc_channels, sec, "enc_channels", _parse_int_pair, (32, 64)),
        dec_channels=_pick(args.dec_channels, sec, "dec_channels", _parse_int_pair, (64, 32)),
        kernel_size=_pick(None, sec, "kernel_size", int, 5),
        attr_hidden=_pick(args.attr_hidden, sec, "attr_hidden", int, 1024),
    )


def _training_config(file_cfg: dict, args, epochs_default: int = 200) -> TrainingConfig:
    tsec = file_cfg.get("training", {})
    ssec = file_cfg.get("scheduler", {})
    epochs = _pick(args.epochs, tsec, "epochs", int, epochs_default)
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    scheduler = SchedulerConfig(
        beta0=_pick(args.beta0, ssec, "beta0", float, 0.0),
        alpha=_pick(args.alpha, ssec, "alpha", float, 0.1),
        gamma=_pick(args.gamma, ssec, "gamma", float, 0.1),
        total_epochs=epochs,
        mode=_pick(args.scheduler_mode, ssec, "mode", str, "scheduled"),
    )
    disabled = set()
    if args.disable_attrs:
        disabled = {name.strip() for name in args.disable_attrs.split(",") if name.strip()}
        unknown = disabled - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"cannot disable unknown attributes: {sorted(unknown)}")
    enabled = tuple(n for n in ATTRIBUTE_NAMES if n not in disabled)
    return TrainingConfig(
        epochs=epochs,
        batch_size=_pick(args.batch_size, tsec, "batch_size", int, 1024),
        learning_rate=_pick(args.learning_rate, tsec, "learning_rate", float, 1e-3),
        lambda_d=_pick(args.lambda_d, tsec, "lambda_d", float, 1.0),
        lambda_c=_pick(args.lambda_c, tsec, "lambda_c", float, 1.0),
        scheduler=scheduler,
        seed=_pick(args.seed, tsec, "seed", int, 0),
        enabled_attributes=enabled,
    )


def cmd_train(args) -> int:
    file_cfg = _config_for(args)
    ds = load_dataset(args.dataset)
    mcfg = _model_config(file_cfg, args, ds.config.n_max)
    tcfg = _training_config(file_cfg, args)
    ckpt, log = train(ds, tcfg, mcfg)
    save_checkpoint(ckpt, args.out)
    log_path = args.loss_log or (args.out + ".losslog")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(format_loss_log(log))
    print(f"trained {tcfg.epochs} epochs; final loss {log[-1]['loss']:.6f}; checkpoint at {args.out}")
    return 0


def _load_attr_vectors(spec: str) -> list:
    """Attribute vectors from inline 'name=value,...' or a JSONL file.

    JSONL lines may be bare attribute maps or graph records carrying an
    'attributes' field.
    """
    if "=" in spec and not os.path.exists(spec):
        mapping = {}
        for item in spec.split(","):
            name, _, value = item.partition("=")
            mapping[name.strip()] = float(value)
        return [("inline0", AttributeVector.from_mapping(mapping))]
    out = []
    with open(spec, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            attrs = obj.get("attributes", obj) if isinstance(obj, dict) else obj
            rec_id = obj.get("id", f"attrs{i}") if isinstance(obj, dict) else f"attrs{i}"
            out.append((rec_id, AttributeVector.from_mapping(attrs)))
    if not out:
        raise ValueError(f"no attribute vectors found in {spec}")
    return out


def cmd_generate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    vectors = _load_attr_vectors(args.attrs)
    mask = tuple(n.strip() for n in args.mask_attr.split(",") if n.strip()) if args.mask_attr else ()
    records = []
    for rec_id, attrs in vectors:
        graphs = generate(ckpt, attrs, n_samples=args.num, mode=args.mode, mask=mask, seed=args.seed)
        for j, g in enumerate(graphs):
            records.append(GraphRecord(f"{rec_id}.{j}", g, compute_attributes(g)))
    write_records(args.out, records)
    if args.dot_dir:
        os.makedirs(args.dot_dir, exist_ok=True)
        for rec in records:
            with open(os.path.join(args.dot_dir, f"{rec.id}.dot"), "w", encoding="utf-8") as fh:
                fh.write(graph_to_dot(rec.graph, name=f'"{rec.id}"'))
    print(f"generated {len(records)} graphs to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset)
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    unknown = set(metrics) - set(KNOWN_METRICS)
    if unknown:
        raise ValueError(f"unknown metric names: {sorted(unknown)}")
    if not ds.test:
        raise ValueError("dataset has no test records")
    generated = [
        generate(ckpt, rec.attributes, n_samples=1, mode=args.mode, seed=args.seed + i)[0]
        for i, rec in enumerate(ds.test)
    ]
    training_graphs = [r.graph for r in ds.train]
    report = build_report(ds.test, generated, training_graphs, metrics)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    summary = []
    if report.sd_mean is not None:
        summary.append(f"sd={report.sd_mean:.4f}")
    if report.ged_mean is not None:
        summary.append(f"ged={report.ged_mean:.2f}")
    if report.mad_overall is not None:
        summary.append(f"mad={report.mad_overall:.4f}")
    if report.mmd_overall is not None:
        summary.append(f"mmd={report.mmd_overall:.4f}")
    if report.novelty_fraction is not None:
        summary.append(f"novelty={report.novelty_fraction:.2%}")
    print(f"evaluated {len(ds.test)} pairs: " + " ".join(summary))
    return 0


def cmd_schedule(args) -> int:
    cfg = SchedulerConfig(beta0=args.beta0, alpha=args.alpha, gamma=args.gamma, total_epochs=args.epochs)
    lines = ["t\tbeta"]
    for e in range(args.epochs + 1):
        t = e / args.epochs
        lines.append(f"{t:.6f}\t{inclusion_factor(t, cfg):.10f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.epochs + 1} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="graphforge",
        description="Controlled graph generation toolkit",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-dataset", formatter_class=fmt, help="build a k-hop subgraph dataset from an edge list")
    p.add_argument("--input", required=True, help="edge-list file (u v per line, # comments)")
    p.add_argument("--k", type=int, default=2, help="neighborhood hop count")
    p.add_argument("--max-nodes", type=int, default=50, help="discard subgraphs above this size")
    p.add_argument("--splits", default="0.9,0.05,0.05", help="train,val,test fractions")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--order", choices=["as-is", "bfs"], default="as-is", help="node ordering of stored subgraphs")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("extract-attrs", formatter_class=fmt, help="attribute table for a graph record file")
    p.add_argument("--graphs", required=True, help="graph records (JSON lines)")
    p.add_argument("--out", required=True, help="output TSV table")
    p.set_defaults(func=cmd_extract_attrs)

    p = sub.add_parser("make-graphs", formatter_class=fmt, help="synthetic graph records (preferential attachment or uniform random)")
    p.add_argument("--kind", choices=["ba", "er"], default="ba", help="generator family")
    p.add_argument("--count", type=int, default=25, help="number of graphs")
    p.add_argument("--nodes", type=int, default=20, help="nodes per graph")
    p.add_argument("--attach", type=int, default=2, help="edges per new node (ba)")
    p.add_argument("--p", type=float, default=0.2, help="edge probability (er)")
    p.add_argument("--seed", type=int, default=0, help="rng seed")
    p.add_argument("--out", required=True, help="output record file")
    p.set_defaults(func=cmd_make_graphs)

    p = sub.add_parser("train", formatter_class=fmt, help="train a model on a dataset directory")
    p.add_argument("--dataset", required=True, help="dataset directory from make-dataset")
    p.add_argument("--config", default=None, help=f"INI config file (default ${ENV_CONFIG})")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--loss-log", default=None, help="loss log path (default <out>.losslog)")
    p.add_argument("--disable-attrs", default=None, help="comma-separated attributes to zero during training")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 200)")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch size (default 1024)")
    p.add_argument("--learning-rate", type=float, default=None, help="step size (default 1e-3)")
    p.add_argument("--lambda-d", type=float, default=None, help="distance-term weight (default 1.0)")
    p.add_argument("--lambda-c", type=float, default=None, help="attribute-term weight (default 1.0)")
    p.add_argument("--seed", type=int, default=None, help="run seed (default 0)")
    p.add_argument("--beta0", type=float, default=None, help="initial inclusion factor (default 0.0)")
    p.add_argument("--alpha", type=float, default=None, help="inclusion rate (default 0.1)")
    p.add_argument("--gamma", type=float, default=None, help="maximum inclusion (default 0.1)")
    p.add_argument("--scheduler-mode", choices=["scheduled", "constant", "posterior-only"], default=None,
                   help="inclusion schedule variant (default scheduled)")
    p.add_argument("--model-n-max", dest="model_n_max", type=int, default=None, help="model grid size (default: dataset cap rounded up to even)")
    p.add_argument("--latent-dim", type=int, default=None, help="latent dimension (default 128)")
    p.add_argument("--enc-channels", type=_parse_int_pair, default=None, help="encoder conv channels (default 32,64)")
    p.add_argument("--dec-channels", type=_parse_int_pair, default=None, help="decoder conv channels (default 64,32)")
    p.add_argument("--attr-hidden", type=int, default=None, help="attribute MLP hidden size (default 1024)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", formatter_class=fmt, help="generate graphs from attribute vectors")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--attrs", required=True, help="JSONL file of attribute maps/records, or inline name=value,...")
    p.add_argument("--num", type=int, default=1, help="samples per attribute vector")
    p.add_argument("--mode", choices=["sample", "threshold"], default="sample", help="edge realization mode")
    p.add_argument("--mask-attr", default=None, help="comma-separated attributes zeroed before generation")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--out", required=True, help="output graph record file")
    p.add_argument("--dot-dir", default=None, help="also write one DOT file per graph here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", formatter_class=fmt, help="generate from test attributes and score against ground truth")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--metrics", default="sd,ged,mad,mmd,novelty", help="comma-separated metric subset")
    p.add_argument("--mode", choices=["sample", "threshold"], default="threshold", help="edge realization mode")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out", required=True, help="output report (JSON)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", formatter_class=fmt, help="emit the inclusion-factor curve over an epoch grid")
    p.add_argument("--alpha", type=float, default=0.1, help="inclusion rate")
    p.add_argument("--gamma", type=float, default=0.1, help="maximum inclusion")
    p.add_argument("--beta0", type=float, default=0.0, help="initial inclusion")
    p.add_argument("--epochs", type=int, default=200, help="epoch grid size")
    p.add_argument("--out", default=None, help="output TSV (stdout when omitted)")
    p.set_defaults(func=cmd_schedule)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
