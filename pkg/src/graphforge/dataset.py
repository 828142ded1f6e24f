"""Corpus construction: k-hop subgraph extraction, splits, attribute
normalization statistics, adjacency padding, and on-disk record files.

Record files are JSON lines, one graph per line with its attribute map;
a dataset directory holds train/val/test record files plus a stats file
with the normalization statistics and build configuration.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graphs import (
    ATTRIBUTE_NAMES,
    AttributeVector,
    Graph,
    bfs_canonical_order,
    compute_attributes,
    relabel,
)

log = logging.getLogger(__name__)

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class DatasetConfig:
    k: int = 2
    n_max: int = 50
    split_fractions: tuple = (0.9, 0.05, 0.05)
    seed: int = 0
    node_order: str = "as-is"  # or "bfs"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        fr = tuple(float(f) for f in self.split_fractions)
        if len(fr) != 3 or any(f < 0 or f > 1 for f in fr):
            raise ValueError(f"split fractions must be three values in [0, 1]: {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fr)}")
        if self.node_order not in ("as-is", "bfs"):
            raise ValueError(f"node_order must be 'as-is' or 'bfs', got {self.node_order!r}")
        object.__setattr__(self, "split_fractions", fr)

    def to_mapping(self) -> dict:
        return {
            "k": self.k,
            "n_max": self.n_max,
            "split_fractions": list(self.split_fractions),
            "seed": self.seed,
            "node_order": self.node_order,
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "DatasetConfig":
        return cls(
            k=m["k"],
            n_max=m["n_max"],
            split_fractions=tuple(m["split_fractions"]),
            seed=m["seed"],
            node_order=m["node_order"],
        )


@dataclass(frozen=True)
class GraphRecord:
    id: str
    graph: Graph
    attributes: AttributeVector


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-attribute mean/std fitted on the training split; std is floored."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (len(ATTRIBUTE_NAMES),) or std.shape != mean.shape:
            raise ValueError("stats must have one entry per attribute")
        if np.any(std < STD_FLOOR):
            raise ValueError(f"std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_mapping(self) -> dict:
        return {
            "mean": {n: float(v) for n, v in zip(ATTRIBUTE_NAMES, self.mean)},
            "std": {n: float(v) for n, v in zip(ATTRIBUTE_NAMES, self.std)},
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "NormStats":
        mean = np.array([m["mean"][n] for n in ATTRIBUTE_NAMES], dtype=np.float64)
        std = np.array([m["std"][n] for n in ATTRIBUTE_NAMES], dtype=np.float64)
        return cls(mean, std)


def extract_khop_subgraphs(source: Graph, cfg: DatasetConfig, id_prefix: str = "g") -> list:
    """Induced subgraph on the <=k-hop neighborhood of every node.

    Node ids are compacted to 0..n-1 (ascending original id), optionally
    re-ordered by BFS canonicalization. Subgraphs larger than n_max are
    dropped; the number discarded is logged.
    """
    records = []
    discarded = 0
    for center in range(source.num_nodes):
        nodes = _khop_nodes(source, center, cfg.k)
        if len(nodes) > cfg.n_max:
            discarded += 1
            continue
        sub = _induced_subgraph(source, nodes)
        if cfg.node_order == "bfs":
            sub = relabel(sub, bfs_canonical_order(sub))
        records.append(GraphRecord(f"{id_prefix}{center}", sub, compute_attributes(sub)))
    if discarded:
        log.info("discarded %d oversize subgraphs (> %d nodes)", discarded, cfg.n_max)
    return records


def _khop_nodes(g: Graph, center: int, k: int) -> list:
    dist = {center: 0}
    frontier = [center]
    for d in range(1, k + 1):
        nxt = []
        for v in frontier:
            for u in g.adj[v]:
                if u not in dist:
                    dist[u] = d
                    nxt.append(u)
        frontier = nxt
    return sorted(dist)


def _induced_subgraph(g: Graph, nodes: Sequence[int]) -> Graph:
    pos = {v: i for i, v in enumerate(nodes)}
    keep = set(nodes)
    edges = [(pos[u], pos[v]) for u, v in g.edges if u in keep and v in keep]
    return Graph.from_edges(len(nodes), edges)


def split_dataset(records: list, cfg: DatasetConfig) -> tuple:
    """Disjoint, exhaustive (train, val, test) split by seeded shuffle.

    Sizes use floor-then-distribute: floors of fraction * n, remainder
    assigned by largest fractional part (train before val before test on
    ties).
    """
    if not records:
        raise ValueError("cannot split an empty record list")
    n = len(records)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    shuffled = [records[i] for i in order]

    exact = [f * n for f in cfg.split_fractions]
    sizes = [int(np.floor(x)) for x in exact]
    remainder = n - sum(sizes)
    by_frac = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in range(remainder):
        sizes[by_frac[i % 3]] += 1

    train = shuffled[: sizes[0]]
    val = shuffled[sizes[0] : sizes[0] + sizes[1]]
    test = shuffled[sizes[0] + sizes[1] :]
    return train, val, test


def fit_norm_stats(train: list) -> NormStats:
    """Population mean/std of each attribute over the training records."""
    if not train:
        raise ValueError("cannot fit stats on an empty training split")
    mat = np.stack([r.attributes.to_array() for r in train])
    mean = mat.mean(axis=0)
    std = np.maximum(mat.std(axis=0), STD_FLOOR)
    return NormStats(mean, std)


def normalize(c: AttributeVector | np.ndarray, stats: NormStats) -> np.ndarray:
    arr = c.to_array() if isinstance(c, AttributeVector) else np.asarray(c, dtype=np.float64)
    return (arr - stats.mean) / stats.std


def denormalize(z: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) * stats.std + stats.mean


def pad_adjacency(g: Graph, n_max: int) -> np.ndarray:
    """Dense symmetric 0/1 adjacency, zero-padded to n_max x n_max."""
    if g.num_nodes > n_max:
        raise ValueError(f"graph has {g.num_nodes} nodes, exceeds n_max={n_max}")
    a = np.zeros((n_max, n_max), dtype=np.float64)
    for u, v in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def unpad_adjacency(a: np.ndarray, num_nodes: int) -> Graph:
    """Read a graph back from the top-left block of a padded 0/1 matrix."""
    edges = [
        (u, v)
        for u in range(num_nodes)
        for v in range(u + 1, num_nodes)
        if a[u, v] != 0.0
    ]
    return Graph.from_edges(num_nodes, edges)


# ---------------------------------------------------------------------------
# Record files and dataset directories
# ---------------------------------------------------------------------------


def record_to_json(rec: GraphRecord) -> str:
    obj = {
        "id": rec.id,
        "num_nodes": rec.graph.num_nodes,
        "edges": sorted(list(e) for e in rec.graph.edges),
        "attributes": {
            k: (int(v) if isinstance(v, (int, np.integer)) else float(v))
            for k, v in rec.attributes.to_mapping().items()
        },
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def record_from_json(line: str) -> GraphRecord:
    obj = json.loads(line)
    graph = Graph.from_edges(obj["num_nodes"], [tuple(e) for e in obj["edges"]])
    attrs = AttributeVector.from_mapping(obj["attributes"])
    return GraphRecord(obj["id"], graph, attrs)


def write_records(path, records: Iterable[GraphRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")


def read_records(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(line))
    return records


@dataclass
class Dataset:
    train: list
    val: list
    test: list
    stats: NormStats
    config: DatasetConfig


def save_dataset(ds: Dataset, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_records(os.path.join(out_dir, "train.jsonl"), ds.train)
    write_records(os.path.join(out_dir, "val.jsonl"), ds.val)
    write_records(os.path.join(out_dir, "test.jsonl"), ds.test)
    meta = {"stats": ds.stats.to_mapping(), "config": ds.config.to_mapping()}
    with open(os.path.join(out_dir, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_dataset(in_dir) -> Dataset:
    with open(os.path.join(in_dir, "stats.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return Dataset(
        train=read_records(os.path.join(in_dir, "train.jsonl")),
        val=read_records(os.path.join(in_dir, "val.jsonl")),
        test=read_records(os.path.join(in_dir, "test.jsonl")),
        stats=NormStats.from_mapping(meta["stats"]),
        config=DatasetConfig.from_mapping(meta["config"]),
    )


def build_dataset(source: Graph, cfg: DatasetConfig) -> Dataset:
    """Full pipeline: extract k-hop subgraphs, split, fit stats on train."""
    records = extract_khop_subgraphs(source, cfg)
    train, val, test = split_dataset(records, cfg)
    if not train:
        raise ValueError("training split is empty; adjust fractions or input size")
    return Dataset(train, val, test, fit_norm_stats(train), cfg)
