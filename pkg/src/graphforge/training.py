"""Optimization loop, generation from a trained model, and checkpointing.

Checkpoints are a versioned binary container: a fixed-width little-endian
header, a JSON metadata block (configs, normalization stats, parameter
manifest), then the raw float64 parameter arrays in manifest order. A
save/load round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParamStore
from .dataset import Dataset, NormStats, denormalize, normalize, pad_adjacency
from .graphs import ATTRIBUTE_NAMES, AttributeVector, Graph
from .model import (
    ModelConfig,
    ModelParams,
    SchedulerConfig,
    decode_attributes,
    decode_graph,
    encode_attributes,
    init_params,
    scheduled_beta,
    total_loss,
)

CHECKPOINT_MAGIC = b"GFCKPT01"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 1024
    learning_rate: float = 1e-3
    lambda_d: float = 1.0
    lambda_c: float = 1.0
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 0
    enabled_attributes: tuple = ATTRIBUTE_NAMES

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        enabled = tuple(self.enabled_attributes)
        if not enabled:
            raise ValueError("enabled_attributes must be nonempty")
        unknown = set(enabled) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown attribute names: {sorted(unknown)}")
        object.__setattr__(self, "enabled_attributes", enabled)

    def to_mapping(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "lambda_d": self.lambda_d,
            "lambda_c": self.lambda_c,
            "scheduler": self.scheduler.to_mapping(),
            "seed": self.seed,
            "enabled_attributes": list(self.enabled_attributes),
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "TrainingConfig":
        m = dict(m)
        m["scheduler"] = SchedulerConfig.from_mapping(m["scheduler"])
        m["enabled_attributes"] = tuple(m["enabled_attributes"])
        return cls(**m)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class AdamState:
    """First/second moment accumulators for adaptive-moment estimation."""

    def __init__(self, store: ParamStore, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.items()}


def optimizer_step(store: ParamStore, state: AdamState, lr: float) -> None:
    """One Adam update from the accumulated gradients, which are then zeroed."""
    for name, t in store.items():
        if not np.all(np.isfinite(t.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step
    for name, t in store.items():
        g = t.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        t.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    store.zero_grad()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    model_config: ModelConfig
    training_config: TrainingConfig
    norm_stats: NormStats
    param_values: dict
    epoch: int
    rng_digest: str

    def to_model_params(self) -> ModelParams:
        store = ParamStore()
        for name, arr in self.param_values.items():
            store.add(name, arr)
        return ModelParams(self.model_config, store)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    manifest = [{"name": k, "shape": list(v.shape)} for k, v in ckpt.param_values.items()]
    meta = {
        "model_config": ckpt.model_config.to_mapping(),
        "training_config": ckpt.training_config.to_mapping(),
        "norm_stats": ckpt.norm_stats.to_mapping(),
        "epoch": ckpt.epoch,
        "rng_digest": ckpt.rng_digest,
        "params": manifest,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(manifest)))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        for arr in ckpt.param_values.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file (bad magic {blob[:8]!r})")
    version, n_params = struct.unpack("<II", blob[8:16])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<Q", blob[16:24])
    meta_end = 24 + meta_len
    if len(blob) < meta_end:
        raise ValueError("truncated checkpoint: metadata incomplete")
    meta = json.loads(blob[24:meta_end].decode("utf-8"))
    if len(meta["params"]) != n_params:
        raise ValueError("checkpoint manifest does not match header count")
    values = {}
    offset = meta_end
    for entry in meta["params"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        if len(blob) < offset + nbytes:
            raise ValueError(f"truncated checkpoint: parameter {entry['name']!r} incomplete")
        arr = np.frombuffer(blob[offset : offset + nbytes], dtype="<f8").reshape(shape)
        values[entry["name"]] = arr.astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise ValueError("trailing bytes after parameter block")
    return Checkpoint(
        model_config=ModelConfig.from_mapping(meta["model_config"]),
        training_config=TrainingConfig.from_mapping(meta["training_config"]),
        norm_stats=NormStats.from_mapping(meta["norm_stats"]),
        param_values=values,
        epoch=meta["epoch"],
        rng_digest=meta["rng_digest"],
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _disabled_indices(enabled: tuple) -> list:
    return [i for i, n in enumerate(ATTRIBUTE_NAMES) if n not in enabled]


def prepare_arrays(records: list, stats: NormStats, mcfg: ModelConfig, enabled: tuple) -> tuple:
    """Padded adjacencies plus normalized attribute rows for a record list.

    Returns (adjacencies, conditioning, targets): the conditioning copy has
    attributes outside the enabled set zeroed in normalized space; the
    target copy keeps the true values, so the attribute decoder still
    learns to infer disabled attributes from the remaining ones.
    """
    a = np.stack([pad_adjacency(r.graph, mcfg.n_max) for r in records])
    c_target = np.stack([normalize(r.attributes, stats) for r in records])
    c_input = c_target.copy()
    for i in _disabled_indices(enabled):
        c_input[:, i] = 0.0
    return a, c_input, c_target


def train(dataset: Dataset, tcfg: TrainingConfig, mcfg: ModelConfig) -> tuple:
    """Run the full optimization; returns (checkpoint, per-epoch loss log).

    The inclusion factor is updated once per epoch at t = epoch / epochs.
    Everything is driven by tcfg.seed: initialization, shuffling, and the
    reparameterization noise.
    """
    if not dataset.train:
        raise ValueError("dataset has no training records")
    a_all, c_all, c_tgt = prepare_arrays(dataset.train, dataset.stats, mcfg, tcfg.enabled_attributes)
    n = len(dataset.train)

    seeds = np.random.SeedSequence(tcfg.seed).spawn(2)
    params = ModelParams(mcfg, init_params(mcfg, seed=seeds[0]))
    rng = np.random.default_rng(seeds[1])
    adam = AdamState(params.store)

    log = []
    for epoch in range(tcfg.epochs):
        beta = scheduled_beta(epoch / tcfg.epochs, tcfg.scheduler)
        order = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            try:
                terms = total_loss(
                    params, a_all[idx], c_all[idx], beta,
                    tcfg.lambda_d, tcfg.lambda_c, rng, c_target=c_tgt[idx],
                )
            except FloatingPointError as err:
                raise FloatingPointError(f"training diverged at epoch {epoch}: {err}") from err
            optimizer_step(params.store, adam, tcfg.learning_rate)
            sums += (terms.total, terms.bce, terms.w2, terms.attr_mse)
            batches += 1
        log.append(
            {
                "epoch": epoch,
                "beta": beta,
                "loss": sums[0] / batches,
                "bce": sums[1] / batches,
                "w2": sums[2] / batches,
                "attr_mse": sums[3] / batches,
            }
        )

    digest = hashlib.sha256(repr(rng.bit_generator.state).encode("utf-8")).hexdigest()
    ckpt = Checkpoint(
        model_config=mcfg,
        training_config=tcfg,
        norm_stats=dataset.stats,
        param_values=params.store.copy_values(),
        epoch=tcfg.epochs,
        rng_digest=digest,
    )
    return ckpt, log


def format_loss_log(log: list) -> str:
    """Loss curve as structured text, one JSON object per epoch line."""
    return "\n".join(json.dumps(entry, sort_keys=True) for entry in log) + "\n"


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def generate(
    ckpt: Checkpoint,
    c: AttributeVector | np.ndarray,
    n_samples: int = 1,
    mode: str = "sample",
    mask: tuple = (),
    seed: int = 0,
) -> list:
    """Draw graphs conditioned on an attribute vector via the prior.

    Masked attributes are zeroed in raw units before normalization. The
    node count comes from the requested `nodes` attribute when it is
    enabled and unmasked, otherwise from the attribute decoder. Modes:
    `sample` draws each edge from its Bernoulli probability, `threshold`
    keeps edges with probability > 0.5.
    """
    if mode not in ("sample", "threshold"):
        raise ValueError(f"mode must be 'sample' or 'threshold', got {mode!r}")
    raw = c.to_array() if isinstance(c, AttributeVector) else np.asarray(c, dtype=np.float64).copy()
    if raw.shape != (len(ATTRIBUTE_NAMES),):
        raise ValueError(f"attribute vector must have length {len(ATTRIBUTE_NAMES)}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("attribute vector must be finite")
    unknown = set(mask) - set(ATTRIBUTE_NAMES)
    if unknown:
        raise ValueError(f"unknown masked attributes: {sorted(unknown)}")

    nodes_idx = ATTRIBUTE_NAMES.index("nodes")
    tcfg = ckpt.training_config
    n_max = ckpt.model_config.n_max
    for name in mask:
        raw[ATTRIBUTE_NAMES.index(name)] = 0.0
    c_norm = normalize(raw, ckpt.norm_stats)
    for i in _disabled_indices(tcfg.enabled_attributes):
        c_norm[i] = 0.0

    params = ckpt.to_model_params()
    prior = encode_attributes(c_norm, params)
    rng = np.random.default_rng(seed)
    use_requested_nodes = "nodes" in tcfg.enabled_attributes and "nodes" not in mask

    graphs = []
    for _ in range(n_samples):
        z = prior.mu + rng.standard_normal(prior.mu.shape)
        p = decode_graph(z, params)
        if use_requested_nodes:
            v = int(round(raw[nodes_idx]))
        else:
            predicted = denormalize(decode_attributes(z, params), ckpt.norm_stats)
            v = int(round(predicted[nodes_idx]))
        v = max(1, min(n_max, v))
        graphs.append(realize_edges(p, v, mode, rng))
    return graphs


def realize_edges(p: np.ndarray, v: int, mode: str, rng: np.random.Generator) -> Graph:
    """Read a v-node graph off the top-left block of an edge-probability
    matrix: threshold at 0.5, or draw each upper-triangle entry."""
    edges = []
    for u in range(v):
        for w in range(u + 1, v):
            keep = p[u, w] > 0.5 if mode == "threshold" else rng.random() < p[u, w]
            if keep:
                edges.append((u, w))
    return Graph.from_edges(v, edges)


def reconstruction_edge_accuracy(ckpt: Checkpoint, records: list, seed: int = 0) -> float:
    """Mean fraction of correctly decided cells (edge vs non-edge) over the
    strict upper triangle of the padded matrix, generating one graph per
    record in threshold mode from its attribute vector.
    """
    n_max = ckpt.model_config.n_max
    iu = np.triu_indices(n_max, k=1)
    correct = 0
    totals = 0
    for rec in records:
        gen = generate(ckpt, rec.attributes, n_samples=1, mode="threshold", seed=seed)[0]
        truth = pad_adjacency(rec.graph, n_max)[iu]
        pred = pad_adjacency(gen, n_max)[iu]
        correct += int(np.sum(truth == pred))
        totals += truth.size
    return correct / totals
