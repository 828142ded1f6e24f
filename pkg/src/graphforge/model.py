"""The conditional generator: graph encoder, attribute encoder, inclusion
scheduler, Bernoulli graph decoder, attribute decoder, and the training
objective (reconstruction + distribution distance + attribute MSE).

Two surfaces coexist: numpy-level functions returning plain arrays (for
inference and tests) and tensor-level builders used by the loss so that
gradients reach every parameter. Both share the same wiring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor

PROB_EPS = 1e-7  # edge probabilities kept inside (eps, 1 - eps) before logs

SCHEDULER_MODES = ("scheduled", "constant", "posterior-only")


@dataclass(frozen=True)
class SchedulerConfig:
    """Inclusion-factor schedule: how much attribute latent is mixed in.

    beta(t) = min(gamma, (1 - (1 - beta0) * (1 - t)) ** (1 / alpha)) for the
    scheduled mode; `constant` pins beta = gamma, `posterior-only` pins 0.
    """

    beta0: float = 0.0
    alpha: float = 0.1
    gamma: float = 0.1
    total_epochs: int = 200
    mode: str = "scheduled"

    def __post_init__(self):
        if not 0.0 <= self.beta0 < 1.0:
            raise ValueError(f"beta0 must be in [0, 1), got {self.beta0}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be >= 1, got {self.total_epochs}")
        if self.mode not in SCHEDULER_MODES:
            raise ValueError(f"mode must be one of {SCHEDULER_MODES}, got {self.mode!r}")

    def to_mapping(self) -> dict:
        return {
            "beta0": self.beta0,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "total_epochs": self.total_epochs,
            "mode": self.mode,
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "SchedulerConfig":
        return cls(**m)


def inclusion_factor(t: float, cfg: SchedulerConfig) -> float:
    """Generalized inclusion function at normalized training progress t.

    With alpha = 1 and gamma = 1 this reduces to the linear schedule
    min(1, 1 - (1 - beta0) * (1 - t)).
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    base = 1.0 - (1.0 - cfg.beta0) * (1.0 - t)
    return min(cfg.gamma, base ** (1.0 / cfg.alpha))


def scheduled_beta(t: float, cfg: SchedulerConfig) -> float:
    """Inclusion factor honoring the configured mode."""
    if cfg.mode == "posterior-only":
        return 0.0
    if cfg.mode == "constant":
        return cfg.gamma
    return inclusion_factor(t, cfg)


def mix_latents(z_c: np.ndarray, z_g: np.ndarray, beta: float) -> np.ndarray:
    """Convex combination beta * z_c + (1 - beta) * z_g."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta * np.asarray(z_c) + (1.0 - beta) * np.asarray(z_g)


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal Gaussian: mean vector and per-coordinate std."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must share a shape")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be elementwise positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def w2_gaussian(q: GaussianParams, p: GaussianParams) -> float:
    """Squared 2-Wasserstein distance between diagonal Gaussians:
    ||mu_q - mu_p||^2 + sum_i (sigma_q_i - sigma_p_i)^2.
    """
    return float(np.sum((q.mu - p.mu) ** 2) + np.sum((q.sigma - p.sigma) ** 2))


@dataclass(frozen=True)
class ModelConfig:
    n_max: int = 50
    latent_dim: int = 128
    enc_channels: tuple = (32, 64)
    dec_channels: tuple = (64, 32)
    kernel_size: int = 5
    attr_hidden: int = 1024
    attr_count: int = 12

    def __post_init__(self):
        if self.n_max < 4 or self.n_max % 2 != 0:
            raise ValueError(f"n_max must be even and >= 4, got {self.n_max}")
        if self.enc_channels[1] % 2 != 0:
            raise ValueError("final encoder channel count must be even (mean/cov split)")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel size must be odd")
        object.__setattr__(self, "enc_channels", tuple(self.enc_channels))
        object.__setattr__(self, "dec_channels", tuple(self.dec_channels))

    @property
    def enc_spatial(self) -> int:
        """Spatial side after the two conv+pool stages."""
        return (self.n_max // 2) // 2

    @property
    def dec_spatial(self) -> int:
        """Spatial side of the decoder's dense-to-grid reshape."""
        return self.n_max // 2

    @property
    def enc_half_flat(self) -> int:
        """Flattened size of each half of the final encoder feature map."""
        return (self.enc_channels[1] // 2) * self.enc_spatial * self.enc_spatial

    def to_mapping(self) -> dict:
        return {
            "n_max": self.n_max,
            "latent_dim": self.latent_dim,
            "enc_channels": list(self.enc_channels),
            "dec_channels": list(self.dec_channels),
            "kernel_size": self.kernel_size,
            "attr_hidden": self.attr_hidden,
            "attr_count": self.attr_count,
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "ModelConfig":
        m = dict(m)
        m["enc_channels"] = tuple(m["enc_channels"])
        m["dec_channels"] = tuple(m["dec_channels"])
        return cls(**m)


def init_params(cfg: ModelConfig, seed: int = 0) -> ParamStore:
    """Fresh parameter store with scaled-uniform initialization."""
    rng = np.random.default_rng(seed)
    store = ParamStore()

    def uniform(name, shape, fan_in):
        bound = math.sqrt(1.0 / fan_in)
        store.add(name, rng.uniform(-bound, bound, size=shape))

    k = cfg.kernel_size
    c1, c2 = cfg.enc_channels
    d1, d2 = cfg.dec_channels
    d = cfg.latent_dim

    uniform("enc.conv1.k", (c1, 1, k, k), k * k)
    uniform("enc.conv1.b", (c1,), k * k)
    uniform("enc.conv2.k", (c2, c1, k, k), c1 * k * k)
    uniform("enc.conv2.b", (c2,), c1 * k * k)
    uniform("enc.mu.w", (d, cfg.enc_half_flat), cfg.enc_half_flat)
    uniform("enc.mu.b", (d,), cfg.enc_half_flat)
    uniform("enc.sigma.w", (d, cfg.enc_half_flat), cfg.enc_half_flat)
    uniform("enc.sigma.b", (d,), cfg.enc_half_flat)

    uniform("attr_enc.fc1.w", (cfg.attr_hidden, cfg.attr_count), cfg.attr_count)
    uniform("attr_enc.fc1.b", (cfg.attr_hidden,), cfg.attr_count)
    uniform("attr_enc.fc2.w", (d, cfg.attr_hidden), cfg.attr_hidden)
    uniform("attr_enc.fc2.b", (d,), cfg.attr_hidden)

    grid = cfg.dec_spatial
    uniform("dec.fc.w", (d1 * grid * grid, d), d)
    uniform("dec.fc.b", (d1 * grid * grid,), d)
    uniform("dec.conv1.k", (d2, d1, k, k), d1 * k * k)
    uniform("dec.conv1.b", (d2,), d1 * k * k)
    uniform("dec.conv2.k", (1, d2, k, k), d2 * k * k)
    uniform("dec.conv2.b", (1,), d2 * k * k)

    uniform("attr_dec.fc1.w", (cfg.attr_hidden, d), d)
    uniform("attr_dec.fc1.b", (cfg.attr_hidden,), d)
    uniform("attr_dec.fc2.w", (cfg.attr_count, cfg.attr_hidden), cfg.attr_hidden)
    uniform("attr_dec.fc2.b", (cfg.attr_count,), cfg.attr_hidden)

    return store


@dataclass
class ModelParams:
    """Parameter store plus the architecture config it was built for."""

    config: ModelConfig
    store: ParamStore

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "ModelParams":
        return cls(cfg, init_params(cfg, seed))


# ---------------------------------------------------------------------------
# Tensor-level network builders (batched; leading batch axis)
# ---------------------------------------------------------------------------


def encode_graph_t(a: Tensor, params: ModelParams) -> tuple:
    """Posterior parameters (mu, sigma) from a batch of padded adjacencies.

    a: (B, n_max, n_max). The final feature map's first half of channels
    feeds the mean head, the second half the (softplus) std head.
    """
    cfg = params.config
    s = params.store
    bsz = a.data.shape[0]
    x = ad.reshape(a, (bsz, 1, cfg.n_max, cfg.n_max))
    x = ad.avgpool2(ad.relu(ad.conv2d(x, s["enc.conv1.k"], s["enc.conv1.b"])))
    x = ad.avgpool2(ad.relu(ad.conv2d(x, s["enc.conv2.k"], s["enc.conv2.b"])))
    half = cfg.enc_channels[1] // 2
    lo = ad.reshape(ad.narrow(x, 1, 0, half), (bsz, cfg.enc_half_flat))
    hi = ad.reshape(ad.narrow(x, 1, half, half), (bsz, cfg.enc_half_flat))
    mu = ad.dense(lo, s["enc.mu.w"], s["enc.mu.b"])
    sigma = ad.softplus(ad.dense(hi, s["enc.sigma.w"], s["enc.sigma.b"]))
    return mu, sigma


def encode_attributes_t(c: Tensor, params: ModelParams) -> Tensor:
    """Prior mean from a batch of normalized attribute vectors (sigma is I)."""
    s = params.store
    h = ad.relu(ad.dense(c, s["attr_enc.fc1.w"], s["attr_enc.fc1.b"]))
    return ad.dense(h, s["attr_enc.fc2.w"], s["attr_enc.fc2.b"])


def decode_graph_t(z: Tensor, params: ModelParams) -> Tensor:
    """Edge-probability matrices from a batch of latents.

    Output is (B, n_max, n_max): symmetric, zero diagonal, entries in (0, 1)
    off the diagonal.
    """
    cfg = params.config
    s = params.store
    bsz = z.data.shape[0]
    grid = cfg.dec_spatial
    d1 = cfg.dec_channels[0]
    x = ad.dense(z, s["dec.fc.w"], s["dec.fc.b"])
    x = ad.reshape(x, (bsz, d1, grid, grid))
    x = ad.relu(ad.conv2d(x, s["dec.conv1.k"], s["dec.conv1.b"]))
    x = ad.upsample2x(x)
    x = ad.conv2d(x, s["dec.conv2.k"], s["dec.conv2.b"])
    p_raw = ad.sigmoid(ad.reshape(x, (bsz, cfg.n_max, cfg.n_max)))
    p_sym = ad.mul(ad.add(p_raw, ad.swap_last2(p_raw)), ad.constant(0.5))
    off_diag = 1.0 - np.eye(cfg.n_max)
    return ad.mul(p_sym, ad.constant(off_diag))


def decode_attributes_t(z: Tensor, params: ModelParams) -> Tensor:
    """Normalized attribute reconstruction from a batch of latents."""
    s = params.store
    h = ad.relu(ad.dense(z, s["attr_dec.fc1.w"], s["attr_dec.fc1.b"]))
    return ad.dense(h, s["attr_dec.fc2.w"], s["attr_dec.fc2.b"])


def bce_t(p: Tensor, a: np.ndarray) -> Tensor:
    """Bernoulli negative log-likelihood over strict upper triangles.

    Mean over the batch and all strict-upper-triangle entries (padding
    included). Probabilities are clamped away from {0, 1}.
    """
    n = p.data.shape[-1]
    mask = np.triu(np.ones((n, n)), k=1)
    count = p.data.shape[0] * mask.sum()
    pc = ad.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    target = ad.constant(a)
    pos = ad.mul(target, ad.log(pc))
    neg = ad.mul(ad.constant(1.0 - a), ad.log(ad.sub(ad.constant(np.ones(())), pc)))
    masked = ad.mul(ad.add(pos, neg), ad.constant(mask))
    return ad.mul(ad.total(masked), ad.constant(-1.0 / count))


def w2_t(mu_q: Tensor, sigma_q: Tensor, mu_p: Tensor, sigma_p: Tensor) -> Tensor:
    """Batch-mean squared 2-Wasserstein distance between diagonal Gaussians."""
    bsz = mu_q.data.shape[0]
    gap = ad.total(ad.square(ad.sub(mu_q, mu_p)))
    spread = ad.total(ad.square(ad.sub(sigma_q, sigma_p)))
    return ad.mul(ad.add(gap, spread), ad.constant(1.0 / bsz))


def mse_t(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over all entries."""
    return ad.mean_all(ad.square(ad.sub(pred, ad.constant(target))))


@dataclass(frozen=True)
class LossTerms:
    total: float
    bce: float
    w2: float
    attr_mse: float


def build_loss(
    params: ModelParams,
    a_batch: np.ndarray,
    c_batch: np.ndarray,
    beta: float,
    lambda_d: float,
    lambda_c: float,
    eps_g: np.ndarray,
    eps_c: np.ndarray,
    c_target: np.ndarray | None = None,
) -> tuple:
    """Assemble the objective graph for one batch.

    Per sample: z_g ~ posterior and z_c ~ prior by reparameterization with
    the supplied noise, latents mixed with the inclusion factor, then
    reconstruction BCE + lambda_d * W2(posterior, prior) + lambda_c *
    attribute MSE, averaged over the batch. Returns the scalar tensor and
    the three term tensors.

    ``c_target`` lets the attribute-reconstruction term aim at a different
    vector than the encoder input: training feeds the conditioning with
    disabled attributes zeroed but still asks the decoder for the true
    values, so disabled attributes remain inferable from the rest.
    """
    if c_target is None:
        c_target = c_batch
    mu_q, sigma_q = encode_graph_t(ad.constant(a_batch), params)
    mu_p = encode_attributes_t(ad.constant(c_batch), params)
    ones = np.ones_like(mu_p.data)

    z_g = ad.gaussian_reparameterize(mu_q, sigma_q, eps_g)
    z_c = ad.gaussian_reparameterize(mu_p, ad.constant(ones), eps_c)
    z = ad.add(ad.mul(ad.constant(beta), z_c), ad.mul(ad.constant(1.0 - beta), z_g))

    bce = bce_t(decode_graph_t(z, params), a_batch)
    w2 = w2_t(mu_q, sigma_q, mu_p, ad.constant(ones))
    attr_mse = mse_t(decode_attributes_t(z_c, params), c_target)

    loss = ad.add(bce, ad.add(ad.mul(ad.constant(lambda_d), w2), ad.mul(ad.constant(lambda_c), attr_mse)))
    return loss, bce, w2, attr_mse


def total_loss(
    params: ModelParams,
    a_batch: np.ndarray,
    c_batch: np.ndarray,
    beta: float,
    lambda_d: float,
    lambda_c: float,
    rng: np.random.Generator,
    c_target: np.ndarray | None = None,
) -> LossTerms:
    """Forward + backward over one batch; gradients accumulate in the store.

    Raises on non-finite loss so a diverging run aborts loudly.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    bsz, d = a_batch.shape[0], params.config.latent_dim
    eps_g = rng.standard_normal((bsz, d))
    eps_c = rng.standard_normal((bsz, d))
    loss, bce, w2, attr_mse = build_loss(
        params, a_batch, c_batch, beta, lambda_d, lambda_c, eps_g, eps_c, c_target
    )
    if not np.isfinite(loss.data):
        raise FloatingPointError(
            f"non-finite loss: bce={bce.item()}, w2={w2.item()}, attr_mse={attr_mse.item()}"
        )
    loss.backward()
    return LossTerms(loss.item(), bce.item(), w2.item(), attr_mse.item())


# ---------------------------------------------------------------------------
# Numpy-level inference surface
# ---------------------------------------------------------------------------


def _check_adjacency(a: np.ndarray, n_max: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n_max, n_max):
        raise ValueError(f"adjacency must be {n_max}x{n_max}, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    return a


def encode_graph(a: np.ndarray, params: ModelParams) -> GaussianParams:
    """Posterior over latents for one padded adjacency matrix."""
    a = _check_adjacency(a, params.config.n_max)
    mu, sigma = encode_graph_t(ad.constant(a[None]), params)
    return GaussianParams(mu.data[0], sigma.data[0])


def encode_attributes(c_norm: np.ndarray, params: ModelParams) -> GaussianParams:
    """Prior over latents for one normalized attribute vector (unit std)."""
    c_norm = np.asarray(c_norm, dtype=np.float64)
    if c_norm.shape != (params.config.attr_count,):
        raise ValueError(f"attribute vector must have length {params.config.attr_count}")
    mu = encode_attributes_t(ad.constant(c_norm[None]), params)
    return GaussianParams(mu.data[0], np.ones_like(mu.data[0]))


def decode_graph(z: np.ndarray, params: ModelParams) -> np.ndarray:
    """Edge-probability matrix for one latent vector."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("latent must be finite")
    return decode_graph_t(ad.constant(z[None]), params).data[0]


def decode_attributes(z: np.ndarray, params: ModelParams) -> np.ndarray:
    """Normalized attribute vector for one latent vector."""
    z = np.asarray(z, dtype=np.float64)
    return decode_attributes_t(ad.constant(z[None]), params).data[0]


def bce_reconstruction(p: np.ndarray, a: np.ndarray) -> float:
    """Numpy-level BCE over the strict upper triangle (padding included)."""
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"shape mismatch: {p.shape} vs {a.shape}")
    iu = np.triu_indices(p.shape[0], k=1)
    pc = np.clip(p[iu], PROB_EPS, 1.0 - PROB_EPS)
    av = a[iu]
    return float(-np.mean(av * np.log(pc) + (1.0 - av) * np.log(1.0 - pc)))
