import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphforge import autodiff as ad
from graphforge import model as M
from graphforge.model import (
    GaussianParams,
    ModelConfig,
    ModelParams,
    SchedulerConfig,
    bce_reconstruction,
    decode_attributes,
    decode_graph,
    encode_attributes,
    encode_graph,
    inclusion_factor,
    mix_latents,
    scheduled_beta,
    w2_gaussian,
)

SMALL = ModelConfig(n_max=12, latent_dim=8, enc_channels=(4, 8), dec_channels=(8, 4), attr_hidden=16)


@pytest.fixture(scope="module")
def params():
    return ModelParams.init(SMALL, seed=3)


# ---------------------------------------------------------------------------
# Scheduler
# ---------------------------------------------------------------------------


def test_inclusion_linear_midpoint():
    cfg = SchedulerConfig(beta0=0.0, alpha=1.0, gamma=1.0)
    assert inclusion_factor(0.5, cfg) == pytest.approx(0.5, abs=1e-15)


def test_inclusion_full_at_t1():
    for beta0, alpha in [(0.0, 1.0), (0.5, 0.3), (0.9, 7.0)]:
        cfg = SchedulerConfig(beta0=beta0, alpha=alpha, gamma=1.0)
        assert inclusion_factor(1.0, cfg) == 1.0


def test_inclusion_gamma_cap_point():
    cfg = SchedulerConfig(beta0=0.0, alpha=0.1, gamma=0.2)
    assert inclusion_factor(0.9, cfg) == pytest.approx(0.2, abs=1e-15)


def test_inclusion_rejects_out_of_range_t():
    cfg = SchedulerConfig()
    with pytest.raises(ValueError):
        inclusion_factor(-0.01, cfg)
    with pytest.raises(ValueError):
        inclusion_factor(1.01, cfg)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.0, 0.99),
    st.floats(0.05, 20.0),
    st.floats(0.0, 1.0),
)
def test_inclusion_monotone_and_capped(beta0, alpha, gamma):
    cfg = SchedulerConfig(beta0=beta0, alpha=alpha, gamma=gamma)
    grid = np.linspace(0.0, 1.0, 1001)
    vals = [inclusion_factor(t, cfg) for t in grid]
    assert all(b <= a + 1e-15 for a, b in zip(vals[1:], vals))  # nondecreasing
    assert max(vals) <= gamma + 1e-15


def test_linear_special_case_matches_closed_form():
    cfg = SchedulerConfig(beta0=0.25, alpha=1.0, gamma=1.0)
    for t in np.linspace(0, 1, 1001):
        lin = min(1.0, 1.0 - (1.0 - 0.25) * (1.0 - t))
        assert abs(inclusion_factor(t, cfg) - lin) < 1e-12


def test_alpha_shape_versus_linear():
    lin = inclusion_factor(0.5, SchedulerConfig(beta0=0.0, alpha=1.0, gamma=1.0))
    slow = inclusion_factor(0.5, SchedulerConfig(beta0=0.0, alpha=0.1, gamma=1.0))
    fast = inclusion_factor(0.5, SchedulerConfig(beta0=0.0, alpha=10.0, gamma=1.0))
    assert slow < lin < fast


def test_scheduled_beta_modes():
    cfg = SchedulerConfig(gamma=0.3, mode="posterior-only")
    assert scheduled_beta(0.7, cfg) == 0.0
    cfg = SchedulerConfig(gamma=0.3, mode="constant")
    assert scheduled_beta(0.0, cfg) == 0.3
    cfg = SchedulerConfig(gamma=0.3, mode="scheduled", alpha=1.0)
    assert scheduled_beta(0.0, cfg) == 0.0


def test_scheduler_config_validation():
    with pytest.raises(ValueError):
        SchedulerConfig(beta0=1.0)
    with pytest.raises(ValueError):
        SchedulerConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SchedulerConfig(gamma=1.5)
    with pytest.raises(ValueError):
        SchedulerConfig(mode="bogus")


# ---------------------------------------------------------------------------
# Latent mixing
# ---------------------------------------------------------------------------


def test_mix_endpoints_and_midpoint():
    zc = np.array([1.0, 0.0])
    zg = np.array([0.0, 1.0])
    assert np.array_equal(mix_latents(zc, zg, 0.0), zg)
    assert np.array_equal(mix_latents(zc, zg, 1.0), zc)
    assert np.array_equal(mix_latents(zc, zg, 0.5), [0.5, 0.5])
    with pytest.raises(ValueError):
        mix_latents(zc, zg, 1.5)


# ---------------------------------------------------------------------------
# Encoders / decoders
# ---------------------------------------------------------------------------


def test_encode_graph_zero_matrix(params):
    gp = encode_graph(np.zeros((12, 12)), params)
    assert np.all(np.isfinite(gp.mu))
    assert np.all(gp.sigma > 0)


def test_encode_graph_rejects_asymmetric(params):
    a = np.zeros((12, 12))
    a[0, 1] = 1.0
    with pytest.raises(ValueError):
        encode_graph(a, params)


def test_encode_graph_order_sensitive(params):
    # documented non-invariance: permuting rows+cols changes the encoding
    rng = np.random.default_rng(0)
    a = np.zeros((12, 12))
    for u, v in [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5)]:
        a[u, v] = a[v, u] = 1.0
    perm = rng.permutation(12)
    b = a[np.ix_(perm, perm)]
    out_a = encode_graph(a, params)
    out_b = encode_graph(b, params)
    assert not np.allclose(out_a.mu, out_b.mu)


def test_encode_graph_gradcheck(params):
    a = np.zeros((1, 12, 12))
    a[0, 0, 1] = a[0, 1, 0] = 1.0
    enc_params = [t for n, t in params.store.items() if n.startswith("enc.")]
    fn = lambda: ad.total(ad.square(M.encode_graph_t(ad.constant(a), params)[0]))
    assert ad.grad_check(fn, enc_params, max_coords=200) < 1e-3


def test_encode_attributes_unit_sigma(params):
    rng = np.random.default_rng(1)
    for _ in range(3):
        gp = encode_attributes(rng.normal(size=12), params)
        assert np.all(gp.sigma == 1.0)


def test_encode_attributes_zero_vector_is_bias_path(params):
    gp = encode_attributes(np.zeros(12), params)
    s = params.store
    h = np.maximum(s["attr_enc.fc1.b"].data, 0.0)
    want = s["attr_enc.fc2.w"].data @ h + s["attr_enc.fc2.b"].data
    assert np.allclose(gp.mu, want, atol=1e-12)


def test_encode_attributes_wrong_length(params):
    with pytest.raises(ValueError):
        encode_attributes(np.zeros(11), params)


def test_encode_attributes_gradcheck(params):
    rng = np.random.default_rng(2)
    c = rng.normal(size=(1, 12))
    enc_params = [t for n, t in params.store.items() if n.startswith("attr_enc.")]
    fn = lambda: ad.total(ad.square(M.encode_attributes_t(ad.constant(c), params)))
    assert ad.grad_check(fn, enc_params, max_coords=200) < 1e-3


def test_decode_graph_structure(params):
    rng = np.random.default_rng(3)
    iu = np.triu_indices(12, k=1)
    for _ in range(50):
        p = decode_graph(rng.normal(size=8), params)
        assert np.array_equal(p, p.T)
        assert np.all(np.diag(p) == 0.0)
        assert np.all(p[iu] > 0.0) and np.all(p[iu] < 1.0)


def test_decode_graph_rejects_nonfinite(params):
    with pytest.raises(ValueError):
        decode_graph(np.array([np.nan] * 8), params)


def test_decode_graph_gradcheck(params):
    rng = np.random.default_rng(4)
    z = rng.normal(size=(1, 8))
    dec_params = [t for n, t in params.store.items() if n.startswith("dec.")]
    fn = lambda: ad.mean_all(M.decode_graph_t(ad.constant(z), params))
    assert ad.grad_check(fn, dec_params, max_coords=200) < 1e-3


def test_decode_attributes_shape_and_determinism(params):
    rng = np.random.default_rng(5)
    z = rng.normal(size=8)
    out1 = decode_attributes(z, params)
    out2 = decode_attributes(z, params)
    assert out1.shape == (12,)
    assert np.array_equal(out1, out2)


def test_decode_attributes_gradcheck(params):
    rng = np.random.default_rng(6)
    z = rng.normal(size=(1, 8))
    dec_params = [t for n, t in params.store.items() if n.startswith("attr_dec.")]
    fn = lambda: ad.total(ad.square(M.decode_attributes_t(ad.constant(z), params)))
    assert ad.grad_check(fn, dec_params, max_coords=200) < 1e-3


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(n_max=13)
    with pytest.raises(ValueError):
        ModelConfig(enc_channels=(4, 7))
    with pytest.raises(ValueError):
        ModelConfig(kernel_size=4)


# ---------------------------------------------------------------------------
# Distances and losses
# ---------------------------------------------------------------------------


def test_w2_identical_zero():
    g = GaussianParams(np.array([1.0, 2.0]), np.array([0.5, 3.0]))
    assert w2_gaussian(g, g) == 0.0


def test_w2_worked_examples():
    q = GaussianParams(np.array([1.0, 0.0]), np.ones(2))
    p = GaussianParams(np.zeros(2), np.ones(2))
    assert w2_gaussian(q, p) == pytest.approx(1.0, abs=1e-15)
    q = GaussianParams(np.zeros(1), np.array([2.0]))
    p = GaussianParams(np.zeros(1), np.array([1.0]))
    assert w2_gaussian(q, p) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_w2_symmetric_and_positive(seed):
    rng = np.random.default_rng(seed)
    q = GaussianParams(rng.normal(size=4), rng.uniform(0.1, 3.0, size=4))
    p = GaussianParams(rng.normal(size=4), rng.uniform(0.1, 3.0, size=4))
    assert w2_gaussian(q, p) == w2_gaussian(p, q)
    assert w2_gaussian(q, p) >= 0.0


def test_bce_perfect_fit_at_clamp():
    a = np.zeros((6, 6))
    a[0, 1] = a[1, 0] = 1.0
    p = np.where(a == 1.0, 1.0 - 1e-7, 1e-7)
    np.fill_diagonal(p, 0.0)
    assert bce_reconstruction(p, a) < 1e-6


def test_bce_half_probability_is_ln2():
    a = np.zeros((5, 5))
    a[0, 1] = a[1, 0] = 1.0
    assert bce_reconstruction(np.full((5, 5), 0.5), a) == pytest.approx(np.log(2), abs=1e-12)


def test_bce_permutation_covariant():
    rng = np.random.default_rng(7)
    a = np.zeros((8, 8))
    for u, v in [(0, 1), (2, 5), (3, 4), (6, 7), (1, 6)]:
        a[u, v] = a[v, u] = 1.0
    p = rng.uniform(0.05, 0.95, size=(8, 8))
    p = (p + p.T) / 2
    np.fill_diagonal(p, 0.0)
    perm = rng.permutation(8)
    assert bce_reconstruction(p[np.ix_(perm, perm)], a[np.ix_(perm, perm)]) == pytest.approx(
        bce_reconstruction(p, a), abs=1e-12
    )


def test_bce_shape_mismatch():
    with pytest.raises(ValueError):
        bce_reconstruction(np.full((3, 3), 0.5), np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# Total loss
# ---------------------------------------------------------------------------


def _toy_batch(rng, n=12, bsz=2):
    a = np.zeros((bsz, n, n))
    for i in range(bsz):
        for u, v in [(0, 1), (1, 2), (2, 3)]:
            a[i, u, v] = a[i, v, u] = 1.0
    c = rng.normal(size=(bsz, 12))
    return a, c


def test_total_loss_terms_switch_off(params):
    rng = np.random.default_rng(8)
    a, c = _toy_batch(rng)
    eps_g = rng.normal(size=(2, 8))
    eps_c = rng.normal(size=(2, 8))
    loss, bce, w2, mse = M.build_loss(params, a, c, 0.0, 0.0, 0.0, eps_g, eps_c)
    assert loss.item() == pytest.approx(bce.item(), abs=1e-15)
    # beta=0 means the decoded latent is the posterior sample alone
    mu_q, sigma_q = M.encode_graph_t(ad.constant(a), params)
    z_g = mu_q.data + sigma_q.data * eps_g
    p = M.decode_graph_t(ad.constant(z_g), params).data
    direct = np.mean([bce_reconstruction(p[i], a[i]) for i in range(2)])
    assert loss.item() == pytest.approx(direct, abs=1e-12)


def test_total_loss_finite_on_random_init(params):
    rng = np.random.default_rng(9)
    a, c = _toy_batch(rng)
    terms = M.total_loss(params, a, c, 0.3, 1.0, 1.0, rng)
    for value in (terms.total, terms.bce, terms.w2, terms.attr_mse):
        assert np.isfinite(value)
    params.store.zero_grad()


@pytest.mark.parametrize("seed", range(5))
def test_total_loss_gradcheck(seed):
    p = ModelParams.init(SMALL, seed=seed + 10)
    rng = np.random.default_rng(seed)
    a, c = _toy_batch(rng)
    eps_g = rng.normal(size=(2, 8))
    eps_c = rng.normal(size=(2, 8))
    fn = lambda: M.build_loss(p, a, c, 0.4, 1.0, 1.0, eps_g, eps_c)[0]
    assert ad.grad_check(fn, p.store, max_coords=200, rng=np.random.default_rng(seed)) < 1e-3


def test_total_loss_rejects_bad_beta(params):
    rng = np.random.default_rng(10)
    a, c = _toy_batch(rng)
    with pytest.raises(ValueError):
        M.total_loss(params, a, c, 1.2, 1.0, 1.0, rng)


def test_reparam_draws_concentrate_on_posterior_mean(params):
    # Monte-Carlo consistency: the mean of many reparameterized draws from
    # the posterior approaches mu within 3 sigma / sqrt(N) per coordinate.
    rng = np.random.default_rng(11)
    a = np.zeros((12, 12))
    a[0, 1] = a[1, 0] = 1.0
    gp = encode_graph(a, params)
    n = 10**4
    eps = rng.standard_normal((n, 8))
    draws = gp.mu[None, :] + gp.sigma[None, :] * eps
    bound = 3.0 * gp.sigma / np.sqrt(n)
    assert np.all(np.abs(draws.mean(axis=0) - gp.mu) <= bound + 1e-12)
