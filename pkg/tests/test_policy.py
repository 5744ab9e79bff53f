import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mtcc.nn import DenseLayer, Mlp, ShapeError
from mtcc.policy import (
    ActorNetwork,
    GaussianParams,
    entropy,
    entropy_grads,
    kl_diag_gaussian,
    kl_student_grads,
    log_prob,
    log_prob_grads,
    make_actor,
    make_critic,
    policy_forward,
    sample_action,
)

from .oracles import gauss_logpdf_1d, loop_multihead, max_relative_error, numeric_grads

MC_N = 1_000_000


def _random_params(rng, d, scale=1.0):
    return GaussianParams(rng.normal(size=d) * scale, rng.uniform(-1.5, 1.5, size=d))


# -- forward ---------------------------------------------------------------


def _zero_actor(n_heads=1):
    trunk = Mlp([DenseLayer(np.zeros((4, 2)), np.zeros(4), "tanh")])
    heads = [Mlp([DenseLayer(np.zeros((4, 4)), np.zeros(4), "identity")]) for _ in range(n_heads)]
    return ActorNetwork(trunk, heads, 2)


def test_zero_network_gives_standard_normal():
    p = policy_forward(_zero_actor(), np.array([0.3, -1.0]))
    np.testing.assert_array_equal(p.mean, 0.0)
    np.testing.assert_array_equal(p.log_var, 0.0)


def test_identical_heads_agree(rng):
    actor = make_actor(2, 2, 2, rng)
    for a, b in zip(actor.heads[0].parameters(), actor.heads[1].parameters()):
        b[...] = a
    obs = rng.normal(size=2)
    p0, p1 = policy_forward(actor, obs, 0), policy_forward(actor, obs, 1)
    np.testing.assert_array_equal(p0.mean, p1.mean)
    np.testing.assert_array_equal(p0.log_var, p1.log_var)


def test_policy_matches_loop_oracle(rng):
    actor = make_actor(2, 2, 3, rng)
    obs = rng.normal(size=2)
    p = policy_forward(actor, obs, 2)
    out = loop_multihead(actor, obs, 2)
    np.testing.assert_allclose(p.mean, out[:2], rtol=0, atol=1e-12)
    np.testing.assert_allclose(p.log_var, out[2:], rtol=0, atol=1e-12)


def test_head_out_of_range(rng):
    actor = make_actor(2, 2, 2, rng)
    with pytest.raises(IndexError):
        policy_forward(actor, np.zeros(2), 2)


def test_log_var_is_clamped():
    actor = _zero_actor()
    actor.heads[0].layers[0].bias[:] = [0.0, 0.0, -50.0, 50.0]
    p = policy_forward(actor, np.zeros(2))
    np.testing.assert_array_equal(p.log_var, [-10.0, 4.0])


def test_critic_layouts(rng):
    single = make_critic(2, 1, rng)
    multi = make_critic(2, 6, rng)
    assert single.layout == "single" and len(single.trunk.layers) == 2
    assert len(single.heads[0].layers) == 1
    assert multi.layout == "multitask" and len(multi.trunk.layers) == 1
    assert all(len(h.layers) == 2 for h in multi.heads)
    v, _ = multi.value(rng.normal(size=(5, 2)), 4)
    assert v.shape == (5,)


# -- sampling --------------------------------------------------------------


def test_degenerate_gaussian_returns_mean():
    p = GaussianParams([0.5, -2.0], [-50.0, -50.0])
    a = sample_action(p, np.random.default_rng(0))
    np.testing.assert_allclose(a, p.mean, atol=1e-10)


def test_sample_mean_clt():
    rng = np.random.default_rng(3)
    p = GaussianParams(np.zeros((100_000, 2)), np.zeros((100_000, 2)))
    a = sample_action(p, rng)
    assert np.all(np.abs(a.mean(axis=0)) < 4 / math.sqrt(100_000))


def test_sampling_is_seeded():
    p = GaussianParams([1.0, 2.0], [0.1, -0.3])
    a = sample_action(p, np.random.default_rng(9))
    b = sample_action(p, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


# -- log_prob / entropy ----------------------------------------------------


def test_standard_normal_mode():
    assert log_prob(GaussianParams([0.0], [0.0]), [0.0]) == pytest.approx(-0.9189385, abs=1e-7)


def test_log_prob_factorises(rng):
    p = _random_params(rng, 2)
    a = rng.normal(size=2)
    parts = [log_prob(GaussianParams(p.mean[i:i + 1], p.log_var[i:i + 1]), a[i:i + 1]) for i in range(2)]
    assert log_prob(p, a) == pytest.approx(sum(parts), abs=1e-14)
    expected = sum(gauss_logpdf_1d(a[i], p.mean[i], math.exp(p.log_var[i])) for i in range(2))
    assert log_prob(p, a) == pytest.approx(expected, abs=1e-12)


def test_density_integrates_to_one(rng):
    mu, lv = rng.normal(), rng.uniform(-1, 1)
    sd = math.exp(lv / 2)
    grid = np.linspace(mu - 12 * sd, mu + 12 * sd, 200_001)
    p = GaussianParams(np.full((grid.size, 1), mu), np.full((grid.size, 1), lv))
    dens = np.exp(log_prob(p, grid[:, None]))
    total = np.sum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))
    assert abs(total - 1.0) < 1e-6


def test_standard_entropy():
    assert entropy(GaussianParams([0.0], [0.0])) == pytest.approx(1.4189385, abs=1e-7)


def test_doubling_sigma_adds_log2(rng):
    p = _random_params(rng, 3)
    wider = GaussianParams(p.mean, p.log_var + math.log(4))
    assert entropy(wider) - entropy(p) == pytest.approx(3 * math.log(2), abs=1e-12)


def _mc_entropy(p, rng):
    batch = GaussianParams(np.broadcast_to(p.mean, (MC_N, p.dim)), np.broadcast_to(p.log_var, (MC_N, p.dim)))
    x = -log_prob(batch, sample_action(batch, rng))
    return x.mean(), x.std(ddof=1) / math.sqrt(MC_N)


def test_entropy_matches_monte_carlo(rng):
    p = _random_params(rng, 3)
    est, se = _mc_entropy(p, rng)
    assert abs(entropy(p) - est) < 3 * se


# -- KL --------------------------------------------------------------------


def test_kl_self_is_zero(rng):
    p = _random_params(rng, 4)
    assert kl_diag_gaussian(p, p) == 0.0


def test_kl_unit_shift():
    t = GaussianParams([1.0], [0.0])
    s = GaussianParams([0.0], [0.0])
    assert kl_diag_gaussian(t, s) == 0.5


def test_kl_matches_closed_form_1d(rng):
    mt, ms = rng.normal(size=2)
    vt, vs = rng.uniform(0.3, 3, size=2)
    # KL(S || T) for univariate normals
    closed = math.log(math.sqrt(vt / vs)) + (vs + (ms - mt) ** 2) / (2 * vt) - 0.5
    got = kl_diag_gaussian(GaussianParams([mt], [math.log(vt)]), GaussianParams([ms], [math.log(vs)]))
    assert got == pytest.approx(closed, abs=1e-12)


def _mc_kl(t, s, rng):
    bs = GaussianParams(np.broadcast_to(s.mean, (MC_N, s.dim)), np.broadcast_to(s.log_var, (MC_N, s.dim)))
    bt = GaussianParams(np.broadcast_to(t.mean, (MC_N, t.dim)), np.broadcast_to(t.log_var, (MC_N, t.dim)))
    a = sample_action(bs, rng)
    x = log_prob(bs, a) - log_prob(bt, a)
    return x.mean(), x.std(ddof=1) / math.sqrt(MC_N)


@pytest.mark.parametrize("d", [1, 2, 4])
def test_kl_matches_monte_carlo_under_student(rng, d):
    t, s = _random_params(rng, d), _random_params(rng, d)
    est, se = _mc_kl(t, s, rng)
    assert abs(kl_diag_gaussian(t, s) - est) < 3 * se


def test_kl_dimension_mismatch():
    with pytest.raises(ShapeError):
        kl_diag_gaussian(GaussianParams([0.0], [0.0]), GaussianParams([0.0, 0.0], [0.0, 0.0]))


_vec = arrays(np.float64, (3,), elements=st.floats(-3, 3))


@given(_vec, _vec, _vec, _vec)
def test_kl_nonnegative_and_additive(mt, lt, ms, ls):
    t, s = GaussianParams(mt, lt), GaussianParams(ms, ls)
    kl = kl_diag_gaussian(t, s)
    assert kl >= -1e-12
    per_dim = sum(kl_diag_gaussian(t[slice(i, i + 1)], s[slice(i, i + 1)]) for i in range(3))
    assert kl == pytest.approx(per_dim, rel=1e-12, abs=1e-12)
    if np.array_equal(mt, ms) and np.array_equal(lt, ls):
        assert kl == 0.0


@given(_vec, _vec)
def test_kl_positive_when_params_differ(m, lv):
    t = GaussianParams(m, lv)
    s = GaussianParams(m + 0.1, lv)
    assert kl_diag_gaussian(t, s) > 0


# -- gradients -------------------------------------------------------------


def _fd(fn, arrays_):
    return numeric_grads(arrays_, fn)


def test_log_prob_grads_fd(rng):
    p, a = _random_params(rng, 3), rng.normal(size=3)
    gm, gl = log_prob_grads(p, a)
    num = _fd(lambda: float(log_prob(p, a)), [p.mean, p.log_var])
    assert max_relative_error([gm, gl], num) < 1e-4


def test_entropy_grads_fd(rng):
    p = _random_params(rng, 3)
    num = _fd(lambda: float(entropy(p)), [p.mean, p.log_var])
    assert max_relative_error(list(entropy_grads(p)), num) < 1e-4


def test_kl_grads_fd(rng):
    t, s = _random_params(rng, 4), _random_params(rng, 4)
    num = _fd(lambda: float(kl_diag_gaussian(t, s)), [s.mean, s.log_var])
    assert max_relative_error(list(kl_student_grads(t, s)), num) < 1e-4


def test_actor_backward_through_network_fd(rng):
    actor = make_actor(2, 2, 2, rng)
    obs, act = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))

    def loss():
        p, _ = actor.policy(obs, 1)
        return float(np.sum(log_prob(p, act)) + 0.3 * np.sum(entropy(p)))

    p, cache = actor.policy(obs, 1)
    gm, gl = log_prob_grads(p, act)
    grads = actor.backward_params(cache, gm, gl + 0.3 * 0.5)
    params = actor.parameters()
    idx = [i for i, g in enumerate(grads) if g is not None]
    num = numeric_grads([params[i] for i in idx], loss)
    assert max_relative_error([grads[i] for i in idx], num) < 1e-4


def test_head_isolation(rng):
    actor = make_actor(2, 2, 3, rng)
    p, cache = actor.policy(rng.normal(size=(3, 2)), 1)
    grads = actor.backward_params(cache, np.ones_like(p.mean), np.ones_like(p.log_var))
    for h in (0, 2):
        assert all(g is None for g in grads[actor.head_slice(h)])
    assert all(g is not None for g in grads[actor.head_slice(1)])
    assert any(np.any(g != 0) for g in grads[actor.trunk_slice()])


def test_clamped_log_var_has_no_gradient():
    actor = _zero_actor()
    actor.heads[0].layers[0].bias[:] = [0.0, 0.0, -50.0, 0.0]
    p, cache = actor.policy(np.zeros(2))
    grads = actor.backward_params(cache, np.zeros(2), np.ones(2))
    head_bias_grad = grads[actor.head_slice(0)][1]
    np.testing.assert_array_equal(head_bias_grad, [0.0, 0.0, 0.0, 1.0])
