import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtcc.a2c import (
    A2CLearner,
    RolloutSegment,
    TrainConfig,
    a2c_loss_and_grads,
    a2c_update,
    collect_segment,
    compute_advantages_returns,
    seed_streams,
    train_single,
)
from mtcc.checkpoint import dumps
from mtcc.envs import EnvCursor, EnvState, make_variant, observe
from mtcc.nn import NonFiniteError, RmsPropState
from mtcc.policy import log_prob, make_actor, make_critic, policy_forward

from .oracles import brute_force_returns, max_relative_error, numeric_grads


@pytest.fixture
def nets(rng):
    return make_actor(2, 2, 1, rng), make_critic(2, 1, rng)


def _segment(rewards, values, bootstrap, done=False, rng=None):
    k = len(rewards)
    rng = rng or np.random.default_rng(0)
    return RolloutSegment(
        observations=rng.normal(size=(k, 2)),
        actions=rng.normal(size=(k, 2)),
        rewards=np.array(rewards, dtype=float),
        values=np.array(values, dtype=float),
        done=done,
        bootstrap_value=0.0 if done else bootstrap,
    )


def test_fresh_episode_segment(nets, rng):
    actor, critic = nets
    cursor = EnvCursor(make_variant("Base"))
    seg = collect_segment(cursor, actor, critic, 0, 5, rng)
    assert len(seg) == 5 and not seg.done
    assert seg.observations.shape == (5, 2) and seg.actions.shape == (5, 2)
    v, _ = critic.value(cursor.obs)
    assert seg.bootstrap_value == pytest.approx(float(v), abs=1e-12)
    for t in range(5):
        assert seg.values[t] == pytest.approx(float(critic.value(seg.observations[t])[0]), abs=1e-12)


def test_segment_truncated_at_episode_end(nets, rng):
    actor, critic = nets
    spec = make_variant("Base")
    cursor = EnvCursor(spec)
    cursor.state = EnvState(x=0.0, v=1.0, t=198)
    cursor.obs = observe(cursor.state, spec)
    seg = collect_segment(cursor, actor, critic, 0, 5, rng)
    assert len(seg) == 2 and seg.done and seg.bootstrap_value == 0.0
    assert cursor.state == EnvState()


def test_collection_is_seeded(nets):
    actor, critic = nets
    segs = []
    for _ in range(2):
        cursor = EnvCursor(make_variant("Base"))
        rng = np.random.default_rng(5)
        segs.append([collect_segment(cursor, actor, critic, 0, 5, rng) for _ in range(3)])
    for a, b in zip(*segs):
        assert a.actions.tobytes() == b.actions.tobytes()
        assert a.rewards.tobytes() == b.rewards.tobytes()


def test_advantage_all_zero():
    adv, ret = compute_advantages_returns(_segment([0.0], [0.0], 0.0, done=True), 0.99)
    assert adv.tolist() == [0.0] and ret.tolist() == [0.0]


def test_advantage_hand_example():
    adv, ret = compute_advantages_returns(_segment([1.0, 1.0], [2.0, 5.0], 10.0), 0.9)
    np.testing.assert_allclose(ret, [10.0, 10.0], atol=1e-12)
    np.testing.assert_allclose(adv, [8.0, 5.0], atol=1e-12)


@given(
    st.integers(1, 5).flatmap(lambda k: st.tuples(
        st.lists(st.floats(-10, 10), min_size=k, max_size=k),
        st.lists(st.floats(-100, 100), min_size=k, max_size=k),
    )),
    st.floats(-100, 100),
    st.floats(0, 1),
    st.booleans(),
)
def test_advantages_match_brute_force(rv, bootstrap, gamma, done):
    rewards, values = rv
    seg = _segment(rewards, values, bootstrap, done)
    adv, ret = compute_advantages_returns(seg, gamma)
    b_adv, b_ret = brute_force_returns(rewards, values, seg.bootstrap_value, gamma)
    np.testing.assert_allclose(ret, b_ret, rtol=0, atol=1e-10)
    np.testing.assert_allclose(adv, b_adv, rtol=0, atol=1e-10)


def test_stationary_point_leaves_params(nets):
    actor, critic = nets
    seg = _segment([0.0, 0.0], [0.0, 0.0], 0.0)
    # make returns equal the critic's own values: all-zero rewards, zero-valued critic
    for p in critic.heads[0].parameters():
        p[...] = 0.0
    seg.values = critic.value(seg.observations)[0]
    seg.bootstrap_value = float(critic.value(np.zeros(2))[0])
    before = [p.copy() for p in actor.parameters() + critic.parameters()]
    cfg = TrainConfig(entropy_coef=0.0)
    a_opt = RmsPropState.for_params(actor.parameters())
    c_opt = RmsPropState.for_params(critic.parameters())
    _, ga, gc = a2c_loss_and_grads(actor, critic, seg, cfg)
    assert all(np.all(g == 0) for g in ga + gc if g is not None)
    a2c_update(actor, critic, seg, cfg, a_opt, c_opt)
    for b, p in zip(before, actor.parameters() + critic.parameters()):
        assert b.tobytes() == p.tobytes()


def test_entropy_term_raises_log_var(rng):
    actor, critic = make_actor(2, 2, 1, rng), make_critic(2, 1, rng)
    head = actor.heads[0]
    for p in head.parameters():
        p[...] = 0.0
    seg = _segment([0.0], [0.0], 0.0, done=True)
    seg.values = critic.value(seg.observations)[0]
    seg.rewards = seg.values.copy()  # zero advantage: only entropy drives the actor
    cfg = TrainConfig(entropy_coef=0.01)
    _, ga, _ = a2c_loss_and_grads(actor, critic, seg, cfg)
    bias_grad = ga[actor.head_slice(0)][1]
    assert np.all(bias_grad[2:] < 0)  # descent direction increases log_var
    np.testing.assert_allclose(bias_grad[:2], 0.0, atol=1e-15)
    a_opt = RmsPropState.for_params(actor.parameters())
    c_opt = RmsPropState.for_params(critic.parameters())
    a2c_update(actor, critic, seg, cfg, a_opt, c_opt)
    assert np.all(policy_forward(actor, seg.observations[0]).log_var > 0)


def test_full_loss_gradient_fd(rng):
    actor, critic = make_actor(2, 2, 1, rng), make_critic(2, 1, rng)
    seg = _segment(rng.normal(size=5).tolist(), rng.normal(size=5).tolist(), 0.7, rng=rng)
    cfg = TrainConfig()
    _, ga, gc = a2c_loss_and_grads(actor, critic, seg, cfg)

    def loss():
        return a2c_loss_and_grads(actor, critic, seg, cfg)[0].total

    num_a = numeric_grads(actor.parameters(), loss)
    num_c = numeric_grads(critic.parameters(), loss)
    assert max_relative_error(ga, num_a) < 1e-4
    assert max_relative_error(gc, num_c) < 1e-4


def test_positive_advantage_raises_action_probability(nets):
    actor, critic = nets
    seg = _segment([5.0], [0.0], 0.0, done=True)
    seg.values = critic.value(seg.observations)[0]
    cfg = TrainConfig(entropy_coef=0.0, lr=1e-4)
    before = log_prob(policy_forward(actor, seg.observations[0]), seg.actions[0])
    a2c_update(actor, critic, seg, cfg, RmsPropState.for_params(actor.parameters()),
               RmsPropState.for_params(critic.parameters()))
    after = log_prob(policy_forward(actor, seg.observations[0]), seg.actions[0])
    assert after > before


def test_non_finite_loss_aborts(nets):
    actor, critic = nets
    seg = _segment([np.inf], [0.0], 0.0, done=True)
    with pytest.raises(NonFiniteError):
        a2c_update(actor, critic, seg, TrainConfig(), RmsPropState.for_params(actor.parameters()),
                   RmsPropState.for_params(critic.parameters()))


def test_every_step_used_once(nets):
    actor, critic = nets
    learner = A2CLearner(actor, critic, TrainConfig(), np.random.default_rng(0))
    cursor = EnvCursor(make_variant("Base"))
    assert learner.run(cursor, 0, 23) == 23
    assert learner.updates == 5
    assert cursor.state.t == 23


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(gamma=1.5)
    with pytest.raises(ValueError):
        TrainConfig(t_max=0)


def test_default_hyperparameters():
    c = TrainConfig()
    assert (c.lr, c.t_max, c.entropy_coef, c.gamma) == (0.0007, 5, 0.01, 0.99)


def test_zero_budget_returns_initial_weights():
    cfg = TrainConfig(total_env_steps=0, seed=3)
    ckpt, rows = train_single("Base", cfg)
    assert rows == []
    init_rng = seed_streams(3)[0]
    fresh = make_actor(2, 2, 1, init_rng)
    for a, b in zip(ckpt.actor.parameters(), fresh.parameters()):
        assert a.tobytes() == b.tobytes()


def test_training_is_reproducible():
    cfg = TrainConfig(total_env_steps=1500, eval_every=500, seed=11, n_eval_rollouts=3)
    a = train_single("SmallDrag", cfg)
    b = train_single("SmallDrag", cfg)
    assert dumps(a[0]) == dumps(b[0])
    assert a[1] == b[1]
    assert [r.env_steps for r in a[1]] == [500, 1000, 1500]


def test_short_training_improves_on_base():
    cfg = TrainConfig(total_env_steps=20_000, eval_every=20_000, seed=0)
    ckpt, rows = train_single("Base", cfg)
    init = train_single("Base", cfg.replace(total_env_steps=0))[0]
    from mtcc.evaluation import evaluate

    assert rows[-1].mean_return > evaluate(init.actor, "Base", 0, 20, 0).mean_return
