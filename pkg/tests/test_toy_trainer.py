import numpy as np
import pytest

from vla_rewards.grpo import GroupTooSmall, GrpoConfig, group_advantages
from vla_rewards.toy_trainer import (
    DEFAULT_SEEDS,
    SoftmaxPolicy,
    UnknownToken,
    cell_center,
    cell_token,
    decode_tokens,
    default_tasks,
    loss_and_logit_grad,
    make_task,
    render_response,
    sample_group,
    total_variation,
    train,
)
from vla_rewards.response_format import format_reward
from vla_rewards.rewards import composite_reward

# seed list for the beta = 0 moving-average property
MA_SEEDS = tuple(range(20))


def test_decode_examples():
    np.testing.assert_array_equal(decode_tokens([cell_token(0, 0), cell_token(9, 9)]), [[50, 50], [950, 950]])
    assert decode_tokens([7, 7, 7]).shape == (1, 2)
    with pytest.raises(UnknownToken):
        decode_tokens([100])
    with pytest.raises(ValueError):
        decode_tokens([])


def test_empty_sequence_gets_minimal_reward():
    raw = render_response([])
    assert format_reward(raw, "trajectory") == 0
    assert composite_reward(raw, [[0, 0], [10, 0]], "trajectory") == 0.0


def test_cell_center_formula():
    for tok in range(100):
        iy, ix = divmod(tok, 10)
        assert cell_center(tok) == ((ix + 0.5) * 100, (iy + 0.5) * 100)


@pytest.mark.parametrize("seed", range(12))
def test_task_invariants(seed):
    t = make_task(seed)
    assert tuple(t.gt_traj[0]) == t.start and tuple(t.gt_traj[-1]) == t.goal
    assert len(set(t.tokens)) == len(t.tokens) == 6
    steps = np.diff(t.gt_traj, axis=0) / 100
    assert np.all(np.abs(steps) <= 1) and np.all(np.abs(steps).sum(axis=1) > 0)
    assert len({tuple(s) for s in steps}) <= 2  # straight or one bend
    u = make_task(seed)
    assert u.tokens == t.tokens


def test_sample_group_deterministic():
    pol = SoftmaxPolicy(np.random.default_rng(0).normal(size=(6, 100)))
    task = default_tasks()[0]
    a = sample_group(pol, task, 4, 123)
    b = sample_group(pol, task, 4, 123)
    assert a.outputs == b.outputs
    for x, y in zip(a.logp_old, b.logp_old):
        assert x.tobytes() == y.tobytes()
    np.testing.assert_array_equal(a.rewards, b.rewards)


def test_logps_match_policy():
    pol = SoftmaxPolicy(np.random.default_rng(1).normal(size=(6, 100)))
    g = sample_group(pol, default_tasks()[0], 8, 0)
    p = pol.probs()
    for o, lp in zip(g.outputs, g.logp_old):
        np.testing.assert_allclose(lp, np.log(p[np.arange(6), list(o)]), rtol=1e-12)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-12)


def test_one_hot_policy_reproduces_ground_truth():
    task = default_tasks()[1]
    logits = np.full((6, 100), -50.0)
    logits[np.arange(6), list(task.tokens)] = 50.0
    g = sample_group(SoftmaxPolicy(logits), task, 6, 0)
    assert all(o == task.tokens for o in g.outputs)
    assert np.all(g.rewards == 1.0)
    assert np.all(group_advantages(g.rewards) == 0)


def test_group_too_small():
    with pytest.raises(GroupTooSmall):
        sample_group(SoftmaxPolicy.uniform(1), default_tasks()[0], 1, 0)


def test_zero_iterations():
    pol = SoftmaxPolicy.uniform(3)
    before = pol.logits.copy()
    log = train(default_tasks(), pol, iterations=0)
    assert len(log) == 0
    np.testing.assert_array_equal(pol.logits, before)
    assert log.summary()["improvement"] is None


def test_train_deterministic_and_logged():
    tasks = default_tasks()
    logs = []
    for _ in range(2):
        pol = SoftmaxPolicy.uniform(3)
        logs.append(train(tasks, pol, iterations=8, seed=4, group_size=8))
    assert logs[0].to_csv() == logs[1].to_csv()
    assert len(logs[0]) == 8
    assert all(0 <= c <= 1 for c in logs[0].clip_fraction)
    assert logs[0].to_csv().splitlines()[0] == "iteration,mean_reward,loss,kl,clip_fraction"


def _fd_check(rng, horizon=3, n=4, h=1e-5):
    task = make_task(int(rng.integers(1000)), horizon=horizon)
    pol = SoftmaxPolicy(rng.normal(size=(horizon, 100)), horizon=horizon)
    ref = SoftmaxPolicy(rng.normal(size=(horizon, 100)), horizon=horizon)
    group = sample_group(pol, task, n, rng, ref=ref)
    # move away from the sampling policy so ratios differ from 1
    cur = SoftmaxPolicy(pol.logits + rng.normal(0, 0.3, size=pol.logits.shape), horizon=horizon)
    cfg = GrpoConfig(kl_beta=float(rng.uniform(0, 0.5)))
    _, grad, _, _ = loss_and_logit_grad(cur, [(0, group)], cfg)
    fd = np.zeros_like(grad)
    for idx in zip(*np.nonzero(np.ones_like(grad))):
        z = cur.logits.copy()
        z[idx] += h
        up = loss_and_logit_grad(SoftmaxPolicy(z, horizon=horizon), [(0, group)], cfg)[0]
        z[idx] -= 2 * h
        down = loss_and_logit_grad(SoftmaxPolicy(z, horizon=horizon), [(0, group)], cfg)[0]
        fd[idx] = (up - down) / (2 * h)
    return grad, fd


def test_logit_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        grad, fd = _fd_check(rng)
        rel = np.abs(grad - fd) / np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-6)
        assert rel.max() < 1e-4


def test_beta_zero_moving_average_rises():
    task = default_tasks()[:1]
    ok = 0
    for seed in MA_SEEDS:
        pol = SoftmaxPolicy.uniform(1)
        r = np.asarray(train(task, pol, GrpoConfig(kl_beta=0.0), iterations=60, seed=seed).mean_reward)
        ma = np.convolve(r, np.ones(10) / 10, mode="valid")
        ok += ma[-1] >= ma[0]
    assert ok >= 0.95 * len(MA_SEEDS)


def test_total_variation_zero_on_self():
    pol = SoftmaxPolicy(np.random.default_rng(0).normal(size=(6, 100)))
    assert np.all(total_variation(pol, pol.copy()) == 0)


def test_default_seed_list():
    assert DEFAULT_SEEDS == tuple(range(10))


def test_policy_validation():
    with pytest.raises(ValueError):
        SoftmaxPolicy(np.zeros((6, 99)))
    with pytest.raises(ValueError):
        SoftmaxPolicy(np.zeros((5, 100)))
    with pytest.raises(ValueError):
        SoftmaxPolicy(np.full((6, 100), np.inf))
