import numpy as np
import pytest

from ampo.control import Adam, ControlConfig, ControlResult, Mlp, final_window_mean, train, train_seeds
from ampo.exceptions import ConfigError


def test_mlp_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = Mlp([4, 8, 8, 3], rng, out_scale=0.5)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))
    _, acts = net.forward(x)
    grads = net.backward(acts, w)
    h = 1e-6
    for p, g in zip(net.params, grads):
        for k in rng.choice(p.size, size=min(6, p.size), replace=False):
            i = np.unravel_index(k, p.shape)
            old = p[i]
            p[i] = old + h
            up = np.sum(w * net(x))
            p[i] = old - h
            dn = np.sum(w * net(x))
            p[i] = old
            assert (up - dn) / (2 * h) == pytest.approx(g[i], rel=1e-5, abs=1e-8)


def test_mlp_orthogonal_init():
    net = Mlp([6, 6, 2], np.random.default_rng(1))
    W = net.params[0]
    assert np.allclose(W.T @ W, 2.0 * np.eye(6))


def test_adam_minimizes_quadratic():
    p = [np.array([3.0, -2.0])]
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        opt.step(p, [2 * p[0]])
    assert np.allclose(p[0], 0.0, atol=1e-2)


@pytest.mark.parametrize("kw", [{"env": "pong"}, {"inner": "lbfgs"}, {"total_steps": 10}, {"minibatches": 7},
                                {"gamma": 1.0}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ControlConfig(**kw)


def _small(**kw):
    base = dict(total_steps=8 * 32 * 6, n_envs=8, n_steps=32, hidden=16)
    base.update(kw)
    return ControlConfig(**base)


def test_small_run_is_seed_reproducible():
    a, b = train(_small(seed=3)), train(_small(seed=3))
    assert np.array_equal(a.returns, b.returns, equal_nan=True)
    assert len(a.returns) == 6 and a.steps[-1] == 8 * 32 * 6


@pytest.mark.parametrize("mirror", ["l2", "tsallis:2", "hyperbolic:1"])
def test_other_maps_run(mirror):
    r = train(_small(mirror=mirror, env="acrobot"))
    assert np.all(r.returns[np.isfinite(r.returns)] <= -1)


def test_sgd_inner_loop_runs():
    r = train(_small(inner="sgd", total_steps=8 * 32 * 2, epochs=1))
    assert r.episodes.sum() > 0


def test_threads_match_serial():
    cfg = _small(total_steps=8 * 32 * 2)
    s = train_seeds(cfg, [0, 1])
    t = train_seeds(cfg, [0, 1], workers=2)
    for x, y in zip(s, t):
        assert np.array_equal(x.returns, y.returns, equal_nan=True)


def test_cartpole_learns_quickly():
    r = train(ControlConfig(total_steps=60_000, seed=0))
    first = np.nanmean(r.returns[:3])
    assert final_window_mean(r, 0.2) > 2 * first


def test_final_window_mean_weights_episodes():
    res = ControlResult(np.array([1.0, np.nan, 10.0, 20.0]), np.array([1, 0, 1, 3]), np.arange(4))
    assert final_window_mean(res, 0.5) == pytest.approx((10 + 60) / 4)
    empty = ControlResult(np.array([np.nan]), np.array([0]), np.array([1]))
    assert np.isnan(final_window_mean(empty))
