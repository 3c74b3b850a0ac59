import numpy as np
import pytest

from ampo.envs import MAX_STEPS, Acrobot, CartPole, EnvState, make_env, rollout_returns
from ampo.exceptions import ConfigError


@pytest.mark.parametrize("name,box", [("cartpole", 0.05), ("acrobot", 0.1)])
def test_reset_is_seeded_and_boxed(name, box):
    env = make_env(name)
    a = env.reset(np.random.default_rng(4), 64)
    b = env.reset(np.random.default_rng(4), 64)
    assert np.array_equal(a.x, b.x)
    assert np.all(np.abs(a.x) <= box)
    assert np.all(a.steps == 0)
    assert env.observe(a).shape == (64, env.obs_dim)


def test_unknown_env():
    with pytest.raises(ConfigError):
        make_env("pendulum")


@pytest.mark.parametrize("bad", [2, -1, 0.5])
def test_cartpole_rejects_bad_actions(bad):
    env = CartPole()
    with pytest.raises(ValueError):
        env.step(env.reset(np.random.default_rng(0)), np.array([bad]))


def test_cartpole_single_euler_step():
    # hand-computed from the equations of motion at the upright rest state
    env = CartPole()
    s = EnvState(np.zeros((1, 4)), np.zeros(1, dtype=int))
    nxt, r, done = env.step(s, np.array([1]))
    total, pml = 1.1, 0.05
    temp = 10.0 / total
    th_acc = -temp / (0.5 * (4 / 3 - 0.1 / total))
    x_acc = temp - pml * th_acc / total
    assert np.allclose(nxt.x[0], [0.0, 0.02 * x_acc, 0.0, 0.02 * th_acc], rtol=0, atol=1e-15)
    assert r[0] == 1.0 and not done[0]


def test_cartpole_alternating_force_survives():
    env = CartPole()
    s = env.reset(np.random.default_rng(0), 8)
    for t in range(10):
        s, _, done = env.step(s, np.full(8, t % 2))
        assert not done.any()


def test_cartpole_terminates_on_bounds():
    env = CartPole()
    s = EnvState(np.array([[2.39, 5.0, 0.0, 0.0], [0.0, 0.0, 0.2, 3.0]]), np.zeros(2, dtype=int))
    _, _, done = env.step(s, np.array([1, 1]))
    assert done.all()


def test_step_cap():
    env = CartPole()
    s = EnvState(np.zeros((1, 4)), np.array([MAX_STEPS - 1]))
    _, _, done = env.step(s, np.array([0]))
    assert done[0]


@pytest.mark.parametrize("name", ["cartpole", "acrobot"])
def test_steps_are_bit_reproducible(name):
    env = make_env(name)
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(11)
        s = env.reset(rng, 4)
        for _ in range(30):
            s, _, _ = env.step(s, rng.integers(env.n_actions, size=4))
        outs.append(s.x)
    assert np.array_equal(outs[0], outs[1])


def test_return_bounds():
    rng = np.random.default_rng(0)
    cp = rollout_returns(CartPole(), lambda o, g: g.integers(2, size=len(o)), 50, rng)
    assert np.all((cp >= 1) & (cp <= MAX_STEPS))
    ac = rollout_returns(Acrobot(), lambda o, g: g.integers(3, size=len(o)), 20, rng)
    assert np.all((ac >= -MAX_STEPS) & (ac <= -1))


def test_acrobot_random_policy_is_poor():
    ac = rollout_returns(Acrobot(), lambda o, g: g.integers(3, size=len(o)), 20, np.random.default_rng(1))
    assert ac.mean() <= -80


def test_acrobot_energy_conserved_without_torque():
    # from the reset box; single-step RK4 at dt = 0.2 drifts more at high energy
    env = Acrobot()
    s = env.reset(np.random.default_rng(0), 64).x
    e = env.energy(s)
    for _ in range(500):
        s = env.integrate(s, np.zeros(64))
        e_next = env.energy(s)
        assert np.max(np.abs(e_next - e) / np.abs(e)) <= 1e-3  # per-step drift
        e = e_next


def test_acrobot_derivatives_finite_difference():
    # RK4 over a tiny step should agree with the first-order Taylor step
    env = Acrobot()
    s = np.array([[0.4, 0.7, -0.3, 0.5]])
    tq = np.array([1.0])
    env_small = Acrobot()
    env_small.dt = 1e-6
    step = (env_small.integrate(s, tq) - s) / 1e-6
    assert np.allclose(step, env.derivatives(s, tq), rtol=1e-5, atol=1e-8)


def test_acrobot_goal_condition():
    env = Acrobot()
    up = EnvState(np.array([[np.pi, 0.0, 0.0, 0.0]]), np.zeros(1, dtype=int))
    down = EnvState(np.zeros((1, 4)), np.zeros(1, dtype=int))
    assert env.terminated(up)[0] and not env.terminated(down)[0]


def test_acrobot_observation_and_clipping():
    env = Acrobot()
    s = EnvState(np.array([[0.0, 0.0, 100.0, -100.0]]), np.zeros(1, dtype=int))
    nxt, r, _ = env.step(s, np.array([2]))
    assert abs(nxt.x[0, 2]) <= 4 * np.pi and abs(nxt.x[0, 3]) <= 9 * np.pi
    assert np.all(np.abs(nxt.x[0, :2]) <= np.pi)
    obs = env.observe(nxt)
    assert np.allclose(obs[0, 0] ** 2 + obs[0, 1] ** 2, 1.0)
    assert r[0] == -1.0
