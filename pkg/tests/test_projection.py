import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize_scalar

from ampo.exceptions import DomainError, ProjectionInfeasibleError
from ampo.mirror_maps import OmegaPotential, parse_mirror_map
from ampo.projection import (
    project,
    project_bisection,
    project_eps_entropy,
    project_euclidean,
    project_softmax,
)

TOKENS = ["entropy", "l2", "eps-entropy:0.1", "eps-entropy:0.5", "tsallis:2", "tsallis:0.5", "hyperbolic:1", "tanh"]
MAPS = [parse_mirror_map(t) for t in TOKENS]

scores = lambda n: arrays(np.float64, n, elements=st.floats(-20, 20))  # noqa: E731


def _objective(p, x):
    # projection of grad h*(x) minimizes sum_a h(p_a) - <x, p> over the simplex
    return lambda q: float(np.sum(p.h_coord(q)) - np.dot(x, q))


def _oracle_2d(p, x):
    res = minimize_scalar(
        lambda t: _objective(p, x)(np.array([t, 1 - t])), bounds=(0, 1), method="bounded", options={"xatol": 1e-12}
    )
    return np.array([res.x, 1 - res.x])


def test_softmax_example():
    r = project_softmax([1.0, 0.0])
    e = np.e / (np.e + 1)
    np.testing.assert_allclose(r.dist, [e, 1 - e], atol=1e-15)
    assert r.dist[0] == pytest.approx(0.7310586, abs=1e-7)


def test_euclidean_examples():
    np.testing.assert_array_equal(project_euclidean([2.0, 0.0]).dist, [1.0, 0.0])
    np.testing.assert_allclose(project_euclidean([0.5, 0.3, 0.2]).dist, [0.5, 0.3, 0.2], atol=1e-15)
    np.testing.assert_allclose(project_euclidean([1.0, 1.0, -5.0]).dist, [0.5, 0.5, 0.0], atol=1e-15)


def test_eps_entropy_example():
    r = project_eps_entropy([3.0, 0.0], 0.5)
    np.testing.assert_allclose(r.dist, [1.0, 0.0], atol=1e-12)
    oracle = _oracle_2d(OmegaPotential("eps-entropy", 0.5), np.array([3.0, 0.0]))
    np.testing.assert_allclose(oracle, [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
@pytest.mark.parametrize("x", [[1.0, 0.0], [0.3, -0.4], [2.0, 2.5], [-1.0, 3.0], [0.0, 0.0]])
def test_two_action_projection_matches_scalar_minimization(p, x):
    x = np.asarray(x)
    got = project(x, p).dist
    want = _oracle_2d(p, x)
    np.testing.assert_allclose(got, want, atol=1e-5)


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
@settings(max_examples=80, deadline=None)
@given(x=scores(6))
def test_output_is_distribution_with_matching_normalizer(p, x):
    r = project(x, p)
    assert np.all(r.dist >= 0)
    assert abs(r.dist.sum() - 1.0) <= 1e-12
    # p[a] = max(0, phi(x[a] + lam)) up to the bisection precision
    rebuilt = np.maximum(p.phi(x + r.lam), 0.0)
    assert np.abs(rebuilt - r.dist).sum() <= 2e-8


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
@settings(max_examples=60, deadline=None)
@given(x=scores(5), c=st.floats(-10, 10))
def test_shift_invariance(p, x, c):
    a = project(x, p)
    b = project(x + c, p)
    assert np.abs(a.dist - b.dist).sum() <= 4e-8
    if p.kind in ("entropy", "l2", "eps-entropy"):
        assert b.lam == pytest.approx(a.lam - c, abs=1e-9)


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
@settings(max_examples=60, deadline=None)
@given(x=scores(5))
def test_order_preserving(p, x):
    d = project(x, p).dist
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(d[order]) >= -1e-8)


@pytest.mark.parametrize("p", [m for m in MAPS if m.kind in ("entropy", "l2", "eps-entropy")], ids=str)
@settings(max_examples=100, deadline=None)
@given(x=scores(7))
def test_bisection_agrees_with_closed_forms(p, x):
    exact = project(x, p).dist
    bis = project_bisection(x, p, precision=1e-10).dist
    assert np.abs(exact - bis).sum() <= 2e-10


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
def test_rows_are_projected_independently(p):
    rng = np.random.default_rng(3)
    X = rng.normal(0, 3, size=(9, 4))
    batch = project(X, p)
    assert batch.dist.shape == (9, 4) and np.shape(batch.lam) == (9,)
    for i in range(9):
        one = project(X[i], p)
        np.testing.assert_allclose(batch.dist[i], one.dist, atol=1e-12)


@pytest.mark.parametrize("p", MAPS, ids=TOKENS)
def test_single_action_is_trivial(p):
    if p.kind == "tanh":
        with pytest.raises(ProjectionInfeasibleError):
            project([0.7], p)
        return
    np.testing.assert_allclose(project([0.7], p).dist, [1.0])


def test_precision_controls_accuracy():
    p = OmegaPotential("tsallis", 0.5)
    x = np.array([0.4, -1.2, 2.0, 0.1])
    ref = project_bisection(x, p, precision=1e-14).dist
    for prec in (1e-2, 1e-4, 1e-6, 1e-8):
        assert np.abs(project_bisection(x, p, precision=prec).dist - ref).sum() <= prec


def test_rejects_bad_input():
    with pytest.raises(DomainError):
        project([1.0, np.nan], OmegaPotential("entropy"))
    with pytest.raises(DomainError):
        project([], OmegaPotential("l2"))
    with pytest.raises(DomainError):
        project_bisection([1.0, 0.0], OmegaPotential("tanh"), precision=0.0)
    with pytest.raises(DomainError):
        project_eps_entropy([1.0, 0.0], 0.0)


def test_extreme_scores_stay_finite():
    for p in MAPS:
        r = project([700.0, -700.0, 0.0], p)
        assert np.all(np.isfinite(r.dist)) and r.dist.sum() == pytest.approx(1.0)
