import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opinion_landscape import potential as P
from opinion_landscape.energy import Energy, bounding_radius, classify, from_json
from opinion_landscape.errors import ConfigError
from opinion_landscape.landscape import enumerate_minima
from opinion_landscape.signed_graph import SignedGraph, l_norm

from conftest import PHI, all_presets, random_graph


def configs():
    """Five configurations used for derivative checks."""
    tri = SignedGraph.from_edges(3, [(0, 1, 1), (0, 2, 1), (1, 2, -2)])
    k3 = SignedGraph.from_edges(3, [(0, 1, 1), (0, 2, 1), (1, 2, 1)])
    return [
        Energy(tri, P.classical(), 0.2, 2),
        Energy(k3, P.two_shelf(), 0.05),
        Energy(SignedGraph.from_edges(2, [(0, 1, 1)]), P.staircase(), 1.0),
        Energy(SignedGraph.from_edges(2, [(0, 1, -1)]), P.quartic_tail(), 0.1),
        Energy(random_graph(3, 5), P.classical(), 0.07),
    ]


def _points(e, count, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-2.5, 2.5, (count, e.n)) * e.potential.m


def _smooth_points(e, X, h):
    """Drop points within reach of a mollified corner or a piece seam."""
    seams = [pc.lo for pc in e.potential.pieces] + list(e.potential.corners)
    ok = np.ones(len(X), dtype=bool)
    for s in seams:
        ok &= np.all(np.abs(np.abs(X) - s) > 2 * max(e.potential.mollify_radius, h), axis=1)
    return X[ok]


@pytest.mark.parametrize("e", configs(), ids=lambda e: e.potential.name)
def test_gradient_matches_finite_differences(e):
    h = 1e-6
    X = _smooth_points(e, _points(e, 1000, 0), h)
    assert len(X) > 300
    I = np.eye(e.n)
    fd = np.stack([(e.value(X + h * I[k]) - e.value(X - h * I[k])) / (2 * h) for k in range(e.n)], 1)
    g = e.gradient(X)
    scale = np.maximum(1.0, np.abs(g).max(axis=1, keepdims=True))
    assert np.max(np.abs(fd - g) / scale) <= 1e-6


@pytest.mark.parametrize("e", configs(), ids=lambda e: e.potential.name)
def test_hessian_matches_finite_differences(e):
    h = 1e-6
    X = _smooth_points(e, _points(e, 1000, 1), h)
    I = np.eye(e.n)
    fd = np.stack([(e.gradient(X + h * I[k]) - e.gradient(X - h * I[k])) / (2 * h) for k in range(e.n)], 1)
    H = e.hessian(X)
    scale = np.maximum(1.0, np.abs(H).max(axis=(1, 2)))
    assert np.max(np.abs(fd - H).max(axis=(1, 2)) / scale) <= 1e-5
    assert np.allclose(H, np.swapaxes(H, 1, 2))


@given(st.integers(0, 10_000), st.floats(0, 1), st.sampled_from(sorted(P.PRESETS)))
def test_convention_identity(seed, kappa, name):
    g = random_graph(seed, 4)
    p = P.make_preset(name)
    e2 = Energy(g, p, kappa, convention=2)
    e1 = Energy(g, p, 2 * kappa, convention=1)
    X = np.random.default_rng(seed).normal(size=(20, 4))
    assert np.array_equal(e2.gradient(X), e1.gradient(X))
    assert np.array_equal(e2.hessian(X), e1.hessian(X))
    assert np.array_equal(e2.value(X), e1.value(X))


@given(st.integers(0, 10_000), st.floats(0, 2))
def test_value_is_pairwise_sum(seed, kappa):
    g = random_graph(seed, 4)
    p = P.classical()
    e = Energy(g, p, kappa)
    x = np.random.default_rng(seed).normal(size=4)
    pair = sum(w * (x[i] - x[j]) ** 2 for i, j, w in g.edges())
    assert e.value(x) == pytest.approx(p.value(x).sum() + 0.5 * kappa * pair, abs=1e-9)


def test_translation_direction_has_no_coupling(triangle):
    e = Energy(triangle, P.classical(), 0.3)
    x = np.random.default_rng(2).normal(size=3)
    assert np.allclose(e.graph.laplacian @ np.ones(3), 0)
    shift = e.value(x + 0.7) - e.at(0).value(x + 0.7)
    assert shift == pytest.approx(e.value(x) - e.at(0).value(x))


def test_evaluate_examples(triangle):
    for p in all_presets():
        e = Energy(random_graph(9, 4), p, 0.4)
        assert np.allclose(e.gradient(np.full(4, p.m)), 0, atol=1e-12)
        assert e.value(np.zeros(4)) == pytest.approx(4 * p.value(0.0))
    e = Energy(triangle, P.classical(), PHI / 6, 2)
    assert np.max(np.abs(e.gradient(np.array([0, PHI, -PHI])))) < 1e-12
    e0 = Energy(triangle, P.staircase(), 0.0)
    x = np.array([0.3, -1.2, 0.7])
    assert np.allclose(e0.gradient(x), e0.potential.d1(x))
    assert np.allclose(e0.hessian(x), np.diag(e0.potential.d2(x)))


def test_bounding_radius_examples(triangle, k3):
    for p in all_presets():
        assert bounding_radius(Energy(triangle, p, 0.0)) == pytest.approx(2 * p.m)
    for kappa in (0.05, 0.3, 2.0):
        e = Energy(triangle, P.classical(), kappa, 2)
        R = bounding_radius(e)
        half = R / 2
        assert half**2 - 1 > 2 * e.coupling * l_norm(triangle.laplacian)
    e = Energy(k3, P.two_shelf(), 1 / 20)
    R = bounding_radius(e)
    ms = enumerate_minima(e, 3000, 4)
    assert np.all(np.abs(ms.coords()) <= R)


def test_classify_kinds(triangle):
    e = Energy(triangle, P.classical(), 0.0, 2)
    assert classify(e, np.ones(3)).kind == "minimum"
    assert classify(e, np.zeros(3)).kind == "maximum"
    cp = classify(e, np.array([1.0, 0.0, -1.0]))
    assert cp.kind == "saddle" and cp.morse_index == 1
    q = Energy(SignedGraph.from_edges(2, [(0, 1, -1)]), P.quartic_tail(), 0.0)
    cp = classify(q, np.ones(2))
    assert cp.kind == "degenerate_minimum" and cp.is_minimum
    assert cp.grad_residual == 0


def test_energy_config_errors():
    good = {"graph": {"n": 2, "edges": [[0, 1, 1]]}, "potential": {"preset": "classical"}}
    assert from_json(good, kappa=0.5).kappa == 0.5
    with pytest.raises(ConfigError):
        from_json({"graph": good["graph"]})
    with pytest.raises(ConfigError):
        from_json({**good, "kappa": -1})
    with pytest.raises(ConfigError):
        from_json({**good, "convention": 3})
    with pytest.raises(ConfigError):
        from_json({**good, "kappa": "lots"})
