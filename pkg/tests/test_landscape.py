import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opinion_landscape import potential as P
from opinion_landscape.energy import Energy, bounding_radius
from opinion_landscape.errors import EmptyMinimaSet, MissingBaseline, NotBalanced
from opinion_landscape.landscape import (MinimaSet, SweepRecord, _descend_batch, descend,
                                         enumerate_minima, global_minimum_check, is_monotone,
                                         nonmonotonicity_index, sample_starts, sweep_counts)
from opinion_landscape.signed_graph import SignedGraph, harary_partition, planted_balanced_graph

from conftest import all_presets


def test_descend_decoupled():
    e = Energy(SignedGraph.from_edges(2, [(0, 1, 1)]), P.classical(), 0.0)
    cp = descend(e, [0.9, -1.2])
    assert np.allclose(cp.coords, [1, -1], atol=1e-10)
    assert cp.is_minimum


def test_descend_reaches_phi_branch(triangle):
    from opinion_landscape.continuation import continue_branch
    e = Energy(triangle, P.classical(), 0.2, 2)
    cp = descend(e, [0.1, 1.5, -1.5])
    assert cp.is_minimum and cp.grad_residual < 1e-10
    # oracle: the branch from (1, 1, -1) that merges into (0, phi, -phi) at phi/6
    branch = continue_branch(e.at(0.0), [1.0, 1.0, -1.0], 0.2)
    assert np.allclose(cp.coords, branch.last.coords, atol=1e-8)


def test_descend_fixed_point(triangle):
    e = Energy(triangle, P.classical(), 0.05, 2)
    x = enumerate_minima(e, 500, 1).minima[0].coords
    assert np.allclose(descend(e, x).coords, x, atol=1e-12)


def test_descend_energy_never_increases(triangle):
    for p, g in ((P.classical(), triangle), (P.plateau(), SignedGraph.from_edges(2, [(0, 1, 1)]))):
        e = Energy(g, p, 0.075)
        rng = np.random.default_rng(3)
        for _ in range(20):
            trace = []
            descend(e, rng.uniform(-2, 2, g.n), trace=trace)
            assert all(b < a for a, b in zip(trace, trace[1:]))


def test_sample_starts_prefix_and_chunking():
    a = sample_starts(11, 0, 10_000, 3, 2.0)
    b = np.vstack([sample_starts(11, k, 1234, 3, 2.0)[:min(1234, 10_000 - k)]
                   for k in range(0, 10_000, 1234)])
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 2.0)
    assert not np.array_equal(a, sample_starts(12, 0, 10_000, 3, 2.0))
    s = sample_starts(11, 0, 4096, 2, 1.0, stratified=True)
    assert len(np.unique(np.floor((s[:, 0] + 1) / 2 * 4096))) == 4096


@pytest.mark.parametrize("n", [2, 3])
def test_zero_coupling_corners(n):
    g = SignedGraph.from_edges(n, [(i, j, 1) for i in range(n) for j in range(i + 1, n)])
    for p in all_presets():
        ms = enumerate_minima(Energy(g, p, 0.0), 10_000, 5)
        corners = np.array(list(itertools.product([-p.m, p.m], repeat=n)))
        assert ms.count == 2**n
        assert np.max(np.abs(np.sort(ms.coords(), axis=0) - np.sort(corners, axis=0))) <= 1e-8


def test_example_pair_counts(pair_pos, pair_neg):
    assert enumerate_minima(Energy(pair_neg, P.quartic_tail(), 0.1), 20_000, 2).count == 6
    assert enumerate_minima(Energy(pair_pos, P.plateau(), 3 / 40), 20_000, 2).count >= 6


def test_collapse_on_triangle(triangle):
    e = Energy(triangle, P.classical(), 0.05, 2)
    assert enumerate_minima(e, 10_000, 1).count == 8
    ms = enumerate_minima(e.at(0.4), 10_000, 1)
    assert ms.count == 2
    x = ms.coords()
    assert np.allclose(np.abs(x[:, 0]), 0, atol=1e-9)
    assert np.allclose(x[:, 1], -x[:, 2])


def test_minima_reverify(triangle):
    e = Energy(triangle, P.classical(), 0.1, 2)
    ms = enumerate_minima(e, 5000, 3)
    for p in ms.minima:
        assert np.max(np.abs(e.gradient(p.coords))) < 1e-10
        assert np.linalg.eigvalsh(e.hessian(p.coords))[0] > 1e-8
        assert p.morse_index == 0
    C = ms.coords()
    for a, b in itertools.combinations(range(len(C)), 2):
        assert np.max(np.abs(C[a] - C[b])) > ms.dedup_tolerance
    for x in C:
        assert ms.contains(-x)


def test_determinism_across_threads(k3):
    e = Energy(k3, P.two_shelf(), 0.06)
    a = enumerate_minima(e, 9000, 7, threads=1)
    b = enumerate_minima(e, 9000, 7, threads=4)
    assert np.array_equal(a.coords(), b.coords())
    assert a.digest() == b.digest()


def test_budget_monotone(k3):
    e = Energy(k3, P.two_shelf(), 0.04)
    small = enumerate_minima(e, 1000, 9)
    big = enumerate_minima(e, 6000, 9)
    assert all(big.contains(x) for x in small.coords())
    assert big.count >= small.count


def test_descend_batch_is_per_sample(triangle):
    e = Energy(triangle, P.classical(), 0.1, 2)
    X = sample_starts(3, 0, 300, 3, 2.5)
    full, _ = _descend_batch(e, X)
    parts = np.vstack([_descend_batch(e, X[k:k + 37])[0] for k in range(0, 300, 37)])
    assert np.array_equal(full, parts)


def test_sweep_examples(triangle):
    e = Energy(triangle, P.classical(), 0.0, 2)
    rec = sweep_counts(e, [0.05, 0.40], 5000, 1)
    assert rec.counts == [8, 2]
    rec = sweep_counts(e, [0.0], 2000, 1)
    assert rec.counts == [8] and len(rec.rows()) == 1
    with pytest.raises(ValueError):
        sweep_counts(e, [0.2, 0.1], 100, 1)


def test_nonmonotonicity_index():
    rec = SweepRecord([0.0, 0.1, 0.2], [8, 14, 6], ["", "", ""])
    assert nonmonotonicity_index(rec) == 6 and not is_monotone(rec)
    assert nonmonotonicity_index(SweepRecord([0.0, 0.1], [4, 4], ["", ""])) == 0
    with pytest.raises(MissingBaseline):
        nonmonotonicity_index(SweepRecord([0.1], [4], [""]))


def test_ring_with_positive_weights_is_monotone():
    ring = SignedGraph.from_edges(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)])
    e = Energy(ring, P.classical(), 0.0)
    rec = sweep_counts(e, [0.0, 0.05, 0.1, 0.2, 0.3, 0.5], 3000, 2)
    assert nonmonotonicity_index(rec) == 0 and is_monotone(rec)


def _balanced_check(g, kappa, convention=1, budget=3000):
    e = Energy(g, P.classical(), kappa, convention)
    return global_minimum_check(e, enumerate_minima(e, budget, 1), harary_partition(g))


def test_global_minimum_examples():
    v = _balanced_check(SignedGraph.from_edges(3, [(0, 1, 2), (1, 2, 1), (0, 2, 0.5)]), 0.3)
    assert v.ok and len(set(v.signs)) == 1
    tri = SignedGraph.from_edges(3, [(0, 1, -1), (0, 2, -1), (1, 2, 1)])
    for c in (1, 2):
        v = _balanced_check(tri, 0.1, c)
        assert v.ok and v.signs in ((1, -1, -1), (-1, 1, 1))
    v = _balanced_check(SignedGraph.from_edges(2, [(0, 1, -1)]), 0.1)
    assert v.ok and v.signs[0] == -v.signs[1]


def test_global_minimum_errors(triangle):
    e = Energy(triangle, P.classical(), 0.1)
    ms = enumerate_minima(e, 100, 1)
    with pytest.raises(NotBalanced):
        global_minimum_check(e, ms, harary_partition(triangle))
    pair = SignedGraph.from_edges(2, [(0, 1, 1)])
    empty = MinimaSet([], 1e-5, 0, 0, 1.0, 0.1)
    with pytest.raises(EmptyMinimaSet):
        global_minimum_check(Energy(pair, P.classical(), 0.1), empty, harary_partition(pair))


@settings(max_examples=8)
@given(st.integers(0, 1000))
def test_sign_pattern_stable_in_kappa(seed):
    rng = np.random.default_rng(seed)
    g, sides = planted_balanced_graph(rng, 3)
    signs = set()
    for kappa in (0.02, 0.1, 0.3, 0.8):
        v = _balanced_check(g, kappa, budget=800)
        assert v.ok
        s = np.array(v.signs)
        signs.add(tuple(s * s[0]))
    assert len(signs) == 1


def test_radius_attached(triangle):
    e = Energy(triangle, P.classical(), 0.2, 2)
    ms = enumerate_minima(e, 200, 1)
    assert ms.radius == bounding_radius(e)
    assert ms.dedup_tolerance == pytest.approx(1e-5 * ms.radius)
