import itertools

import numpy as np
import pytest

from opinion_landscape import potential as P
from opinion_landscape.certify import persistence_kappa
from opinion_landscape.continuation import (EIGENVALUE_CROSSING, NEWTON_FAILURE, REACHED_END,
                                            classify_bifurcation, continue_branch,
                                            locate_bifurcation, trace_all,
                                            zero_coupling_critical_points)
from opinion_landscape.energy import Energy
from opinion_landscape.errors import InvalidStart, NoCrossing
from opinion_landscape.signed_graph import l_norm

from conftest import PHI


@pytest.fixture
def ex1(triangle):
    return Energy(triangle, P.classical(), 0.0, 2)


def test_origin_branch(ex1):
    b = continue_branch(ex1, np.zeros(3), 0.5)
    assert b.terminal == EIGENVALUE_CROSSING
    assert locate_bifurcation(b) == pytest.approx(1 / 6, abs=1e-6)
    # flow Jacobian at the origin: {1, 1 + 6k, 1 - 6k}; the Hessian is its negative
    k = 0.1
    eigs = np.linalg.eigvalsh(ex1.at(k).hessian(np.zeros(3)))
    assert np.allclose(sorted(-eigs), sorted([1, 1 + 6 * k, 1 - 6 * k]))


def test_all_ones_branch(ex1):
    b = continue_branch(ex1, np.ones(3), 0.5)
    assert b.terminal == EIGENVALUE_CROSSING
    assert locate_bifurcation(b) == pytest.approx(1 / 3, abs=1e-6)
    mins = [p.min_hess_eig for p in b.points]
    assert all(v > 0 for v in mins)
    assert all(b2 <= a2 + 1e-12 for a2, b2 in zip(mins, mins[1:]))


def test_phi_pitchfork(ex1):
    ends = []
    for s in (1.0, -1.0):
        b = continue_branch(ex1, np.array([s, 1.0, -1.0]), 0.5)
        assert b.terminal in (NEWTON_FAILURE, EIGENVALUE_CROSSING)
        ks = locate_bifurcation(b)
        assert ks == pytest.approx(PHI / 6, abs=1e-6)
        assert all(p.morse_index == 0 for p in b.points)
        ends.append(b.last.coords)
        kind, counts = classify_bifurcation(ex1, b.last.coords, ks)
        assert kind == "pitchfork"
    # the two minima close in on (0, phi, -phi) from either side
    assert np.allclose(ends[0], [0, PHI, -PHI], atol=5e-3)
    assert np.allclose(ends[1], [0, PHI, -PHI], atol=5e-3)
    e = ex1.at(PHI / 6)
    assert np.max(np.abs(e.gradient(np.array([0, PHI, -PHI])))) < 1e-10


def test_mixed_corner_folds(ex1):
    # (-1, 1, 1) is not part of the phi/6 merger; its minimum meets a saddle earlier
    b = continue_branch(ex1, np.array([-1.0, 1.0, 1.0]), 0.5)
    assert b.terminal == NEWTON_FAILURE
    ks = locate_bifurcation(b)
    assert 0.05 < ks < 1 / 6
    kind, _ = classify_bifurcation(ex1, b.last.coords, ks)
    assert kind == "fold"


def test_branch_length_one(ex1):
    b = continue_branch(ex1, np.ones(3), 0.0)
    assert len(b.points) == 1 and b.terminal == REACHED_END
    with pytest.raises(NoCrossing):
        locate_bifurcation(b)


def test_invalid_start(ex1):
    with pytest.raises(InvalidStart):
        continue_branch(ex1, np.array([0.5, 0.5, 0.5]), 0.1)
    with pytest.raises(InvalidStart):
        continue_branch(ex1, np.ones(2), 0.1)


def test_branch_symmetry(ex1):
    a = continue_branch(ex1, np.array([1.0, -1.0, 0.0]), 0.06)
    b = continue_branch(ex1, np.array([-1.0, 1.0, 0.0]), 0.06)
    assert a.kappas == b.kappas
    assert np.allclose(a.coords(), -b.coords(), atol=1e-12)


def test_reversibility(ex1):
    fwd = continue_branch(ex1, np.array([1.0, 1.0, -1.0]), 0.2)
    back = continue_branch(ex1.at(0.2), fwd.last, 0.0)
    assert back.terminal == REACHED_END
    assert back.kappas[-1] == 0.0
    assert np.allclose(back.last.coords, [1, 1, -1], atol=1e-8)


def test_persistence_branches(k3):
    e = Energy(k3, P.two_shelf(), 0.0)
    kp = float(persistence_kappa(1, 3, 4, 5, l_norm(k3.laplacian), 1))
    assert kp == pytest.approx(1 / 20)
    for signs in itertools.product((-1.0, 1.0), repeat=3):
        b = continue_branch(e, 4 * np.array(signs), kp, step=5e-3)
        assert b.terminal == REACHED_END
        X = np.abs(b.coords())
        assert np.all((X >= 3) & (X <= 5))
        assert all(p.morse_index == 0 for p in b.points)


def test_trace_all_example_one(ex1):
    branches, events = trace_all(ex1, 0.5)
    assert len(branches) == 27
    assert len(zero_coupling_critical_points(ex1.potential, 3)) == 27
    found = sorted({round(ev.kappa, 4) for ev in events})
    for target in (1 / 6, PHI / 6, 1 / 3):
        assert any(abs(k - target) < 1e-4 for k in found)
    for b in branches:
        ks = b.kappas
        assert all(y > x for x, y in zip(ks, ks[1:]))
        for p in b.points:
            assert p.grad_residual < 1e-10
