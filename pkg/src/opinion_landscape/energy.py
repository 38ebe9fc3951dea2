"""Coupled double-well energy on a signed graph.

The gradient is ``W'(x_i) - c * kappa * (L x)_i``. ``c`` (the convention)
is 1 for the gradient-flow normalisation and 2 for the ordered double-sum
normalisation of the coupling term; ``(c, kappa)`` and ``(1, c * kappa)``
give the same gradient and Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import potential as potential_mod
from .errors import ConfigError, GrowthProbeFailed
from .signed_graph import SignedGraph, l_norm

MORSE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Energy:
    graph: SignedGraph
    potential: potential_mod.Potential
    kappa: float
    convention: int = 1

    def __post_init__(self):
        if self.convention not in (1, 2):
            raise ConfigError(f"convention must be 1 or 2, got {self.convention!r}")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ConfigError(f"kappa must be finite and >= 0, got {self.kappa!r}")

    @property
    def n(self):
        return self.graph.n

    @property
    def coupling(self):
        """Effective prefactor ``c * kappa`` multiplying the Laplacian."""
        return float(self.convention) * float(self.kappa)

    def at(self, kappa):
        return replace(self, kappa=float(kappa))

    def value(self, x):
        """Energy of one point ``(n,)`` or a batch ``(B, n)``."""
        x = np.asarray(x, dtype=float)
        L = self.graph.laplacian
        w = self.potential.value(x).sum(axis=-1)
        quad = np.einsum("...i,ij,...j->...", x, L, x)
        return w - 0.5 * self.coupling * quad

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.potential.d1(x) - self.coupling * (x @ self.graph.laplacian)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d2 = self.potential.d2(x)
        H = -self.coupling * np.broadcast_to(self.graph.laplacian, x.shape + (self.n,)).copy()
        idx = np.arange(self.n)
        H[..., idx, idx] += d2
        return H

    def evaluate(self, x):
        """``(value, gradient, hessian)`` at ``x``."""
        return self.value(x), self.gradient(x), self.hessian(x)

    def to_json(self):
        return {
            "graph": self.graph.to_json(),
            "potential": self.potential.to_json(),
            "kappa": self.kappa,
            "convention": self.convention,
        }


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    coords: np.ndarray
    kappa: float
    energy: float
    grad_residual: float
    hess_eigs: np.ndarray
    morse_index: int
    kind: str = field(default="saddle")

    @property
    def is_minimum(self):
        return self.kind in ("minimum", "degenerate_minimum")

    @property
    def min_hess_eig(self):
        return float(self.hess_eigs[0])


def _eig_tol(eigs):
    return MORSE_TOL * max(1.0, float(np.max(np.abs(eigs))))


def classify(energy, x, probe=True):
    """Build a CriticalPoint at ``x`` with Morse data.

    ``kind`` is ``minimum`` when every Hessian eigenvalue exceeds the
    tolerance, ``degenerate_minimum`` when the smallest is within tolerance of
    zero and probing along the near-null eigenvectors only raises the energy,
    ``degenerate`` for other near-singular points, and ``saddle``/``maximum``
    otherwise.
    """
    x = np.array(x, dtype=float)
    e, g, H = energy.evaluate(x)
    eigs, vecs = np.linalg.eigh(H)
    tol = _eig_tol(eigs)
    morse = int(np.count_nonzero(eigs < -tol))
    if morse == 0 and eigs[0] > tol:
        kind = "minimum"
    elif morse == 0:
        null = vecs[:, np.abs(eigs) <= tol]
        kind = "degenerate_minimum" if probe and _probe_up(energy, x, e, null) else "degenerate"
    elif morse == energy.n:
        kind = "maximum"
    else:
        kind = "saddle"
    return CriticalPoint(x, energy.kappa, float(e), float(np.max(np.abs(g))), eigs, morse, kind)


def _probe_up(energy, x, e0, null):
    scale = max(1.0, float(np.max(np.abs(x))))
    for t in (1e-2, 1e-3):
        for k in range(null.shape[1]):
            for s in (1.0, -1.0):
                if energy.value(x + s * t * scale * null[:, k]) <= e0:
                    return False
    return True


def bounding_radius(energy, cap=1e4, step=1e-3):
    """Box half-width containing every critical point.

    At a critical point the largest coordinate ``t`` satisfies
    ``W'(t) / t <= 2 c kappa ||L||``. The radius is twice the first grid
    value from which the ratio exceeds that bound at every later grid value.
    The grid is uniform (spacing ``step * m``) up to ``100 m`` and geometric
    up to ``cap``.
    """
    m = energy.potential.m
    thresh = 2.0 * energy.coupling * l_norm(energy.graph.laplacian)
    if thresh == 0:
        return 2.0 * m
    fine = m * (1 + step * np.arange(1, int(99 / step) + 1))
    coarse = np.geomspace(fine[-1], max(cap, fine[-1]), 2000)[1:]
    grid = np.concatenate([fine, coarse])
    ratio = energy.potential.d1(grid) / grid
    fail = np.flatnonzero(~(ratio > thresh))
    if fail.size and fail[-1] == grid.size - 1:
        raise GrowthProbeFailed(f"W'(t)/t never exceeds {thresh:g} below t = {cap:g}")
    first = 0 if not fail.size else fail[-1] + 1
    return 2.0 * float(grid[first])


def from_json(obj, kappa=None):
    """Energy from ``{"graph": ..., "potential": ..., "kappa": ..., "convention": ...}``."""
    if not isinstance(obj, dict):
        raise ConfigError("energy config must be a JSON object")
    for key in ("graph", "potential"):
        if key not in obj:
            raise ConfigError(f"missing key {key!r}")
    g = obj["graph"]
    if not isinstance(g, dict) or "n" not in g or "edges" not in g:
        raise ConfigError("graph needs 'n' and 'edges'")
    graph = SignedGraph.from_edges(g["n"], g["edges"])
    pot = potential_mod.from_json(obj["potential"])
    if kappa is None:
        kappa = obj.get("kappa", 0.0)
    try:
        kappa = float(kappa)
    except (TypeError, ValueError):
        raise ConfigError(f"kappa must be a number, got {kappa!r}") from None
    return Energy(graph, pot, kappa, int(obj.get("convention", 1)))
