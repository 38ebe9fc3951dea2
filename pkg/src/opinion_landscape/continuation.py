"""Natural-parameter continuation of critical points in the coupling kappa.

Each step predicts along the tangent ``dx/dkappa = H^{-1} (c L x)``, corrects
with Newton at the new coupling, and accepts only when the corrected point
stays close to the prediction and the secant agrees with the tangents at both
ends. Failing steps are halved down to a floor. A change of Morse index ends
the branch with an eigenvalue crossing.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import CriticalPoint, classify
from .errors import InvalidStart, NoCrossing

REACHED_END = "ReachedEnd"
EIGENVALUE_CROSSING = "EigenvalueCrossing"
NEWTON_FAILURE = "NewtonFailure"

NEWTON_TOL = 1e-10
START_TOL = 1e-6
MIN_COS = 0.95


@dataclass
class Branch:
    """Critical points along a path in kappa, in the order they were visited."""

    energy: object = field(repr=False)
    points: list
    terminal: str
    bracket: tuple = None
    kappa_end: float = 0.0
    step: float = 1e-3

    @property
    def kappas(self):
        return [p.kappa for p in self.points]

    @property
    def morse_indices(self):
        return [p.morse_index for p in self.points]

    @property
    def last(self):
        return self.points[-1]

    @property
    def direction(self):
        return 1.0 if self.kappa_end >= self.points[0].kappa else -1.0

    def coords(self):
        return np.array([p.coords for p in self.points])


def _residual(energy, x):
    return float(np.max(np.abs(energy.gradient(x))))


def newton(energy, x0, tol=NEWTON_TOL, max_steps=30):
    """Plain Newton on the gradient; returns the root or None."""
    x = np.array(x0, dtype=float)
    scale = 1.0 + float(np.max(np.abs(x)))
    for _ in range(max_steps):
        g = energy.gradient(x)
        if np.max(np.abs(g)) < tol:
            return x
        try:
            dx = np.linalg.solve(energy.hessian(x), g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dx)) or np.max(np.abs(dx)) > 10 * scale:
            return None
        x = x - dx
    return x if np.max(np.abs(energy.gradient(x))) < tol else None


def tangent(energy, x):
    """``dx/dkappa`` along the branch through ``x`` (least squares if singular)."""
    rhs = float(energy.convention) * (energy.graph.laplacian @ x)
    H = energy.hessian(x)
    try:
        t = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError:
        t = np.linalg.lstsq(H, rhs, rcond=None)[0]
    return t if np.all(np.isfinite(t)) else np.zeros_like(x)


def _cos(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    return float(u @ v / (nu * nv)) if nu > 0 and nv > 0 else 1.0


def _try_step(energy, x, t, kappa, h):
    """Corrected point at ``kappa + h`` or None when the step is rejected."""
    e1 = energy.at(kappa + h)
    pred = x + h * t
    y = newton(e1, pred)
    if y is None:
        return None
    if np.linalg.norm(y - pred) > 0.5 * np.linalg.norm(pred - x) + 1e-8:
        return None
    t1 = tangent(e1, y)
    # augmented secant vs tangents; rejects jumps onto a neighbouring branch
    sec = np.append((y - x) / h, 1.0)
    if min(_cos(sec, np.append(t, 1.0)), _cos(sec, np.append(t1, 1.0))) < MIN_COS:
        return None
    return y, t1


def _check_start(energy, start):
    x = start.coords if isinstance(start, CriticalPoint) else np.asarray(start, dtype=float)
    if x.shape != (energy.n,) or not np.all(np.isfinite(x)):
        raise InvalidStart(f"start must be a finite vector of length {energy.n}")
    if _residual(energy, x) > START_TOL:
        raise InvalidStart(f"start is not a critical point (residual {_residual(energy, x):.3g})")
    y = newton(energy, x)
    if y is None:
        raise InvalidStart("Newton polish of the start point failed")
    return y


def continue_branch(energy, start, kappa_end, step=1e-3, floor=1e-6):
    """Follow the critical point ``start`` of ``energy`` to ``kappa_end``.

    Works in either direction. Ends with ``ReachedEnd``, with
    ``EigenvalueCrossing`` when the Morse index changes (``bracket`` holds the
    last kappa with the old index and the first with the new one), or with
    ``NewtonFailure`` when the step falls below ``floor``.
    """
    if step <= 0 or floor <= 0:
        raise ValueError("step and floor must be positive")
    x = _check_start(energy, start)
    k0 = float(energy.kappa)
    kappa_end = float(kappa_end)
    sign = 1.0 if kappa_end >= k0 else -1.0
    first = classify(energy, x, probe=False)
    points = [first]
    branch = Branch(energy, points, REACHED_END, None, kappa_end, step)
    k, t, h = k0, tangent(energy, x), step
    while sign * (kappa_end - k) > 1e-15:
        hh = sign * min(h, abs(kappa_end - k))
        got = _try_step(energy, x, t, k, hh)
        if got is None:
            h *= 0.5
            if h < floor:
                branch.terminal = NEWTON_FAILURE
                branch.bracket = (k, k + sign * 2 * h)
                return branch
            continue
        y, t1 = got
        cp = classify(energy.at(k + hh), y, probe=False)
        if cp.morse_index != points[-1].morse_index:
            branch.terminal = EIGENVALUE_CROSSING
            branch.bracket = (k, k + hh)
            return branch
        points.append(cp)
        k = k + hh
        if abs(kappa_end - k) <= 1e-12 * max(1.0, abs(kappa_end)):
            k = kappa_end
        x, t = y, t1
        h = min(step, 2 * h)
    return branch


def _min_abs_eig(energy, x):
    return float(np.min(np.abs(np.linalg.eigvalsh(energy.hessian(x)))))


def locate_bifurcation(branch, bracket_tol=1e-9, eig_tol=1e-6):
    """Bisect the terminal bracket of ``branch``; returns the midpoint kappa.

    A trial coupling counts as "before" when one continuation step from the
    last accepted point is accepted with the same Morse index. Stops when the
    bracket is below ``bracket_tol``, or when the smallest eigenvalue
    magnitude at the tracked point is under ``eig_tol`` and the bracket is
    below ``1000 * bracket_tol``.
    """
    if branch.terminal == REACHED_END or branch.bracket is None:
        raise NoCrossing("branch reached its end without a crossing or failure")
    energy = branch.energy
    lo, hi = branch.bracket
    last = branch.last
    x, ka = last.coords, last.kappa
    morse = last.morse_index
    t = tangent(energy.at(ka), x)
    while abs(hi - lo) > bracket_tol:
        mid = 0.5 * (lo + hi)
        got = _try_step(energy, x, t, ka, mid - ka)
        ok = False
        if got is not None:
            y, t1 = got
            ok = classify(energy.at(mid), y, probe=False).morse_index == morse
        if ok:
            lo, x, t, ka = mid, y, t1, mid
            if _min_abs_eig(energy.at(mid), x) < eig_tol and abs(hi - lo) < 1e3 * bracket_tol:
                break
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _local_roots(energy, center, vecs, radius):
    roots = []
    starts = [center]
    for v in vecs.T:
        for s in (-1.0, -0.5, 0.5, 1.0):
            starts.append(center + s * radius * v)
    for s0 in starts:
        y = newton(energy, s0)
        if y is None or np.max(np.abs(y - center)) > 5 * radius:
            continue
        if all(np.max(np.abs(y - r)) > 1e-3 * radius for r in roots):
            roots.append(y)
    return roots


def classify_bifurcation(energy, x_star, kappa_star, delta=1e-4):
    """Heuristic type from the number of nearby critical points on each side.

    Counts roots near ``x_star`` at ``kappa_star -/+ delta``: 1 vs 3 is a
    pitchfork, 0 vs 2 a fold.
    """
    x_star = np.asarray(x_star, dtype=float)
    e = energy.at(kappa_star)
    lam, V = np.linalg.eigh(e.hessian(x_star))
    vecs = V[:, np.argsort(np.abs(lam))[:1]]
    radius = 4.0 * np.sqrt(delta) * (1.0 + np.max(np.abs(x_star)))
    counts = []
    for k in (kappa_star - delta, kappa_star + delta):
        if k < 0:
            counts.append(None)
            continue
        counts.append(len(_local_roots(energy.at(k), x_star, vecs, radius)))
    pair = sorted(c for c in counts if c is not None)
    if pair == [1, 3]:
        return "pitchfork", tuple(counts)
    if pair == [0, 2]:
        return "fold", tuple(counts)
    return "unknown", tuple(counts)


def zero_coupling_critical_points(potential, n):
    """All ``3**n`` critical points of the uncoupled energy."""
    m = potential.m
    return [np.array(c, dtype=float) for c in itertools.product((-m, 0.0, m), repeat=n)]


@dataclass
class Event:
    branch_id: int
    terminal: str
    kappa: float
    coords: tuple
    start: tuple
    start_morse: int
    kind: str = ""
    counts: tuple = ()

    def to_json(self):
        return {
            "branch_id": self.branch_id,
            "terminal": self.terminal,
            "kappa": self.kappa,
            "coords": list(self.coords),
            "start": list(self.start),
            "start_morse_index": self.start_morse,
            "kind": self.kind,
            "local_counts": list(self.counts),
        }


def trace_all(energy, kappa_end, step=1e-3, starts=None, threads=1, classify_events=True):
    """Continue every uncoupled critical point (or ``starts``) to ``kappa_end``.

    Returns ``(branches, events)``; events are located bifurcations for every
    branch that did not reach the end.
    """
    e0 = energy.at(0.0) if starts is None else energy
    if starts is None:
        starts = zero_coupling_critical_points(energy.potential, energy.n)

    def run(item):
        bid, s = item
        b = continue_branch(e0, s, kappa_end, step=step)
        ev = None
        if b.terminal != REACHED_END:
            ks = locate_bifurcation(b)
            kind, counts = "", ()
            if classify_events:
                kind, counts = classify_bifurcation(e0, b.last.coords, ks)
            ev = Event(bid, b.terminal, ks, tuple(b.last.coords), tuple(np.asarray(s, float)),
                       b.points[0].morse_index, kind, counts)
        return b, ev

    items = list(enumerate(starts))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(i) for i in items]
    return [r[0] for r in results], [r[1] for r in results if r[1] is not None]


def branch_rows(branches):
    """``(branch_id, kappa, x_1..x_n, energy, min_hess_eig, morse_index)`` rows."""
    rows = []
    for bid, b in enumerate(branches):
        for p in b.points:
            rows.append([bid, p.kappa, *p.coords.tolist(), p.energy, p.min_hess_eig, p.morse_index])
    return rows
