"""Monte Carlo enumeration of local minima.

Samples are drawn uniformly from the box ``[-R, R]^n`` containing every
critical point, pushed downhill by gradient descent with Armijo
backtracking, and polished by Newton steps. Descents run as whole numpy
batches; each sample's trajectory depends only on its own start, so chunking
and threading never change results.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import CriticalPoint, bounding_radius, classify
from .errors import EmptyMinimaSet, MaxItersExceeded, MissingBaseline, NotBalanced

log = logging.getLogger(__name__)

ARMIJO = 1e-4
GRAD_TOL = 1e-6
NEWTON_TOL = 1e-10
MAX_GRAD_STEPS = 100_000
MAX_NEWTON_STEPS = 50
BLOCK = 4096

OK, STALLED, MAXITER, FAILED = 0, 1, 2, 3


# ---------------------------------------------------------------- descent


def _gradient_phase(energy, X, gtol=GRAD_TOL, max_steps=MAX_GRAD_STEPS, trace=None):
    """Armijo gradient descent on every row of ``X`` until ``max|grad| < gtol``.

    The first trial step of each iteration is the Barzilai-Borwein length
    from the previous step (doubling when curvature is not positive), halved
    until the Armijo condition holds. Returns final points and a status per
    row.
    """
    X = np.array(X, dtype=float)
    B = X.shape[0]
    E = energy.value(X)
    G = energy.gradient(X)
    alpha = np.full(B, 1e-2)
    status = np.full(B, OK)
    steps = np.zeros(B, dtype=int)
    active = np.flatnonzero(np.max(np.abs(G), axis=1) >= gtol)
    while active.size:
        x, g, e = X[active], G[active], E[active]
        a = alpha[active]
        gg = np.einsum("ij,ij->i", g, g)
        accepted = np.zeros(active.size, dtype=bool)
        pending = np.arange(active.size)
        for _ in range(80):
            trial = x[pending] - a[pending, None] * g[pending]
            et = energy.value(trial)
            ok = et <= e[pending] - ARMIJO * a[pending] * gg[pending]
            ok &= np.all(np.isfinite(trial), axis=1)
            hit = pending[ok]
            x[hit] = trial[ok]
            e[hit] = et[ok]
            accepted[hit] = True
            pending = pending[~ok]
            a[pending] *= 0.5
            if not pending.size:
                break
        rows = active[accepted]
        step = x[accepted] - X[rows]
        X[rows], E[rows] = x[accepted], e[accepted]
        if trace is not None and accepted.any():
            trace.append(E[rows].copy())
        gnew = energy.gradient(X[rows])
        sy = np.einsum("ij,ij->i", step, gnew - G[rows])
        ss = np.einsum("ij,ij->i", step, step)
        bb = np.divide(ss, sy, out=2 * a[accepted], where=sy > 0)
        G[rows] = gnew
        alpha[active] = a
        alpha[rows] = np.clip(bb, 1e-12, 1e6)
        steps[rows] += 1
        status[active[~accepted]] = STALLED
        still = accepted & (np.max(np.abs(G[active]), axis=1) >= gtol)
        over = still & (steps[active] >= max_steps)
        status[active[over]] = MAXITER
        active = active[still & ~over]
    return X, status


def _newton_phase(energy, X, tol=NEWTON_TOL, max_steps=MAX_NEWTON_STEPS):
    """Damped Newton polish using ``|H|`` so every step goes downhill.

    A step is accepted when it does not raise the energy beyond rounding and
    either lowers the energy or the gradient. Stops per row once the residual
    is below ``tol`` and the last step was negligible.
    """
    X = np.array(X, dtype=float)
    B, n = X.shape
    done = np.zeros(B, dtype=bool)
    last = np.full(B, np.inf)
    for _ in range(max_steps):
        rows = np.flatnonzero(~done)
        if not rows.size:
            break
        x = X[rows]
        g = energy.gradient(x)
        res = np.max(np.abs(g), axis=1)
        fin = (res < tol) & (last[rows] <= 1e-12 * (1 + np.max(np.abs(x), axis=1)))
        fin |= res == 0
        done[rows[fin]] = True
        rows, x, g, res = rows[~fin], x[~fin], g[~fin], res[~fin]
        if not rows.size:
            break
        lam, V = np.linalg.eigh(energy.hessian(x))
        absl = np.abs(lam)
        inv = np.divide(1.0, absl, out=np.zeros_like(absl), where=absl > 0)
        d = -np.einsum("bij,bj->bi", V, np.einsum("bji,bj->bi", V, g) * inv)
        e0 = energy.value(x)
        t = np.ones(rows.size)
        moved = np.zeros(rows.size, dtype=bool)
        pending = np.arange(rows.size)
        for _ in range(30):
            trial = x[pending] + t[pending, None] * d[pending]
            et = energy.value(trial)
            gt = np.max(np.abs(energy.gradient(trial)), axis=1)
            slack = 1e-14 * (1 + np.abs(e0[pending]))
            ok = (et <= e0[pending] + slack) & ((et < e0[pending]) | (gt < res[pending]))
            hit = pending[ok]
            X[rows[hit]] = trial[ok]
            last[rows[hit]] = t[hit] * np.max(np.abs(d[hit]), axis=1)
            moved[hit] = True
            pending = pending[~ok]
            t[pending] *= 0.5
            if not pending.size:
                break
        # no acceptable step: stop, the residual check below decides
        stuck = rows[~moved]
        last[stuck] = 0.0
        done[stuck] = True
    return X


def _descend_batch(energy, X0, gtol=GRAD_TOL, max_steps=MAX_GRAD_STEPS):
    X, status = _gradient_phase(energy, X0, gtol=gtol, max_steps=max_steps)
    X = _newton_phase(energy, X)
    res = np.max(np.abs(energy.gradient(X)), axis=1)
    status = np.where((status != MAXITER) & ~(res < NEWTON_TOL), FAILED, status)
    return X, status


def descend(energy, x0, gtol=GRAD_TOL, max_steps=MAX_GRAD_STEPS, trace=None):
    """Gradient descent from ``x0`` then Newton polish; returns a CriticalPoint.

    ``trace``, when a list, receives the energy after every accepted gradient
    step.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    energies = [] if trace is not None else None
    X, status = _gradient_phase(energy, x0, gtol=gtol, max_steps=max_steps, trace=energies)
    if trace is not None:
        trace.extend(float(e[0]) for e in energies)
    if status[0] == MAXITER:
        raise MaxItersExceeded(f"no convergence after {max_steps} gradient steps")
    X = _newton_phase(energy, X)
    if not np.max(np.abs(energy.gradient(X[0]))) < NEWTON_TOL:
        # singular Newton systems: fall back to gradient steps with a tighter target
        X, status = _gradient_phase(energy, X, gtol=NEWTON_TOL, max_steps=max_steps)
        if status[0] == MAXITER:
            raise MaxItersExceeded("gradient fallback did not reach the residual target")
    return classify(energy, X[0])


# ---------------------------------------------------------------- sampling


def sample_starts(seed, start, count, n, radius, stratified=False):
    """Uniform points in ``[-radius, radius]^n`` for sample indices ``start .. start+count-1``.

    Sample ``k`` is made of draws ``k*n .. k*n+n-1`` of a single Philox
    stream keyed by ``seed``; any block is reproduced by advancing the
    counter, so the points never depend on how the work is split.
    """
    out = np.empty((count, n))
    done = 0
    while done < count:
        k = start + done
        block = k // BLOCK
        offset = k - block * BLOCK
        take = min(count - done, BLOCK - offset)
        bg = np.random.Philox(key=seed)
        bg.advance(block * BLOCK * n // 4)
        u = np.random.Generator(bg).random((BLOCK, n))[offset:offset + take]
        if stratified:
            # one point per slab along the first axis, cycling through BLOCK slabs
            idx = (np.arange(k, k + take) % BLOCK)
            u[:, 0] = (idx + u[:, 0]) / BLOCK
        out[done:done + take] = u
        done += take
    return radius * (2 * out - 1)


# ---------------------------------------------------------------- enumeration


@dataclass
class MinimaSet:
    """Distinct local minima found from a sampling run (a lower bound on the count)."""

    minima: list
    dedup_tolerance: float
    budget: int
    seed: int
    radius: float
    kappa: float
    skipped: int = 0
    extra_starts: int = 0

    def __len__(self):
        return len(self.minima)

    @property
    def count(self):
        return len(self.minima)

    def coords(self):
        if not self.minima:
            return np.empty((0, 0))
        return np.array([m.coords for m in self.minima])

    def digest(self):
        """Short hash of the rounded minima coordinates."""
        c = np.round(self.coords(), 8) + 0.0
        return hashlib.sha256(c.tobytes()).hexdigest()[:16]

    def contains(self, x, tol=None):
        tol = self.dedup_tolerance if tol is None else tol
        if not self.minima:
            return False
        return bool(np.any(np.max(np.abs(self.coords() - np.asarray(x)), axis=1) <= tol))

    def lowest(self):
        if not self.minima:
            raise EmptyMinimaSet("no minima to choose from")
        return min(self.minima, key=lambda p: p.energy)


def _dedup(points, tol):
    """Greedy clustering in input order; keeps the first point of each cluster."""
    if not len(points):
        return np.empty((0, points.shape[1] if points.ndim == 2 else 0)), []
    grid = np.round(points / (tol * 1e-2)).astype(np.int64)
    _, first = np.unique(grid, axis=0, return_index=True)
    first = np.sort(first)
    reps, rep_idx = [], []
    for i in first:
        p = points[i]
        if reps and np.min(np.max(np.abs(np.array(reps) - p), axis=1)) <= tol:
            continue
        reps.append(p)
        rep_idx.append(int(i))
    return np.array(reps), rep_idx


def _run_chunks(energy, starts, threads, chunk=BLOCK):
    parts = [starts[i:i + chunk] for i in range(0, len(starts), chunk)]
    if threads and threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _descend_batch(energy, p), parts))
    else:
        results = [_descend_batch(energy, p) for p in parts]
    if not results:
        return np.empty((0, energy.n)), np.empty(0, dtype=int)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def enumerate_minima(energy, budget, seed, radius=None, dedup_tolerance=None, extra_starts=None,
                     threads=1, stratified=False):
    """Count local minima by descending ``budget`` uniform samples.

    ``extra_starts`` (e.g. minima from a neighbouring coupling) are descended
    after the random samples. Each minimum found also contributes its
    mirror image ``-x``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = energy.n
    R = bounding_radius(energy) if radius is None else float(radius)
    tol = 1e-5 * R if dedup_tolerance is None else float(dedup_tolerance)
    starts = sample_starts(seed, 0, int(budget), n, R, stratified=stratified)
    n_extra = 0
    if extra_starts is not None and len(extra_starts):
        extra = np.asarray(extra_starts, dtype=float).reshape(-1, n)
        n_extra = len(extra)
        starts = np.vstack([starts, extra])
    X, status = _run_chunks(energy, starts, threads)
    good = status != MAXITER
    good &= status != FAILED
    skipped = int(np.count_nonzero(~good))
    X = X[good]
    pts = np.empty((2 * len(X), n))
    pts[0::2], pts[1::2] = X, -X
    cand, _ = _dedup(pts, tol * 1e-3)
    minima = []
    for x in cand:
        cp = classify(energy, x)
        if cp.is_minimum:
            minima.append(cp)
    if minima:
        coords, keep = _dedup(np.array([m.coords for m in minima]), tol)
        minima = [minima[i] for i in keep]
    minima.sort(key=lambda p: tuple(p.coords))
    if skipped:
        log.info("%d of %d samples did not converge and were skipped", skipped, len(starts))
    return MinimaSet(minima, tol, int(budget), int(seed), R, energy.kappa, skipped, n_extra)


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepRecord:
    kappas: list
    counts: list
    digests: list
    minima: list = field(default_factory=list, repr=False)
    budget: int = 0
    seed: int = 0

    def rows(self):
        return list(zip(self.kappas, self.counts))


def sweep_counts(energy, kappas, budget, seed, warm_start=True, threads=1, keep_minima=True):
    """Minima counts along an increasing grid of couplings.

    Minima from the previous grid value are added as extra starting points.
    """
    kappas = [float(k) for k in kappas]
    if not kappas:
        raise ValueError("empty kappa grid")
    if any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappa grid must be strictly increasing")
    rec = SweepRecord([], [], [], budget=int(budget), seed=int(seed))
    prev = None
    for k in kappas:
        e = energy.at(k)
        extra = prev.coords() if (warm_start and prev is not None and prev.count) else None
        ms = enumerate_minima(e, budget, seed, extra_starts=extra, threads=threads)
        rec.kappas.append(k)
        rec.counts.append(ms.count)
        rec.digests.append(ms.digest())
        if keep_minima:
            rec.minima.append(ms)
        log.info("kappa=%g count=%d", k, ms.count)
        prev = ms
    return rec


def nonmonotonicity_index(sweep):
    """Largest excess of the minima count over its value at zero coupling."""
    if 0.0 not in sweep.kappas:
        raise MissingBaseline("sweep has no kappa = 0 entry")
    base = sweep.counts[sweep.kappas.index(0.0)]
    return int(max(c - base for c in sweep.counts))


def is_monotone(sweep):
    """True when the counts never increase along the grid."""
    return all(b <= a for a, b in zip(sweep.counts, sweep.counts[1:]))


# ---------------------------------------------------------------- balance


@dataclass(frozen=True)
class GlobalMinimumVerdict:
    ok: bool
    witness: CriticalPoint
    signs: tuple
    expected: tuple
    nonzero: bool
    matches_partition: bool


def global_minimum_check(energy, minima, balance, zero_tol=1e-6):
    """Check the lowest minimum against a Harary bipartition.

    Every coordinate must be nonzero and the signs must equal the partition
    sides up to one global flip.
    """
    if not getattr(balance, "balanced", False):
        raise NotBalanced("global minimum sign law needs a balanced graph")
    if not energy.graph.is_connected:
        from .errors import DisconnectedGraph
        raise DisconnectedGraph("global minimum sign law needs a connected graph")
    if energy.kappa <= 0:
        raise ValueError("global minimum sign law needs kappa > 0")
    best = minima.lowest()
    x = best.coords
    nonzero = bool(np.all(np.abs(x) > zero_tol))
    signs = tuple(int(s) for s in np.sign(x))
    expected = tuple(int(s) for s in balance.sides(energy.n))
    flipped = tuple(-s for s in expected)
    match = nonzero and (signs == expected or signs == flipped)
    return GlobalMinimumVerdict(bool(match), best, signs, expected, nonzero, bool(match))
