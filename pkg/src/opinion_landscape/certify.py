"""Existence and minimality certificates for critical points in boxes.

A box certifies a critical point when, for every coordinate ``i``, the
gradient component ``i`` has opposite strict signs on the two faces
``x_i = a_i`` and ``x_i = b_i`` (Poincare-Miranda). It certifies a minimum
when in addition the Hessian is positive definite on the whole box.

The gradient is ``W'(x_i) - c kappa (L x)_i``; on a face ``W'`` is a single
exact value and the coupling term is linear, so its range over the face is
given exactly by interval endpoints.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import energy as energy_mod
from .errors import ConfigError, InvalidOrdering
from .interval import Interval

SLACK = 1e-12

CERTIFIED_MINIMUM = "CertifiedMinimum"
CERTIFIED_CRITICAL_POINT = "CertifiedCriticalPoint"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Box:
    intervals: tuple

    def __post_init__(self):
        ivs = []
        for iv in self.intervals:
            a, b = (float(v) for v in iv)
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ConfigError(f"box interval {iv!r} has a non-finite endpoint")
            if a > b:
                raise ConfigError(f"box interval {iv!r} has lower end above upper end")
            ivs.append(Interval(a, b))
        if not ivs:
            raise ConfigError("box needs at least one interval")
        object.__setattr__(self, "intervals", tuple(ivs))

    @classmethod
    def from_bounds(cls, lo, hi):
        return cls(tuple(zip(lo, hi)))

    @property
    def n(self):
        return len(self.intervals)

    @property
    def lo(self):
        return np.array([iv.lo for iv in self.intervals])

    @property
    def hi(self):
        return np.array([iv.hi for iv in self.intervals])

    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def mirror(self):
        return Box(tuple((-iv.hi, -iv.lo) for iv in self.intervals))

    def intersect(self, other):
        lo, hi = np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box.from_bounds(lo, hi)

    def disjoint(self, other):
        return bool(np.any(self.hi < other.lo) or np.any(other.hi < self.lo))

    def to_json(self):
        return [[iv.lo, iv.hi] for iv in self.intervals]


@dataclass
class Certificate:
    """Outcome of certifying one box.

    ``face_margins[i]`` holds the gradient-component enclosures on the lower
    and upper face of coordinate ``i``; ``orientation[i]`` is +1 when the
    component goes from negative to positive, -1 for the reverse, 0 when
    neither holds strictly. ``pd_margin`` is a lower bound on the smallest
    Hessian eigenvalue over the box. When ``refined`` is set, the outcome
    refers to that sub-box of ``box``.
    """

    box: Box
    outcome: str
    face_margins: list
    orientation: tuple
    pm_margin: float
    pd_margin: float
    refined: Box = None
    notes: list = field(default_factory=list)

    @property
    def certified(self):
        return self.outcome != INCONCLUSIVE

    @property
    def is_minimum(self):
        return self.outcome == CERTIFIED_MINIMUM

    @property
    def witness_box(self):
        return self.refined if self.refined is not None else self.box

    def to_json(self):
        out = {
            "box": self.box.to_json(),
            "outcome": self.outcome,
            "orientation": list(self.orientation),
            "face_margins": [[list(lo), list(hi)] for lo, hi in self.face_margins],
            "pm_margin": self.pm_margin,
            "pd_margin": self.pd_margin,
        }
        if self.refined is not None:
            out["refined_box"] = self.refined.to_json()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _coupling_range(energy, box, i, xi):
    """Enclosure of ``c kappa (L x)_i`` over the face ``x_i = xi``."""
    L = energy.graph.laplacian
    lo = hi = L[i, i] * xi
    for j, iv in enumerate(box.intervals):
        if j == i or L[i, j] == 0:
            continue
        a, b = L[i, j] * iv.lo, L[i, j] * iv.hi
        lo += min(a, b)
        hi += max(a, b)
    return Interval(lo, hi).scale(energy.coupling)


def face_ranges(energy, box):
    """Gradient component ``i`` enclosures on the faces ``x_i = a_i`` and ``x_i = b_i``."""
    if box.n != energy.n:
        raise ConfigError(f"box has {box.n} intervals, energy has {energy.n} vertices")
    out = []
    for i, iv in enumerate(box.intervals):
        faces = []
        for xi in (iv.lo, iv.hi):
            w = float(energy.potential.d1(xi))
            faces.append((Interval.point(w) - _coupling_range(energy, box, i, xi)).widen(SLACK, SLACK))
        out.append(tuple(faces))
    return out


def pm_certify(energy, box, slack=SLACK):
    """Poincare-Miranda face test; each coordinate may use either orientation.

    Returns a Certificate whose outcome is CertifiedCriticalPoint or
    Inconclusive (the PD margin is left at ``-inf``).
    """
    faces = face_ranges(energy, box)
    orient, margins = [], []
    for lo_face, hi_face in faces:
        up = min(-lo_face.hi, hi_face.lo)
        down = min(lo_face.lo, -hi_face.hi)
        if up > slack:
            orient.append(1)
        elif down > slack:
            orient.append(-1)
        else:
            orient.append(0)
        margins.append(max(up, down))
    ok = all(orient)
    outcome = CERTIFIED_CRITICAL_POINT if ok else INCONCLUSIVE
    return Certificate(box, outcome, faces, tuple(orient), float(min(margins)), -np.inf)


def pd_margins(energy, box):
    """``(gershgorin, loewner)`` lower bounds on the Hessian's smallest eigenvalue.

    The Hessian is ``diag(W'') - c kappa L`` and dominates
    ``diag(inf W'') - c kappa L`` on the box. The first bound is the smallest
    Gershgorin row margin of that matrix, the second its smallest eigenvalue
    less a rounding allowance.
    """
    inf_d2 = np.array([energy.potential.derivative_ranges(iv.lo, iv.hi)[1].lo
                       for iv in box.intervals])
    L = energy.graph.laplacian
    cc = energy.coupling
    off = np.abs(L).sum(axis=1) - np.abs(np.diag(L))
    gersh = float(np.min(inf_d2 - cc * np.diag(L) - cc * off))
    M = np.diag(inf_d2) - cc * L
    lam = float(np.linalg.eigvalsh(M)[0])
    loewner = lam - 1e-12 * max(1.0, float(np.max(np.abs(M))))
    return gersh, loewner


def pd_certify(energy, box, slack=SLACK):
    """``(is_pd, margin)``; margin is the larger of the two bounds of ``pd_margins``."""
    margin = max(pd_margins(energy, box))
    return bool(margin > slack), float(margin)


def certify_box(energy, box, slack=SLACK):
    """Face test plus positive-definiteness on the same box."""
    cert = pm_certify(energy, box, slack)
    is_pd, margin = pd_certify(energy, box, slack)
    cert.pd_margin = margin
    if cert.outcome == CERTIFIED_CRITICAL_POINT and is_pd:
        cert.outcome = CERTIFIED_MINIMUM
    return cert


def _locate(energy, box):
    """Critical point inside ``box`` by Newton from the center, else descent."""
    from .continuation import newton
    from .landscape import descend

    x = newton(energy, box.center())
    if x is not None and box.contains(x):
        return x
    try:
        cp = descend(energy, box.center())
    except Exception:
        return None
    return cp.coords if box.contains(cp.coords) else None


def certify_minimum(energy, box, slack=SLACK, shrink=0.7, min_width=1e-7):
    """Certify ``box``; if only the faces certify, try cubes around the located point.

    The sub-boxes are clipped to ``box``, so a certified minimum in a sub-box
    is a minimum inside ``box``. Candidate sub-boxes are chosen numerically
    but each one is certified with the same rigorous tests.
    """
    cert = certify_box(energy, box, slack)
    if cert.outcome == CERTIFIED_MINIMUM:
        return cert
    x = _locate(energy, box)
    if x is None:
        cert.notes.append("no critical point located for refinement")
        return cert
    # cubes, and widths w solving C w = 1 for the comparison matrix C of the
    # Hessian (|H_ii| on the diagonal, -|H_ij| off it), which makes each
    # coordinate's own slope dominate the coupling spread on its faces
    H = energy.hessian(x)
    C = -np.abs(H)
    np.fill_diagonal(C, np.abs(np.diag(H)))
    shapes = [np.ones_like(x)]
    try:
        w = np.linalg.solve(C, np.ones_like(x))
        if np.all(w > 0):
            shapes.append(w / np.max(w))
    except np.linalg.LinAlgError:
        pass
    r = 0.5 * float(np.max(box.hi - box.lo))
    while r >= min_width:
        for w in shapes:
            sub = box.intersect(Box.from_bounds(x - r * w, x + r * w))
            if sub is None:
                continue
            c = certify_box(energy, sub, slack)
            if c.outcome == CERTIFIED_MINIMUM:
                return Certificate(box, CERTIFIED_MINIMUM, c.face_margins, c.orientation,
                                   c.pm_margin, c.pd_margin, refined=sub)
        r *= shrink
    cert.notes.append("refinement found no certified sub-box")
    return cert


def certify_many(energy, boxes, threads=1, refine=True):
    fn = certify_minimum if refine else certify_box
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda b: fn(energy, b), boxes))
    return [fn(energy, b) for b in boxes]


def certify_request(obj, threads=1, refine=True):
    """Handle ``{"energy": ..., "boxes": [[[a, b], ...], ...]}``; returns the response dict."""
    if not isinstance(obj, dict) or "energy" not in obj or "boxes" not in obj:
        raise ConfigError("certification request needs 'energy' and 'boxes'")
    e = energy_mod.from_json(obj["energy"])
    boxes = [Box(tuple(tuple(iv) for iv in b)) for b in obj["boxes"]]
    certs = certify_many(e, boxes, threads=threads, refine=refine)
    counts = {k: sum(c.outcome == k for c in certs)
              for k in (CERTIFIED_MINIMUM, CERTIFIED_CRITICAL_POINT, INCONCLUSIVE)}
    return {"kappa": e.kappa, "convention": e.convention, "counts": counts,
            "results": [c.to_json() for c in certs]}


# ---------------------------------------------------------------- thresholds


def persistence_kappa(M, ell, m, r, lnorm, c=1):
    """Coupling below which every corner minimum stays in ``[ell, r]`` up to sign.

    ``M * min(r - m, m - ell) / (2 r lnorm c)``. Fractions in give a Fraction
    out.
    """
    if not (0 < ell < m <= r):
        raise InvalidOrdering(f"need 0 < ell < m <= r, got ell={ell}, m={m}, r={r}")
    if M <= 0 or lnorm <= 0 or c not in (1, 2):
        raise InvalidOrdering("need M > 0, lnorm > 0 and c in {1, 2}")
    exact = all(isinstance(v, (int, Fraction)) for v in (M, ell, m, r, lnorm, c))
    if exact:
        M, ell, m, r, lnorm = (Fraction(v) for v in (M, ell, m, r, lnorm))
    return M * min(r - m, m - ell) / (2 * r * lnorm * c)


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float
    passed: bool
    slack: float


@dataclass
class ShelfReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def shelf_check(p, ell_p, r_p, ell, m, r, M):
    """Four derivative inequalities plus ``W'' >= M`` on ``[ell_p, r_p]`` and ``[ell, r]``.

    With ``q = M min(r - m, m - ell)``:
    ``W'(ell_p+) < -q (r + r_p) / (2r)``, ``W'(r_p-) > -q (ell - r_p) / (2r)``,
    ``W'(ell) < -q`` and ``W'(r) > q``. One-sided limits are used so that
    potentials with jumps in ``W'`` at shelf edges can be checked.
    """
    if not (0 <= ell_p < r_p < ell < m < r) or M <= 0:
        raise InvalidOrdering("need 0 <= ell' < r' < ell < m < r and M > 0")
    q = M * min(r - m, m - ell)
    checks = []

    def add(name, lhs, rhs, less):
        s = (rhs - lhs) if less else (lhs - rhs)
        checks.append(Inequality(name, float(lhs), float(rhs), bool(s > 0), float(s)))

    add("shelf_left", p.one_sided_d1(ell_p, "right"), -q * (r + r_p) / (2 * r), True)
    add("shelf_right", p.one_sided_d1(r_p, "left"), -q * (ell - r_p) / (2 * r), False)
    add("well_left", p.one_sided_d1(ell, "right"), -q, True)
    add("well_right", p.one_sided_d1(r, "left"), q, False)
    for name, a, b in (("curvature_shelf", ell_p, r_p), ("curvature_well", ell, r)):
        inf_d2 = _inf_d2_open_ends(p, a, b)
        checks.append(Inequality(name, inf_d2, float(M), bool(inf_d2 >= M - 1e-12),
                                 float(inf_d2 - M)))
    return ShelfReport(checks)


def _inf_d2_open_ends(p, a, b):
    """Infimum of ``W''`` over ``[a, b]`` ignoring jumps exactly at the endpoints."""
    eps = 1e-12 * max(1.0, abs(a), abs(b))
    return float(p.derivative_ranges(a + eps, b - eps)[1].lo)
