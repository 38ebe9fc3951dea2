"""One-dimensional even double-well potentials.

A potential is stored through its derivative on ``x >= 0`` as a list of
polynomial pieces, each written in a local variable ``u = x - center``.
``W`` is recovered by integrating piece by piece, and the negative half line
follows from evenness. Corners and jumps of ``W'`` between pieces can be
smoothed over a radius ``delta`` with a quintic smoothstep blend, which keeps
the one-sided values and slopes at the blend ends and makes ``W`` twice
continuously differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidParams, UnknownPreset
from .interval import Interval

_X = Polynomial([0.0, 1.0])
# 10 t^3 - 15 t^4 + 6 t^5: h(0)=0, h(1)=1, h' and h'' vanish at both ends
_SMOOTHSTEP = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
_RANGE_SLACK = 1e-12


def _recenter(poly, old, new):
    """Rewrite ``poly(x - old)`` as a polynomial in ``x - new``."""
    if old == new:
        return poly
    return poly(Polynomial([new - old, 1.0]))


@dataclass(frozen=True)
class Piece:
    """``W'(x) = dpoly(x - center)`` for ``lo <= x < next piece's lo``."""

    lo: float
    center: float
    dpoly: Polynomial


def hermite_piece(x0, x1, v0, v1, s0, s1):
    """Cubic on ``[x0, x1]`` with values ``v0, v1`` and slopes ``s0, s1``."""
    h = x1 - x0
    secant = (v1 - v0) / h
    c2 = (3 * secant - 2 * s0 - s1) / h
    c3 = (s0 + s1 - 2 * secant) / h**2
    return Piece(x0, x0, Polynomial([v0, s0, c2, c3]))


def _blend(left, right, c, delta):
    """Smoothstep from ``left`` to ``right`` across ``[c - delta, c + delta]``.

    ``left``/``right`` are polynomials in ``x - c``.
    """
    t = Polynomial([delta, 1.0]) / (2 * delta)
    return left + _SMOOTHSTEP(t) * (right - left)


def mollify(pieces, delta, tol=1e-12):
    """Smooth every breakpoint where ``W'`` or ``W''`` jumps.

    A jump of ``W'`` at the origin (``W'(0+) != 0``) is smoothed with the odd
    reflection as the left side. Returns the new piece list and the list of
    smoothed corner locations.
    """
    if delta < 0:
        raise InvalidParams(f"mollify radius must be >= 0, got {delta}")
    corners = []
    first = pieces[0]
    if abs(first.dpoly(first.lo - first.center)) > tol:
        corners.append(0.0)
    for prev, nxt in zip(pieces, pieces[1:]):
        a = prev.dpoly(nxt.lo - prev.center), prev.dpoly.deriv()(nxt.lo - prev.center)
        b = nxt.dpoly(nxt.lo - nxt.center), nxt.dpoly.deriv()(nxt.lo - nxt.center)
        if abs(a[0] - b[0]) > tol * (1 + abs(a[0])) or abs(a[1] - b[1]) > tol * (1 + abs(a[1])):
            corners.append(float(nxt.lo))
    if delta == 0 or not corners:
        return list(pieces), corners

    bounds = [p.lo for p in pieces[1:]]
    for k, c in enumerate(corners):
        if k + 1 < len(corners) and c + delta >= corners[k + 1] - delta:
            raise InvalidParams(f"mollify radius {delta} makes the corners at {c} and {corners[k + 1]} overlap")
        for b in [0.0] + bounds:
            if b != c and abs(b - c) <= delta:
                raise InvalidParams(f"mollify radius {delta} reaches the breakpoint at {b}")

    def piece_at(x):
        k = max(i for i, p in enumerate(pieces) if p.lo <= x)
        return pieces[k]

    out = []
    # walk corners left to right, cutting pieces around each blend window
    windows = [(c - delta if c > 0 else 0.0, c + delta, c) for c in corners]
    edges = sorted({p.lo for p in pieces} | {w[0] for w in windows} | {w[1] for w in windows})
    for lo in edges:
        window = next((w for w in windows if w[0] <= lo < w[1]), None)
        if window is not None:
            if lo != window[0]:
                continue
            c = window[2]
            right = piece_at(c)
            r = _recenter(right.dpoly, right.center, c)
            if c == 0.0:
                left = -r(-_X)
            else:
                lp = piece_at(c - delta)
                left = _recenter(lp.dpoly, lp.center, c)
            out.append(Piece(float(lo), float(c), _blend(left, r, c, delta)))
        else:
            src = piece_at(lo)
            out.append(Piece(float(lo), src.center, src.dpoly))
    return out, corners


def _horner(coefs, u):
    acc = np.zeros_like(u)
    for j in range(coefs.shape[1] - 1, -1, -1):
        acc = acc * u + coefs[:, j]
    return acc


def _table(polys):
    deg = max(p.degree() for p in polys) + 1
    out = np.zeros((len(polys), deg))
    for k, p in enumerate(polys):
        out[k, : len(p.coef)] = p.coef
    return out


def _poly_range(poly, u0, u1):
    cands = [u0, u1]
    d = poly.deriv()
    if d.degree() >= 1:
        for root in d.roots():
            if abs(root.imag) < 1e-12 and u0 < root.real < u1:
                cands.append(root.real)
    vals = poly(np.array(cands))
    return float(vals.min()), float(vals.max())


class Potential:
    """Even potential ``W`` with its first two derivatives.

    ``m`` is the positive well (``W'(m) = 0``), ``inflections`` the number of
    inflection points on ``(0, m)`` and ``corners`` the breakpoints where the
    unsmoothed ``W'`` or ``W''`` jumps (blended over ``mollify_radius`` when it
    is positive).
    """

    def __init__(self, pieces, m, inflections=None, anchor=(0.0, 0.0), mollify_radius=0.0,
                 corners=(), name="custom", params=None):
        if not pieces or pieces[0].lo != 0:
            raise InvalidParams("pieces must start at x = 0")
        los = [p.lo for p in pieces]
        if any(b <= a for a, b in zip(los, los[1:])):
            raise InvalidParams("piece breakpoints must be strictly increasing")
        self.pieces = tuple(pieces)
        self.m = float(m)
        self.inflections = inflections
        self.mollify_radius = float(mollify_radius)
        self.corners = tuple(corners)
        self.name = name
        self.params = dict(params or {})

        self._lo = np.array(los, dtype=float)
        self._center = np.array([p.center for p in pieces], dtype=float)
        d1 = [p.dpoly for p in pieces]
        self._d1_polys = d1
        self._d2_polys = [p.deriv() for p in d1]
        w_polys = [p.integ() for p in d1]
        consts = [0.0]
        for k in range(1, len(pieces)):
            prev = w_polys[k - 1](self._lo[k] - self._center[k - 1]) + consts[k - 1]
            consts.append(prev - w_polys[k](self._lo[k] - self._center[k]))
        self._w_polys = w_polys
        self._const = np.array(consts)
        self._w_tab = _table(w_polys)
        self._d1_tab = _table(d1)
        self._d2_tab = _table(self._d2_polys)
        xa, wa = anchor
        self._const += wa - self.value(xa)

    def __repr__(self):
        return f"Potential({self.name!r}, m={self.m}, delta={self.mollify_radius})"

    def _locate(self, x):
        ax = np.abs(x)
        idx = np.searchsorted(self._lo, ax, side="right") - 1
        return ax, idx, ax - self._center[idx]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        _, idx, u = self._locate(x)
        out = _horner(self._w_tab[idx.ravel()], u.ravel()) + self._const[idx.ravel()]
        return out.reshape(x.shape)[()]

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        _, idx, u = self._locate(x)
        out = _horner(self._d1_tab[idx.ravel()], u.ravel()).reshape(x.shape)
        return (np.where(x < 0, -out, out))[()]

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        _, idx, u = self._locate(x)
        return _horner(self._d2_tab[idx.ravel()], u.ravel()).reshape(x.shape)[()]

    def evaluate(self, x):
        """``(W(x), W'(x), W''(x))`` elementwise."""
        return self.value(x), self.d1(x), self.d2(x)

    def one_sided_d1(self, x, side="right"):
        """Left or right limit of ``W'`` at ``x``; differs from ``d1`` only at jumps."""
        x = float(x)
        ax = abs(x)
        if (side == "right") == (x >= 0):
            k = int(np.searchsorted(self._lo, ax, side="right") - 1)
        else:
            k = max(int(np.searchsorted(self._lo, ax, side="left") - 1), 0)
        val = float(self._d1_polys[k](ax - self._center[k]))
        if x < 0 or (x == 0 and side == "left"):
            return -val
        return val

    def derivative_ranges(self, a, b):
        """Enclosures of ``W'`` and ``W''`` over ``[a, b]`` as two Intervals.

        Each polynomial piece is bounded exactly through its endpoint values
        and interior stationary points; the enclosure is widened by a relative
        1e-12 to absorb rounding.
        """
        a, b = float(a), float(b)
        if a > b:
            raise ValueError(f"empty interval [{a}, {b}]")
        d1 = d2 = None
        for lo, hi, sign in _split_signs(a, b):
            r1, r2 = self._positive_ranges(lo, hi)
            if sign < 0:
                r1 = Interval(-r1.hi, -r1.lo)
            d1 = r1 if d1 is None else d1.hull(r1)
            d2 = r2 if d2 is None else d2.hull(r2)
        return d1.widen(_RANGE_SLACK), d2.widen(_RANGE_SLACK)

    def _positive_ranges(self, lo, hi):
        k0 = int(np.searchsorted(self._lo, lo, side="right") - 1)
        k1 = int(np.searchsorted(self._lo, hi, side="right") - 1)
        r1 = r2 = None
        for k in range(k0, k1 + 1):
            s = max(lo, self._lo[k])
            e = hi if k == len(self._lo) - 1 else min(hi, self._lo[k + 1])
            c = self._center[k]
            p1 = Interval(*_poly_range(self._d1_polys[k], s - c, e - c))
            p2 = Interval(*_poly_range(self._d2_polys[k], s - c, e - c))
            r1 = p1 if r1 is None else r1.hull(p1)
            r2 = p2 if r2 is None else r2.hull(p2)
        return r1, r2

    def count_inflections(self, samples=200_001):
        """Sign changes of ``W''`` on ``(0, m)`` over a fine grid."""
        xs = np.linspace(0, self.m, samples)[1:-1]
        s = np.sign(self.d2(xs))
        s = s[np.abs(self.d2(xs)) > 1e-12]
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def to_json(self):
        if self.name in PRESETS:
            return {"preset": self.name, "params": dict(self.params)}
        return {"piecewise": dict(self.params)}


def _split_signs(a, b):
    if a >= 0:
        return [(a, b, 1)]
    if b <= 0:
        return [(-b, -a, -1)]
    return [(0.0, -a, -1), (0.0, b, 1)]


# ---------------------------------------------------------------- presets


def classical():
    """``W(x) = (1 - x^2)^2 / 4``."""
    cubic = Polynomial([0.0, -1.0, 0.0, 1.0])
    return Potential([Piece(0.0, 0.0, cubic)], m=1.0, inflections=1, anchor=(1.0, 0.0),
                     name="classical")


def two_shelf(delta=0.01, tail=1.0):
    """Two shelves on ``[0, 2]`` and a well at 4, built from ``S`` and ``T``.

    With ``S(x) = x^2/2 - 12x/11`` and ``T(x) = x^2 - 4``, ``W`` is ``S`` on
    ``[0, 1)``, ``S(1) + S(x - 1)`` on ``[1, 2)`` and ``2 S(1) + T(x - 4)`` on
    ``[2, 5]``. Past ``x = 5`` the quadratic is continued by adding
    ``tail * (x - 5)^4 / 4`` so the potential grows faster than ``x^2``.
    ``delta = 0`` keeps the raw corners at 0, 1 and 2.
    """
    if tail <= 0:
        raise InvalidParams("tail coefficient must be positive")
    if not 0 <= delta < 0.5:
        raise InvalidParams(f"two_shelf needs 0 <= delta < 0.5 so the corners stay apart, got {delta}")
    s_prime = Polynomial([-12 / 11, 1.0])
    raw = [
        Piece(0.0, 0.0, s_prime),
        Piece(1.0, 1.0, s_prime),
        Piece(2.0, 4.0, Polynomial([0.0, 2.0])),
        Piece(5.0, 5.0, Polynomial([2.0, 2.0, 0.0, tail])),
    ]
    pieces, corners = mollify(raw, delta)
    return Potential(pieces, m=4.0, inflections=5 if delta > 0 else None, anchor=(0.0, 0.0),
                     mollify_radius=delta, corners=corners, name="two_shelf",
                     params={"delta": delta, "tail": tail})


def quartic_tail():
    """``(|x| - 1)^4`` for ``|x| >= 1/2``, joined by ``-3x + 8x^3`` as ``W'`` inside."""
    pieces = [
        Piece(0.0, 0.0, Polynomial([0.0, -3.0, 0.0, 8.0])),
        Piece(0.5, 1.0, Polynomial([0.0, 0.0, 0.0, 4.0])),
    ]
    return Potential(pieces, m=1.0, inflections=1, anchor=(1.0, 0.0), name="quartic_tail")


def _classical_d1_at(x):
    return x**3 - x, 3 * x**2 - 1


def _classical_tail():
    # x^3 - x written around x = 1 so the well is resolved without cancellation
    return Piece(1.0, 1.0, Polynomial([0.0, 2.0, 3.0, 1.0]))


def staircase(epsilon=0.01, steep=10.0):
    """Classical near 0 and past 1, with ``W'`` oscillating between ``-epsilon`` and ``-steep``.

    ``W'`` equals ``-epsilon`` at 1/4, 1/2, 3/4 and ``-steep`` at
    ``n/4 - epsilon`` (n = 1..4), with monotone cubic Hermite pieces between
    consecutive constraints, so each band ``[n/4 - epsilon, n/4]`` has
    ``W'' >= 0``.
    """
    if not 0 < epsilon < 1 / 16:
        raise InvalidParams(f"staircase needs 0 < epsilon < 1/16, got {epsilon}")
    k0 = 0.25 - 2 * epsilon
    v0, s0 = _classical_d1_at(k0)
    knots = [(k0, v0, s0)]
    for n in (1, 2, 3):
        knots.append((n / 4 - epsilon, -steep, 0.0))
        knots.append((n / 4, -epsilon, 0.0))
    knots.append((1 - epsilon, -steep, 0.0))
    knots.append((1.0, 0.0, 2.0))
    pieces = [Piece(0.0, 0.0, Polynomial([0.0, -1.0, 0.0, 1.0]))]
    for (x0, a, sa), (x1, b, sb) in zip(knots, knots[1:]):
        pieces.append(hermite_piece(x0, x1, a, b, sa, sb))
    pieces.append(_classical_tail())
    return Potential(pieces, m=1.0, inflections=7, anchor=(1.0, 0.0), name="staircase",
                     params={"epsilon": epsilon, "steep": steep})


def plateau(epsilon=0.01, low=0.1, steep=10.0):
    """Classical past 1 with ``W'`` flat at ``-low`` on ``[eps, 1/2 - eps]`` and ``-steep`` on ``[1/2 + eps, 1 - eps]``.

    ``W''`` is strictly positive on ``(1 - eps, 1)``.
    """
    if not 0 < epsilon < 1 / 8:
        raise InvalidParams(f"plateau needs 0 < epsilon < 1/8, got {epsilon}")
    knots = [
        (0.0, 0.0, -1.5 * low / epsilon),
        (epsilon, -low, 0.0),
        (0.5 - epsilon, -low, 0.0),
        (0.5 + epsilon, -steep, 0.0),
        (1 - epsilon, -steep, 0.0),
        (1.0, 0.0, 2.0),
    ]
    pieces = [hermite_piece(x0, x1, a, b, sa, sb)
              for (x0, a, sa), (x1, b, sb) in zip(knots, knots[1:])]
    pieces.append(_classical_tail())
    return Potential(pieces, m=1.0, inflections=1, anchor=(1.0, 0.0), name="plateau",
                     params={"epsilon": epsilon, "low": low, "steep": steep})


PRESETS = {
    "classical": classical,
    "two_shelf": two_shelf,
    "staircase": staircase,
    "quartic_tail": quartic_tail,
    "plateau": plateau,
}


def make_preset(name, params=None):
    params = dict(params or {})
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose one of {sorted(PRESETS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for preset {name!r}: {exc}") from None


def piecewise(breakpoints, dvalues, delta=0.01, tail=1.0, m=None):
    """``W'`` linear between ``(breakpoints[k], dvalues[k])`` on ``x >= 0``.

    Past the last breakpoint the last slope is continued and ``tail * u^3``
    added. Kinks are smoothed with radius ``delta``. The well ``m`` defaults
    to the first point where ``W'`` turns from negative to positive.
    """
    bp = [float(b) for b in breakpoints]
    dv = [float(v) for v in dvalues]
    if len(bp) != len(dv) or len(bp) < 2:
        raise InvalidParams("breakpoints and dvalues need equal length >= 2")
    if bp[0] != 0:
        raise InvalidParams("breakpoints must start at 0")
    if any(b <= a for a, b in zip(bp, bp[1:])):
        raise InvalidParams("breakpoints must be strictly increasing")
    pieces = []
    for k in range(len(bp) - 1):
        slope = (dv[k + 1] - dv[k]) / (bp[k + 1] - bp[k])
        pieces.append(Piece(bp[k], bp[k], Polynomial([dv[k], slope])))
    pieces.append(Piece(bp[-1], bp[-1], Polynomial([dv[-1], slope, 0.0, tail])))
    pieces, corners = mollify(pieces, delta)
    if m is None:
        m = _find_well(pieces)
    params = {"breakpoints": bp, "dvalues": dv, "delta": delta, "tail": tail, "m": m}
    return Potential(pieces, m=m, anchor=(0.0, 0.0), mollify_radius=delta, corners=corners,
                     name="piecewise", params=params)


def _find_well(pieces):
    for k, p in enumerate(pieces):
        hi = pieces[k + 1].lo if k + 1 < len(pieces) else p.lo + 1e6
        xs = np.linspace(p.lo, hi, 4001)
        vals = p.dpoly(xs - p.center)
        idx = np.flatnonzero((vals[:-1] < 0) & (vals[1:] >= 0))
        if idx.size:
            lo_x, hi_x = xs[idx[0]], xs[idx[0] + 1]
            for _ in range(200):
                mid = 0.5 * (lo_x + hi_x)
                if p.dpoly(mid - p.center) < 0:
                    lo_x = mid
                else:
                    hi_x = mid
            return 0.5 * (lo_x + hi_x)
    raise InvalidParams("W' never turns positive: no well found")


def from_json(obj):
    """Potential from ``{"preset": ..., "params": ...}`` or ``{"piecewise": ...}``."""
    if not isinstance(obj, dict):
        raise InvalidParams("potential must be a JSON object")
    if "preset" in obj:
        return make_preset(obj["preset"], obj.get("params"))
    if "piecewise" in obj:
        spec = obj["piecewise"]
        if not isinstance(spec, dict):
            raise InvalidParams("piecewise must be an object")
        try:
            return piecewise(**spec)
        except TypeError as exc:
            raise InvalidParams(f"bad piecewise specification: {exc}") from None
    raise InvalidParams("potential needs a 'preset' or 'piecewise' key")


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst: float


@dataclass(frozen=True)
class ClassReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        return next(c for c in self.checks if c.name == name)


def validate_class(p, samples=6001, span=3.0, growth_threshold=1.0, even_tol=1e-10):
    """Check evenness, the ``W'`` sign pattern, ``W'(m) = 0`` and superquadratic growth.

    The sign pattern is sampled on ``[-span*m, span*m]`` skipping points within
    ``2 * delta`` of a smoothed corner and exact zeros at 0 and ``+-m``.
    """
    m = p.m
    xs = np.linspace(-span * m, span * m, samples)
    w, d1, _ = p.evaluate(xs)
    wr, d1r, _ = p.evaluate(-xs)
    ax = np.abs(xs)
    # W' has no odd symmetry exactly at an unsmoothed jump
    smooth = np.ones_like(xs, dtype=bool)
    for c in p.corners:
        smooth &= np.abs(ax - c) > 2 * p.mollify_radius
    even_err = np.max(np.abs(w - wr) / (1 + np.abs(w)))
    odd_err = np.max((np.abs(d1 + d1r) / (1 + np.abs(d1)))[smooth])
    checks = [Check("even", bool(max(even_err, odd_err) <= even_tol), float(max(even_err, odd_err)))]

    keep = smooth & (ax > 1e-9 * m) & (np.abs(ax - m) > 1e-9 * m)
    want = np.where(ax < m, -1.0, 1.0) * np.sign(xs)
    bad = keep & (np.sign(d1) != want)
    worst = float(np.max(np.abs(d1[bad]))) if bad.any() else 0.0
    checks.append(Check("sign_pattern", not bad.any(), worst))

    well = max(abs(float(p.d1(m))), abs(float(p.d1(-m))))
    checks.append(Check("well", well <= 1e-10, well))

    probes = np.array([10 * m, 100 * m])
    ratios = p.value(probes) / probes**2
    ok = bool(ratios[1] > ratios[0] > growth_threshold)
    checks.append(Check("growth", ok, float(ratios[0])))
    return ClassReport(tuple(checks))

