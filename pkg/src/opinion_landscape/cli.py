"""Command-line front end: ``opinion-landscape <command> ...``.

Exit status 0 on success, 2 on configuration errors (message anchored as
``file:line: ...``), 1 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import certify as certify_mod
from . import continuation, landscape
from .energy import bounding_radius, from_json as energy_from_json
from .errors import (ConfigError, DisconnectedGraph, InvalidOrdering, LandscapeError,
                     MissingBaseline, NotBalanced)
from .signed_graph import SignedGraph, harary_partition, l_norm, spectral_bound

log = logging.getLogger("opinion_landscape")

CONFIG_ERRORS = (ConfigError, DisconnectedGraph, InvalidOrdering, NotBalanced)


# ---------------------------------------------------------------- config io


class Config:
    """Parsed JSON file together with its raw bytes (for hashing)."""

    def __init__(self, path):
        self.path = str(path)
        try:
            self.raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", 1, self.path) from None
        try:
            self.data = json.loads(self.raw.decode("utf-8"))
        except UnicodeDecodeError:
            raise ConfigError("config is not UTF-8 text", 1, self.path) from None
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, exc.lineno, self.path) from None

    @property
    def sha256(self):
        return hashlib.sha256(self.raw).hexdigest()

    def anchor(self, exc):
        """Re-raise ``exc`` with this file as source and a best-guess line."""
        if exc.source is not None:
            return exc
        line = exc.line or self._guess_line(str(exc))
        return type(exc)(exc.args[0] if exc.args else str(exc), line, self.path)

    def _guess_line(self, message):
        text = self.raw.decode("utf-8", "replace").splitlines()
        tokens = _quoted(message)
        if "edge" in message:
            tokens.append('"edges"')
        for token in tokens:
            for k, ln in enumerate(text, 1):
                if token in ln:
                    return k
        return 1


def _quoted(message):
    out, parts = [], message.split("'")
    for k in range(1, len(parts), 2):
        out.append(f'"{parts[k]}"')
    return out


def _energy(cfg, kappa=None):
    try:
        return energy_from_json(cfg.data, kappa=kappa)
    except ConfigError as exc:
        raise cfg.anchor(exc) from None


def _graph(cfg):
    data = cfg.data.get("graph", cfg.data) if isinstance(cfg.data, dict) else cfg.data
    try:
        if not isinstance(data, dict) or "n" not in data or "edges" not in data:
            raise ConfigError("graph needs 'n' and 'edges'")
        return SignedGraph.from_edges(data["n"], data["edges"])
    except ConfigError as exc:
        raise cfg.anchor(exc) from None


def parse_grid(spec):
    """``a:b:step`` -> inclusive list of floats (end included within 1e-12)."""
    try:
        a, b, h = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ConfigError(f"kappa grid must look like a:b:step, got {spec!r}") from None
    if not (h > 0 and b >= a and math.isfinite(a) and math.isfinite(b)):
        raise ConfigError(f"kappa grid {spec!r} needs step > 0 and b >= a")
    count = int(math.floor((b - a) / h + 1e-12 / h)) + 1
    return [round(a + k * h, 12) for k in range(count)]


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)
    return str(v)


def provenance(cfg, seed=None):
    parts = [f"opinion-landscape {__version__}", f"config_sha256={cfg.sha256}"]
    parts.append(f"seed={seed if seed is not None else 'none'}")
    return "# " + " ".join(parts)


def csv_text(header, rows, cfg, seed=None):
    buf = io.StringIO()
    buf.write(provenance(cfg, seed) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def json_text(obj, cfg, seed=None):
    obj = {"provenance": {"version": __version__, "config_sha256": cfg.sha256, "seed": seed}, **obj}
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, Fraction):
        return float(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _emit(text, path, stdout):
    if path:
        Path(path).write_text(text)
    else:
        stdout.write(text)


def _say(line, args, stdout, stderr):
    """Summary lines go to stdout when the data went to a file, else to stderr."""
    print(line, file=stdout if args.output else stderr)


# ---------------------------------------------------------------- commands


def cmd_balance(args, stdout, stderr):
    cfg = Config(args.graph)
    g = _graph(cfg)
    res = harary_partition(g)
    if res.balanced:
        v1 = ", ".join(str(i + 1) for i in res.part1)
        v2 = ", ".join(str(i + 1) for i in res.part2)
        print(f"Balanced; V1 = {{{v1}}}, V2 = {{{v2}}}", file=stdout)
    else:
        cyc = "-".join(str(i + 1) for i in res.cycle)
        k = res.negative_edges
        print(f"Unbalanced; cycle {cyc} has {k} negative edge{'s' if k != 1 else ''}", file=stdout)
    return 0


def _minima_rows(ms):
    return [[ms.kappa, *p.coords.tolist(), p.energy, p.min_hess_eig] for p in ms.minima]


def cmd_minima(args, stdout, stderr):
    cfg = Config(args.config)
    e = _energy(cfg, kappa=args.kappa)
    ms = landscape.enumerate_minima(e, args.budget, args.seed, threads=args.threads,
                                    stratified=args.stratified)
    if args.format == "json":
        obj = {"kappa": ms.kappa, "count": ms.count, "budget": ms.budget, "radius": ms.radius,
               "dedup_tolerance": ms.dedup_tolerance, "skipped": ms.skipped,
               "minima": [{"coords": p.coords.tolist(), "energy": p.energy,
                           "min_hess_eig": p.min_hess_eig, "kind": p.kind} for p in ms.minima]}
        _emit(json_text(obj, cfg, args.seed), args.output, stdout)
    else:
        header = ["kappa", *[f"x{i + 1}" for i in range(e.n)], "energy", "min_hess_eig"]
        _emit(csv_text(header, _minima_rows(ms), cfg, args.seed), args.output, stdout)
    if args.summary:
        Path(args.summary).write_text(csv_text(["kappa", "count"], [[ms.kappa, ms.count]],
                                               cfg, args.seed))
    _say(f"count={ms.count} (lower bound)", args, stdout, stderr)
    if ms.skipped:
        _say(f"skipped={ms.skipped}", args, stdout, stderr)
    return 0


def cmd_sweep(args, stdout, stderr):
    cfg = Config(args.config)
    try:
        grid = parse_grid(args.kappa_grid)
    except ConfigError as exc:
        raise ConfigError(exc.args[0], 1, "--kappa-grid") from None
    e = _energy(cfg)
    rec = landscape.sweep_counts(e, grid, args.budget, args.seed, warm_start=not args.no_warm_start,
                                 threads=args.threads)
    try:
        idx = landscape.nonmonotonicity_index(rec)
    except MissingBaseline:
        idx = None
    if args.format == "json":
        obj = {"kappas": rec.kappas, "counts": rec.counts, "digests": rec.digests,
               "budget": rec.budget, "nonmonotonicity_index": idx}
        _emit(json_text(obj, cfg, args.seed), args.output, stdout)
    else:
        _emit(csv_text(["kappa", "count"], rec.rows(), cfg, args.seed), args.output, stdout)
    if args.minima_output:
        rows = [r for ms in rec.minima for r in _minima_rows(ms)]
        header = ["kappa", *[f"x{i + 1}" for i in range(e.n)], "energy", "min_hess_eig"]
        Path(args.minima_output).write_text(csv_text(header, rows, cfg, args.seed))
    _say(f"nonmonotonicity_index={idx if idx is not None else 'n/a (no kappa = 0 in grid)'}",
         args, stdout, stderr)
    return 0


def cmd_branches(args, stdout, stderr):
    cfg = Config(args.config)
    e = _energy(cfg, kappa=0.0)
    branches, events = continuation.trace_all(e, args.kappa_max, step=args.step,
                                              threads=args.threads)
    events_obj = {"kappa_max": args.kappa_max, "step": args.step,
                  "events": [ev.to_json() for ev in events]}
    if args.format == "json":
        obj = {"branches": [{"branch_id": k, "terminal": b.terminal,
                             "points": [[p.kappa, *p.coords.tolist(), p.energy, p.min_hess_eig,
                                         p.morse_index] for p in b.points]}
                            for k, b in enumerate(branches)], **events_obj}
        _emit(json_text(obj, cfg), args.output, stdout)
    else:
        header = ["branch_id", "kappa", *[f"x{i + 1}" for i in range(e.n)], "energy",
                  "min_hess_eig", "morse_index"]
        _emit(csv_text(header, continuation.branch_rows(branches), cfg), args.output, stdout)
    events_path = args.events
    if events_path is None and args.output and args.format == "csv":
        events_path = str(Path(args.output).with_suffix(".events.json"))
    if events_path:
        Path(events_path).write_text(json_text(events_obj, cfg))
    distinct = sorted({round(ev.kappa, 5) for ev in events})
    _say("terminal kappas: " + ", ".join(f"{k:.5f}" for k in distinct), args, stdout, stderr)
    return 0


def cmd_certify(args, stdout, stderr):
    cfg = Config(args.request)
    try:
        resp = certify_mod.certify_request(cfg.data, threads=args.threads,
                                           refine=not args.no_refine)
    except ConfigError as exc:
        raise cfg.anchor(exc) from None
    _emit(json_text(resp, cfg), args.output, stdout)
    c = resp["counts"]
    _say(f"minima={c[certify_mod.CERTIFIED_MINIMUM]} "
         f"critical_points={c[certify_mod.CERTIFIED_CRITICAL_POINT]} "
         f"inconclusive={c[certify_mod.INCONCLUSIVE]}", args, stdout, stderr)
    return 0


def cmd_bound(args, stdout, stderr):
    cfg = Config(args.config)
    e = _energy(cfg, kappa=args.kappa)
    L = e.graph.laplacian
    norm = l_norm(L)
    bound, eigs = spectral_bound(L)
    lines = [
        f"kappa={_fmt(e.kappa)} convention={e.convention}",
        f"bounding_radius={_fmt(bounding_radius(e))}",
        f"l_norm={_fmt(norm)}",
        f"gershgorin_bound={_fmt(bound)}",
        "laplacian_eigenvalues=" + " ".join(_fmt(v) for v in eigs),
    ]
    shelf = dict(M=args.curvature, ell=args.ell, r=args.r)
    if e.potential.name == "two_shelf":
        defaults = {"M": 1, "ell": 3, "r": 5}
        shelf = {k: defaults[k] if v is None else v for k, v in shelf.items()}
    if None in shelf.values() or norm == 0:
        lines.append("persistence_kappa=n/a")
    else:
        exact = [Fraction(str(v)) for v in (shelf["M"], shelf["ell"], e.potential.m, shelf["r"])]
        pk = certify_mod.persistence_kappa(*exact, Fraction(str(norm)), e.convention)
        lines.append(f"persistence_kappa={_fmt(float(pk))} ({pk})")
    print("\n".join(lines), file=stdout)
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="opinion-landscape",
                                description="Energy landscapes of double-well potentials on signed graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        if out:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
            sp.add_argument("-o", "--output", help="data file (default: stdout)")

    sp = sub.add_parser("balance", help="structural balance of a graph")
    sp.add_argument("graph")
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("minima", help="Monte Carlo local minima at one coupling")
    sp.add_argument("config")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--budget", type=int, default=10_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--stratified", action="store_true")
    sp.add_argument("--summary", help="write a kappa,count CSV here")
    common(sp)
    sp.set_defaults(func=cmd_minima)

    sp = sub.add_parser("sweep", help="minima counts over a coupling grid")
    sp.add_argument("config")
    sp.add_argument("--kappa-grid", required=True, help="a:b:step, both ends inclusive")
    sp.add_argument("--budget", type=int, default=10_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--no-warm-start", action="store_true")
    sp.add_argument("--minima-output", help="also write every minimum found")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("branches", help="continue all uncoupled critical points in kappa")
    sp.add_argument("config")
    sp.add_argument("--kappa-max", type=float, required=True)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--events", help="terminal events JSON (default: next to --output)")
    common(sp)
    sp.set_defaults(func=cmd_branches)

    sp = sub.add_parser("certify", help="certify critical points / minima in boxes")
    sp.add_argument("request")
    sp.add_argument("--no-refine", action="store_true", help="only test the boxes as given")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("bound", help="radius, norms and thresholds for a config")
    sp.add_argument("config")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--curvature", type=float, help="M: lower bound of W'' on [ell, r]")
    sp.add_argument("--ell", type=float)
    sp.add_argument("--r", type=float)
    sp.set_defaults(func=cmd_bound)
    return p


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=stderr)
    try:
        return args.func(args, stdout, stderr)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except (LandscapeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
