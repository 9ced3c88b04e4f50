"""Command-line front end.

Every invocation is turned into a ``RunConfig`` (model, command and output
blocks) and executed by :func:`execute`; ``depinn run cfg.toml`` reads the
same structure from a TOML file.  Results go to stdout as JSON carrying
``schema: 1`` and the resolved config; with an output directory the JSON,
CSV tables and (for ``--format svg``) figures are written there too.

Exit status: 0 success, 2 parse/config error, 3 model or precondition
failure, 4 numerical failure (diagnostics in the JSON on stdout).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import flow, ioc, rotation, twistmap
from .configs import PeriodicConfiguration, translate
from .disc import (ADVANCING, RETREATING, build_mediant_config, find_equilibrium_disc,
                   find_sliding_disc)
from .errors import DepinnError, ModelError, NumericalError, PreconditionError
from .model import TiltedEnergy, make_builtin, modify_band, reversed_h, verify_properties

SCHEMA = 1
FORMATS = ("csv", "json", "svg")
EXIT_OK, EXIT_PARSE, EXIT_MODEL, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(DepinnError):
    """Malformed run configuration (exit status 2)."""


# ---------------------------------------------------------------------------
# configuration

# parameters accepted by each verb, with defaults
VERBS = {
    "fd": {"p": 0, "q": 1, "tol": 1e-6, "method": "continuation"},
    "fd-limit": {"p": 0, "q": 1, "side": "plus", "nmax": 9, "tol": 1e-7,
                 "method": "continuation"},
    "equilibrium": {"p": 0, "q": 1, "F": 0.0, "phase": None, "tol": 1e-12},
    "classify": {"p": 0, "q": 1, "F": 0.0, "phase": 0.0},
    "disc": {"p": 0, "q": 1, "F": 0.0, "side": "plus", "tol": 1e-8},
    "front": {"p": 0, "q": 1, "F": 0.0, "side": "plus", "t_max": None},
    "map-orbit": {"p": 0, "q": 1, "F": 0.0, "guess": 0.5},
    "manifolds": {"p": 0, "q": 1, "F": 0.0, "guess": 0.5, "length": 1.0,
                  "branches": list(twistmap.BRANCHES)},
    "action-area": {"p": 0, "q": 1, "guess": 0.5, "length": 2.0},
    "circle-verdict": {"p": 0, "q": 1, "tol": 1e-9},
    "ioc": {"p": 1, "q": 2, "F": 0.0, "n": 400},
    "minimax": {"p": 1, "q": 2, "F": 0.0, "a": None, "b": None, "offset": 0.15,
                "path_nodes": 21},
    "glue": {"p": 0, "q": 1, "F": 0.0, "side": "plus", "n": 4},
    "modify-h": {"M": -1, "N": 2, "samples": 10000},
    "scan": {"over": "F", "p": 0, "q": 1, "start": 0.0, "stop": 0.3, "step": 0.01,
             "values": None, "farey_level": 4, "lo": 0.0, "hi": 1.0, "tol": 1e-6},
}

DEFAULT_MODEL = {"kind": "standard_fk", "k": 1.0}


@dataclass
class RunConfig:
    model: dict
    command: dict
    output: dict = field(default_factory=dict)

    @property
    def verb(self) -> str:
        return self.command["verb"]

    def resolved(self) -> dict:
        """Full config with defaults filled in; raises ConfigError."""
        verb = self.command.get("verb")
        if verb not in VERBS:
            raise ConfigError(f"unknown or missing verb {verb!r}; expected one of {sorted(VERBS)}")
        unknown = set(self.command) - set(VERBS[verb]) - {"verb"}
        if unknown:
            raise ConfigError(f"unknown parameters for {verb}: {sorted(unknown)}")
        cmd = {"verb": verb, **copy.deepcopy(VERBS[verb])}
        cmd.update(self.command)
        model = dict(self.model) if self.model else dict(DEFAULT_MODEL)
        if "kind" not in model:
            raise ConfigError("model block needs a 'kind'")
        out = {"dir": None, "formats": ["json", "csv"], "jobs": 1}
        bad = set(self.output) - set(out)
        if bad:
            raise ConfigError(f"unknown output keys {sorted(bad)}")
        out.update(self.output)
        fmts = out["formats"]
        if isinstance(fmts, str):
            fmts = [f for f in fmts.split(",") if f]
        if any(f not in FORMATS for f in fmts):
            raise ConfigError(f"formats must be among {FORMATS}, got {fmts}")
        out["formats"] = sorted(set(fmts))
        if not isinstance(out["jobs"], int) or out["jobs"] < 1:
            raise ConfigError("output.jobs must be a positive integer")
        return {"model": model, "command": cmd, "output": out}


def load_config(path) -> RunConfig:
    """Read a TOML run config with ``[model]``, ``[command]`` and ``[output]``."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    extra = set(data) - {"model", "command", "output"}
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")
    if "command" not in data:
        raise ConfigError("config needs a [command] section")
    return RunConfig(data.get("model", {}), data["command"], data.get("output", {}))


def build_model(block: dict):
    """Generating function from a model block.

    Besides the catalog parameters the block may hold ``modify_band = [M, N]``
    and ``reversed = true``.
    """
    block = dict(block)
    band_mod = block.pop("modify_band", None)
    rev = block.pop("reversed", False)
    h = make_builtin(block)
    if band_mod is not None:
        h = modify_band(h, int(band_mod[0]), int(band_mod[1]))
    if rev:
        h = reversed_h(h)
    return h


def validate_model(h, samples: int = 400) -> dict:
    rep = verify_properties(h, samples=samples)
    if not rep["twist_ok"] or rep["periodicity_violation"] > 1e-9:
        raise ModelError("model fails the twist or periodicity check", **rep)
    return rep


# ---------------------------------------------------------------------------
# results

@dataclass
class Artifact:
    result: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    figures: dict = field(default_factory=dict)  # name -> callable(path)


def _clean(obj):
    """JSON-safe copy: numpy to python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# helpers shared by verbs

def _tilted(h, F):
    return TiltedEnergy(h, float(F))


def _lowest_minimizer(p, q, E):
    mins = flow.minimizers(p, q, E)
    if not mins:
        raise NumericalError("no minimizer found", p=p, q=q)
    return min(mins, key=lambda m: flow.energy(m.config, E)).config


def _asymptotes(p, q, side, E):
    """Ordered asymptote pair and kind for a ``p/q+`` or ``p/q-`` discommensuration."""
    if side not in ("plus", "minus"):
        raise PreconditionError("side must be 'plus' or 'minus'", side=side)
    y = _lowest_minimizer(p, q, E)
    pair = rotation.farey_neighbours(p, q)
    if side == "plus":
        pp, qq = pair.upper
        return y, translate(y, qq, pp), ADVANCING, (pp, qq)
    pp, qq = pair.lower
    return translate(y, qq, pp), y, RETREATING, (pp, qq)


def _config_rows(c):
    n = c.indices if hasattr(c, "indices") else np.arange(c.q)
    return [(int(a), float(b)) for a, b in zip(n, c.at(n))]


# ---------------------------------------------------------------------------
# verbs

def _fd(h, a, jobs):
    r = flow.depinning_force(a["p"], a["q"], h, method=a["method"], tol_F=a["tol"])
    d = r.to_dict()
    return Artifact(d, {"fd": (["p", "q", "F_lo", "F_hi", "F_d"],
                               [(r.p, r.q, r.F_lo, r.F_hi, r.F_d)])})


def _fd_limit(h, a, jobs):
    est = rotation.fd_limit(a["p"], a["q"], a["side"], h, n_max=a["nmax"], tol_F=a["tol"],
                            method=a["method"], jobs=jobs)
    rows = [(P, Q, F) for P, Q, F in est.samples]
    figs = {"fd_limit": lambda path: _plot().fd_figure(
        [P / Q for P, Q, _ in rows], [F for *_, F in rows], path,
        limit=est.estimate, center=est.F_d_center)}
    return Artifact(est.to_dict(), {"fd_limit": (["P", "Q", "F_d"], rows)}, figs)


def _equilibrium(h, a, jobs):
    E = _tilted(h, a["F"])
    p, q = a["p"], a["q"]
    if a["phase"] is None:
        found = flow.minimizers(p, q, E)
    else:
        found = [flow.find_equilibrium(PeriodicConfiguration.uniform(p, q, a["phase"]), E,
                                       tol=a["tol"])]
    res = [{"x": r.config.x.tolist(), "residual": r.residual, "morse_index": r.morse_index,
            "degenerate": r.degenerate, "energy": flow.energy(r.config, E)} for r in found]
    rows = [(i, j, float(v)) for i, r in enumerate(found) for j, v in enumerate(r.config.x)]
    figs = {"equilibrium": lambda path: _plot().aubry_figure([r.config for r in found], path)}
    return Artifact({"equilibria": res}, {"equilibrium": (["id", "n", "x"], rows)}, figs)


def _classify(h, a, jobs):
    E = _tilted(h, a["F"])
    v = flow.classify(PeriodicConfiguration.uniform(a["p"], a["q"], a["phase"]), E,
                      flow.FlowSettings.for_model(h))
    return Artifact(_verdict_dict(v))


def _verdict_dict(v):
    if isinstance(v, flow.Pinned):
        return {"kind": "pinned", "v": 0.0, "residual": v.residual, "t": v.t,
                "certificate": v.certificate, "x": v.equilibrium.x.tolist()}
    if isinstance(v, flow.Sliding):
        return {"kind": "sliding", "v": v.v, "T": v.T, "recurrence_error": v.recurrence_error}
    return {"kind": "undetermined", "v": None, "residual": v.residual,
            "displacement": v.displacement, "t": v.t}


def _disc(h, a, jobs):
    E = _tilted(h, a["F"])
    xm, xp, kind, nb = _asymptotes(a["p"], a["q"], a["side"], E)
    sol = find_equilibrium_disc(xm, xp, kind, E, tail_tol=a["tol"])
    d = sol.to_dict()
    d["neighbour"] = list(nb)
    w = sol.window
    figs = {"disc": lambda path: _plot().aubry_figure([w, xm, xp], path,
                                                      labels=["disc", "left", "right"])}
    return Artifact(d, {"disc": (["n", "x"], _config_rows(w))}, figs)


def _front(h, a, jobs):
    E = _tilted(h, a["F"])
    xm, xp, kind, nb = _asymptotes(a["p"], a["q"], a["side"], E)
    out = find_sliding_disc(xm, xp, kind, E, flow.FlowSettings.for_model(h), t_max=a["t_max"])
    d = out.to_dict()
    d["neighbour"] = list(nb)
    tables = {"front": (["n", "x"], _config_rows(out.window))}
    figs = {}
    if getattr(out, "samples_t", None) is not None:
        st, sx, first = out.samples_t, out.samples_x, out.window.l
        figs["front"] = lambda path: _plot().front_figure(st, sx, path, first)
    return Artifact(d, tables, figs)


def _orbit(h, a):
    E = _tilted(h, a.get("F", 0.0))
    guess = a["guess"]
    if a["q"] > 1 and np.isscalar(guess):
        guess = _lowest_minimizer(a["p"], a["q"], E) if guess is None else \
            PeriodicConfiguration.uniform(a["p"], a["q"], guess)
    return E, twistmap.find_periodic_orbit(a["p"], a["q"], E, guess)


def _map_orbit(h, a, jobs):
    E, o = _orbit(h, a)
    return Artifact(o.to_dict(), {"orbit": (["j", "x", "y"],
                                            [(j, *map(float, pt)) for j, pt in enumerate(o.points)])})


def _manifolds(h, a, jobs):
    E, o = _orbit(h, a)
    bad = set(a["branches"]) - set(twistmap.BRANCHES)
    if bad:
        raise PreconditionError(f"unknown branches {sorted(bad)}")
    arcs = [twistmap.grow_manifold(o, b, a["length"]) for b in a["branches"]]
    rows = [(arc.branch, *r) for arc in arcs for r in arc.to_rows()]
    res = {"orbit": o.to_dict(),
           "arcs": [{"branch": arc.branch, "points": len(arc.points), "length": float(arc.s[-1]),
                     "mu": arc.mu, "eps": arc.eps} for arc in arcs]}
    figs = {"manifolds": lambda path: _plot().manifold_figure(arcs, path, orbits=[o])}
    return Artifact(res, {"manifolds": (["branch", "s", "x", "y"], rows)}, figs)


def _action_area(h, a, jobs):
    E, o = _orbit(h, {**a, "F": 0.0})
    U = twistmap.grow_manifold(o, "unstable-right", a["length"])
    S = twistmap.grow_manifold(twistmap.translate_orbit(o, 0, 1), "stable-left", a["length"])
    # skip crossings of long arcs folding back near the base points
    pts = twistmap.find_intersections(U, S, avoid=(U.base, S.base), avoid_radius=0.1,
                                       limit=2, order="sum")
    if len(pts) < 2:
        raise NumericalError("fewer than two manifold intersections", found=len(pts))
    aa = twistmap.action_area(U, S, pts[0], pts[1])
    res = {**aa.to_dict(), "points": [z.point.tolist() for z in pts[:2]],
           "tau": o.tau}
    figs = {"action_area": lambda path: _plot().manifold_figure([U, S], path, orbits=[o])}
    return Artifact(res, {}, figs)


def _circle_verdict(h, a, jobs):
    v = twistmap.circle_verdict(a["p"], a["q"], h, coincide_tol=a["tol"])
    return Artifact(v.to_dict())


def _ioc(h, a, jobs):
    E = _tilted(h, a["F"])
    p, q = a["p"], a["q"]
    cat = ioc.find_all_equilibria(p, q, E)
    built = ioc.build_ioc(p, q, E, cat, n=a["n"])
    circles, tables = [], {}
    for i, smp in enumerate(built.circles):
        rep = ioc.verify_ioc(smp, E)
        circles.append({"label": smp.label, "points": len(smp.s), "report": rep.to_dict()})
        tables[f"ioc_{i}"] = (["s"] + [f"x_{j}" for j in range(q)],
                              [(float(si), *map(float, c)) for si, c in zip(smp.s, smp.configs)])
    tables["catalog"] = (["id", "index", "energy"] + [f"x_{j}" for j in range(q)],
                         [(i, e.index, e.energy, *map(float, e.config.x))
                          for i, e in enumerate(cat.entries)])
    res = {"catalog": cat.to_dict(), "circles": circles, "failures": built.failures}
    figs = {"ioc": lambda path: _plot().ioc_figure(built.circles, path, cat)}
    return Artifact(res, tables, figs)


def _minimum_pair(cat):
    mins = cat.by_index(0)
    if not mins:
        raise NumericalError("catalog has no minima")
    low = min(e.energy for e in mins)
    best = [e for e in mins if e.energy <= low + 1e-9]
    A = best[0].config
    cands = []
    for e in best:
        for s in range(cat.q):
            for r in (-1, 0, 1):
                t = translate(e.config, s, r)
                d = float(np.max(np.abs(t.x - A.x)))
                if d > 1e-6:
                    cands.append((d, tuple(np.round(t.x, 12)), t))
    if not cands:
        raise NumericalError("no second minimum at the lowest energy")
    cands.sort(key=lambda c: (c[0], c[1]))
    return A, cands[0][2]


def _minimax(h, a, jobs):
    E = _tilted(h, a["F"])
    p, q = a["p"], a["q"]
    if a["a"] is None or a["b"] is None:
        A, B = _minimum_pair(ioc.find_all_equilibria(p, q, E))
    else:
        A, B = (PeriodicConfiguration(p, q, np.asarray(v, dtype=float)) for v in (a["a"], a["b"]))
    vias = [None]
    if a["offset"] and q >= 2:
        d = B.x - A.x
        basis = np.linalg.svd(np.vstack([d, np.ones(q)]))[2]
        perp = basis[-1] if q > 2 else np.array([-d[1], d[0]]) / np.linalg.norm(d)
        mid = 0.5 * (A.x + B.x)
        vias = [mid + a["offset"] * perp, mid - a["offset"] * perp]
    runs = [ioc.minimax(A, B, E, path_nodes=a["path_nodes"], via=v) for v in vias]
    res = {"a": A.x.tolist(), "b": B.x.tolist(), "saddles": [r.to_dict() for r in runs]}
    if len(runs) == 2:
        res["height_difference"] = abs(runs[0].height - runs[1].height)
    rows = [(i, j, float(e)) for i, r in enumerate(runs) for j, e in enumerate(r.energies)]
    figs = {f"minimax_{i}": (lambda path, r=r: _plot().path_figure(r.energies, path))
            for i, r in enumerate(runs)}
    return Artifact(res, {"minimax": (["run", "image", "energy"], rows)}, figs)


def _glue(h, a, jobs):
    E = _tilted(h, a["F"])
    p, q = a["p"], a["q"]
    xm, xp, kind, (pp, qq) = _asymptotes(p, q, a["side"], E)
    if kind != ADVANCING:
        raise PreconditionError("glue builds mediant configurations from the plus side")
    z = find_equilibrium_disc(xm, xp, kind, E)
    cfg, resid, tail = build_mediant_config(xm, z, pp, qq, a["n"], E=E)
    res = {"type": [cfg.p, cfg.q], "x": cfg.x.tolist(), "max_residual": resid,
           "tail_gap": tail, "disc_residual": z.residual}
    try:
        eq = flow.find_equilibrium(cfg, E)
        res["polished_residual"] = eq.residual
        res["polish_distance"] = float(np.max(np.abs(eq.config.x - cfg.x)))
    except NumericalError as exc:
        res["polish_error"] = str(exc)
    return Artifact(res, {"glue": (["n", "x"], [(j, float(v)) for j, v in enumerate(cfg.x)])})


def _modify_h(h, a, jobs):
    M, N = int(a["M"]), int(a["N"])
    ht = modify_band(h, M, N)
    rep = verify_properties(ht, samples=int(a["samples"]))
    x = np.linspace(0.0, 1.0, 7)
    seam = {}
    for S in (M, N):
        eps = 1e-7
        lo, hi = ht.eval(x, x + S - eps), ht.eval(x, x + S + eps)
        seam[str(S)] = {"h_jump": float(np.max(np.abs(hi.h - lo.h))),
                        "h12_jump": float(np.max(np.abs(hi.h12 - lo.h12)))}
    d = np.linspace(M - 2, N + 2, 201)
    vals = ht.eval(np.zeros_like(d), d)
    rows = [(float(s), float(v), float(w)) for s, v, w in zip(d, vals.h, vals.h12)]
    return Artifact({"band": [M, N], "properties": rep, "seams": seam},
                    {"modify_h": (["spacing", "h", "h12"], rows)})


# ---------------------------------------------------------------------------
# scan

def scan_grid(a) -> list:
    """Grid values of a scan, in order."""
    if a["over"] == "F":
        if a["values"] is not None:
            vals = [float(v) for v in a["values"]]
        else:
            start, stop, step = float(a["start"]), float(a["stop"]), float(a["step"])
            if step <= 0:
                raise PreconditionError("scan step must be positive", step=step)
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [round(start + i * step, 12) for i in range(max(n, 0))]
    elif a["over"] == "omega":
        if a["values"] is not None:
            vals = [Fraction(str(v)) for v in a["values"]]
        else:
            lo, hi = Fraction(str(a["lo"])), Fraction(str(a["hi"]))
            L = int(a["farey_level"])
            vals = sorted({Fraction(P, Q) for Q in range(1, L + 1)
                           for P in range(math.floor(lo * Q), math.ceil(hi * Q) + 1)
                           if lo <= Fraction(P, Q) <= hi})
    else:
        raise PreconditionError("scan.over must be 'F' or 'omega'", over=a["over"])
    if not vals:
        raise PreconditionError("scan grid is empty")
    return vals


def _scan_row(job):
    idx, model, a, val = job
    h = build_model(model)
    try:
        if a["over"] == "F":
            E = _tilted(h, val)
            v = flow.classify(PeriodicConfiguration.uniform(a["p"], a["q"], 0.0), E,
                              flow.FlowSettings.for_model(h))
            d = _verdict_dict(v)
            return {"index": idx, "F": val, "kind": d["kind"], "v": d["v"], "error": None}
        r = flow.depinning_force(val.numerator, val.denominator, h, tol_F=a["tol"])
        return {"index": idx, "omega": str(val), "p": val.numerator, "q": val.denominator,
                "F_d": r.F_d, "error": None}
    except DepinnError as exc:
        key = "F" if a["over"] == "F" else "omega"
        return {"index": idx, key: val if key == "F" else str(val),
                "error": f"{type(exc).__name__}: {exc}"}


def _scan(h, a, jobs, model=None):
    vals = scan_grid(a)
    work = [(i, model, a, v) for i, v in enumerate(vals)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_scan_row, work))
    else:
        rows = [_scan_row(w) for w in work]
    rows.sort(key=lambda r: r["index"])
    failures = [r for r in rows if r["error"]]
    if a["over"] == "F":
        header = ["index", "F", "kind", "v", "error"]
        table = [(r["index"], r["F"], r.get("kind", ""), _na(r.get("v")), r["error"] or "")
                 for r in rows]
        ok = [r for r in rows if not r["error"] and r["v"] is not None]
        figs = {"scan": lambda path: _plot().velocity_figure(
            [r["F"] for r in ok], [r["v"] for r in ok], path, [r["F"] for r in failures])}
    else:
        header = ["index", "p", "q", "F_d", "error"]
        table = [(r["index"], *(r.get(k, "") for k in ("p", "q")), _na(r.get("F_d")),
                  r["error"] or "") for r in rows]
        ok = [r for r in rows if not r["error"]]
        figs = {"scan": lambda path: _plot().fd_figure(
            [r["p"] / r["q"] for r in ok], [r["F_d"] for r in ok], path)}
    return Artifact({"rows": rows, "failures": len(failures)}, {"scan": (header, table)}, figs)


def _na(v):
    return "nan" if v is None else float(v)


HANDLERS = {
    "fd": _fd, "fd-limit": _fd_limit, "equilibrium": _equilibrium, "classify": _classify,
    "disc": _disc, "front": _front, "map-orbit": _map_orbit, "manifolds": _manifolds,
    "action-area": _action_area, "circle-verdict": _circle_verdict, "ioc": _ioc,
    "minimax": _minimax, "glue": _glue, "modify-h": _modify_h, "scan": _scan,
}


def _plot():
    from . import plotting
    return plotting


# ---------------------------------------------------------------------------
# execution

def execute(cfg: RunConfig):
    """Run a config; returns ``(document, artifact)``.  Errors propagate."""
    res = cfg.resolved()
    h = build_model(res["model"])
    validate_model(h)
    a = {k: v for k, v in res["command"].items() if k != "verb"}
    jobs = res["output"]["jobs"]
    fn = HANDLERS[res["command"]["verb"]]
    art = fn(h, a, jobs, model=res["model"]) if fn is _scan else fn(h, a, jobs)
    doc = {"schema": SCHEMA, "status": "ok", "config": res, "result": art.result}
    return doc, art


def write_artifacts(doc, art: Artifact | None, out: dict) -> list:
    """Write JSON, CSV and SVG files into ``out['dir']``; returns the paths."""
    if not out.get("dir"):
        return []
    d = Path(out["dir"])
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    verb = doc["config"]["command"]["verb"]
    paths = []
    if "json" in out["formats"] or art is None:
        p = d / f"{verb}.json"
        p.write_text(dumps(doc))
        paths.append(p)
    if art is None:
        return paths
    if "csv" in out["formats"]:
        for name, (header, rows) in sorted(art.tables.items()):
            p = d / f"{name}.csv"
            p.write_text(_csv_text(header, rows))
            paths.append(p)
    if "svg" in out["formats"]:
        for name, fig in sorted(art.figures.items()):
            paths.append(fig(d / f"{name}.svg"))
    return paths


# ---------------------------------------------------------------------------
# argument parsing

def _value(text):
    """Parse a ``--set`` value: TOML scalar or array, else a string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _pairs(items, what):
    out = {}
    for it in items or ():
        if "=" not in it:
            raise ConfigError(f"{what} expects KEY=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = _value(v.strip())
    return out


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--model", default=None, help="catalog model kind")
    g.add_argument("--k", type=float, default=None, help="coupling / pinning strength")
    g.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="extra model parameter")
    c = common.add_argument_group("command")
    c.add_argument("--p", type=int)
    c.add_argument("--q", type=int)
    c.add_argument("--F", type=float)
    c.add_argument("--tol", type=float)
    c.add_argument("--side", choices=["plus", "minus"])
    c.add_argument("--nmax", type=int)
    c.add_argument("--method", choices=["continuation", "bisection", "cross-validated"])
    c.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="any other verb parameter")
    o = common.add_argument_group("output")
    o.add_argument("--output-dir", default=None)
    o.add_argument("--format", action="append", default=None,
                   help="csv, json or svg (repeatable or comma separated)")
    o.add_argument("--jobs", type=int, default=None)

    ap = argparse.ArgumentParser(prog="depinn", description="Depinning and discommensuration "
                                 "computations for Frenkel-Kontorova type chains.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sub.add_parser(verb, parents=[common])
    r = sub.add_parser("run", parents=[common], help="execute a TOML run config")
    r.add_argument("config")
    return ap


def config_from_args(ns) -> RunConfig:
    if ns.verb == "run":
        cfg = load_config(ns.config)
        cmd = dict(cfg.command)
        model = dict(cfg.model)
        output = dict(cfg.output)
    else:
        cmd, model, output = {"verb": ns.verb}, {}, {}
    if ns.model is not None:
        model = {"kind": ns.model}
    if ns.k is not None:
        model["kind"] = model.get("kind", DEFAULT_MODEL["kind"])
        model["k"] = ns.k
    if ns.param:
        model.update(_pairs(ns.param, "--param"))
    if model and "kind" not in model:
        model["kind"] = DEFAULT_MODEL["kind"]
    for key in ("p", "q", "F", "tol", "side", "nmax", "method"):
        v = getattr(ns, key)
        if v is not None:
            cmd[key] = v
    cmd.update(_pairs(ns.set, "--set"))
    if ns.output_dir is not None:
        output["dir"] = ns.output_dir
    if ns.format:
        output["formats"] = [f for item in ns.format for f in item.split(",") if f]
    if ns.jobs is not None:
        output["jobs"] = ns.jobs
    return RunConfig(model, cmd, output)


def main(argv=None) -> int:
    ap = _parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    doc = None
    try:
        cfg = config_from_args(ns)
        resolved = cfg.resolved()
        doc, art = execute(cfg)
        write_artifacts(doc, art, resolved["output"])
    except ConfigError as exc:
        sys.stderr.write(f"depinn: {exc}\n")
        return EXIT_PARSE
    except (ModelError, PreconditionError, ValueError) as exc:
        err = _error_doc(exc, locals().get("resolved"))
        sys.stdout.write(dumps(err))
        sys.stderr.write(f"depinn: {exc}\n")
        return EXIT_MODEL
    except NumericalError as exc:
        err = _error_doc(exc, locals().get("resolved"))
        sys.stdout.write(dumps(err))
        if locals().get("resolved"):
            try:
                write_artifacts(err, None, resolved["output"])
            except ConfigError:
                pass
        return EXIT_NUMERICAL
    sys.stdout.write(dumps(doc))
    return EXIT_OK


def _error_doc(exc, resolved):
    return {"schema": SCHEMA, "status": "error", "config": resolved,
            "error": {"type": type(exc).__name__, "message": str(exc),
                      "diagnostics": getattr(exc, "diagnostics", {})}}


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
