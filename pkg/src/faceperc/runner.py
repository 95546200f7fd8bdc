"""Config-driven experiment runs: validation, replica scheduling and persistence.

A run expands its config into grid cells.  Every cell writes one summary JSON
and one CSV, named by a hash of the cell's parameters, so an interrupted run
resumes by skipping cells whose files already carry the right hash.  Replicas
are split into contiguous index blocks, one per worker, and reassembled in
index order, so outputs never depend on the worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .delaunay import cycle_candidate, delaunay, grow_K
from .enhancement import _enhancement_check, enhancement_replica, enhancement_rows
from .osss import InfluenceSpec, osss_check
from .percolation import (SCHEMA_VERSION, CrossingSpec, ExperimentRecord, ThetaSpec, WindowError, _fmt,
                          _jsonable, _theta_replica, crossing_face, crossing_star, crossing_triple,
                          decay_fit, theta_records)
from .points import Region, SeedLineage, sample_poisson

KINDS = ("theta", "crossing", "cycle", "delaunay-cycle", "osss-audit", "enhancement")
WORKERS_ENV = "FACEPERC_WORKERS"


class ConfigError(ValueError):
    """The config document violates the schema or an operation's preconditions."""


@dataclass
class ExperimentConfig:
    kind: str
    lam: list = field(default_factory=lambda: [1.0])
    r: list = field(default_factory=lambda: [5.0])
    replicas: int = 100
    seed: int = 0
    D: int = 2
    d: int = 1
    r0: float | None = None
    w: float | None = None
    s: float | None = None
    p: float | None = None
    delta: float | None = None
    workers: int | None = None
    out: str | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "kind" not in doc:
            raise ConfigError("missing required key 'kind'")
        doc = dict(doc)
        for k in ("lam", "r"):
            if k in doc and not isinstance(doc[k], list):
                doc[k] = [doc[k]]
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def validate(self):
        def num(name, v, lo=None, strict=True, integer=False):
            ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
            if isinstance(v, bool) or not ok_type or (not integer and not math.isfinite(v)):
                raise ConfigError(f"{name} must be a finite {'integer' if integer else 'number'}")
            if lo is not None and (v <= lo if strict else v < lo):
                raise ConfigError(f"{name} must be {'>' if strict else '>='} {lo}")

        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {list(KINDS)}")
        num("replicas", self.replicas, 1, strict=False, integer=True)
        num("seed", self.seed, 0, strict=False, integer=True)
        num("D", self.D, 2, strict=False, integer=True)
        num("d", self.d, 1, strict=False, integer=True)
        if self.D > 3:
            raise ConfigError("D must be 2 or 3")
        if self.d > self.D:
            raise ConfigError("need d <= D")
        if self.workers is not None:
            num("workers", self.workers, 1, strict=False, integer=True)
        if not self.lam or not self.r:
            raise ConfigError("lam and r grids must be nonempty")
        for v in self.lam:
            num("lam", v, 0)
        for v in self.r:
            num("r", v, 0)
        k = self.kind
        if k == "theta" and min(self.r) < 1:
            raise ConfigError("theta radii must be >= 1")
        if k in ("crossing", "cycle"):
            if min(self.r) <= 2:
                raise ConfigError("crossing radii n must exceed 2")
            if self.r0 is None:
                raise ConfigError(f"{k} needs r0 for the star crossing")
            num("r0", self.r0, 0)
        if k == "cycle":
            if self.w is None:
                raise ConfigError("cycle needs a collar width w")
            num("w", self.w, 0)
            for n in self.r:
                if not (self.w < n / 4 and n > 2 + 2 * self.w):
                    raise ConfigError(f"collar w={self.w} needs w < n/4 and n > 2 + 2w (n={n})")
        if k == "delaunay-cycle" and self.D != 2:
            raise ConfigError("delaunay-cycle runs support D = 2 only")
        if k == "osss-audit":
            if self.s is None:
                raise ConfigError("osss-audit needs s")
            num("s", self.s, 0)
            for r in self.r:
                if r < 1 or self.s > r:
                    raise ConfigError("osss-audit needs r >= 1 and 0 < s <= r")
        if k == "enhancement":
            if self.r0 is None or not self.r0 > 2:
                raise ConfigError("enhancement needs r0 > 2 (the enhancement hypothesis r0 > 2)")
            if self.p is None or self.delta is None:
                raise ConfigError("enhancement needs p and delta")
            num("p", self.p)
            num("delta", self.delta, 0, strict=False)
            if not (0 < self.p - self.delta and self.p + self.delta < 1):
                raise ConfigError("enhancement needs 0 < p - delta and p + delta < 1")
            if min(self.r) <= 2:
                raise ConfigError("enhancement radii n must exceed 2")


# ---------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class Cell:
    kind: str
    params: dict

    @property
    def hash(self) -> str:
        doc = {"schema_version": SCHEMA_VERSION, "version": __version__, "kind": self.kind,
               "params": self.params}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    @property
    def stem(self) -> str:
        return f"{self.kind}-{self.hash[:16]}"


def cells(cfg: ExperimentConfig) -> list[Cell]:
    base = {"D": cfg.D, "d": cfg.d, "replicas": cfg.replicas, "seed": cfg.seed}
    extra = {k: getattr(cfg, k) for k in ("r0", "w", "s", "p", "delta") if getattr(cfg, k) is not None}
    out = []
    for lam in cfg.lam:
        if cfg.kind == "enhancement":
            # all n share one coupled sample per replica
            out.append(Cell(cfg.kind, {**base, **extra, "lam": lam, "n": sorted(cfg.r)}))
            continue
        for r in cfg.r:
            key = "r" if cfg.kind in ("theta", "osss-audit") else "n"
            out.append(Cell(cfg.kind, {**base, **extra, "lam": lam, key: r}))
    return out


# ---------------------------------------------------------------------------
# replica functions (module level so worker processes can pickle them)


def _theta_rows(params, ids):
    spec = ThetaSpec(params["D"], params["d"], params["r"], params["lam"], params["replicas"], params["seed"])
    return [_theta_replica(spec, i)[:2] for i in ids]


def _crossing_rows(params, ids):
    D, d, n, r0, lam = params["D"], params["d"], params["n"], params["r0"], params["lam"]
    window = Region.centered_ball(D, n + r0 + 1)
    rows = []
    for i in ids:
        real = sample_poisson(window, lam, SeedLineage(params["seed"], i))
        face = crossing_face(real, d, n)
        star = crossing_star(real, d, n, r0)
        if face > star:
            raise AssertionError(f"face crossing without star crossing on replica {i}")
        rows.append((len(real), face, star))
    return rows


def _cycle_rows(params, ids):
    D, d, n, r0, w, lam = params["D"], params["d"], params["n"], params["r0"], params["w"], params["lam"]
    window = Region.centered_ball(D, n + r0 + 1)
    rows = []
    for i in ids:
        real = sample_poisson(window, lam, SeedLineage(params["seed"], i))
        cyc, face, star = crossing_triple(real, d, n, r0, w)
        rows.append((len(real), -1 if cyc is None else cyc, face, star))
    return rows


def _delaunay_rows(params, ids):
    n, lam = params["n"], params["lam"]
    window = Region.centered_box(2, n)
    rows = []
    for i in ids:
        real = sample_poisson(window, lam, SeedLineage(params["seed"], i))
        if len(real) < 3:
            rows.append((len(real), 0, 0, 0, 1))
            continue
        cx = delaunay(real)
        g = grow_K(cx, real, window)
        cands = cycle_candidate(cx, real, window, g.K)
        closed = int(bool(g.K) and not g.axis_escapes and any(c.is_cycle for c in cands))
        rows.append((len(real), closed, len(g.K), len(cands), int(g.axis_escapes)))
    return rows


def _enhancement_rows(params, ids):
    return [enhancement_replica(params["lam"], params["p"], params["delta"], params["n"], params["seed"], i,
                                params["D"], params["d"], params["r0"]) for i in ids]


ROW_FUNCS = {"theta": _theta_rows, "crossing": _crossing_rows, "cycle": _cycle_rows,
             "delaunay-cycle": _delaunay_rows, "enhancement": _enhancement_rows}


def partition(replicas: int, workers: int) -> list[range]:
    """Contiguous index blocks, as equal as possible, in index order."""
    workers = max(1, min(workers, replicas))
    q, rem = divmod(replicas, workers)
    out, start = [], 0
    for k in range(workers):
        size = q + (k < rem)
        out.append(range(start, start + size))
        start += size
    return out


def _map_rows(func, params, replicas, workers, pool):
    blocks = partition(replicas, workers)
    if pool is None or len(blocks) == 1:
        return [row for b in blocks for row in func(params, b)]
    futures = [pool.submit(func, params, b) for b in blocks]
    return [row for f in futures for row in f.result()]


# ---------------------------------------------------------------------------
# cell outputs


@dataclass
class CellOutput:
    cell: Cell
    summary: dict
    csv: str

    @property
    def json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _wrap(cell: Cell, summary: dict, csv: str) -> CellOutput:
    summary = {**summary, "cell_hash": cell.hash, "artifact_version": __version__}
    return CellOutput(cell, summary, csv)


def _record_output(cell, rec: ExperimentRecord) -> CellOutput:
    return _wrap(cell, rec.summary(), rec.to_csv())


def run_cell(cell: Cell, workers: int = 1, pool=None) -> CellOutput:
    p, kind = cell.params, cell.kind
    if kind == "osss-audit":
        spec = InfluenceSpec(None, p["r"], p["s"], p["lam"], p["replicas"], p["seed"], p["D"], p["d"])
        rep = osss_check(spec)
        summary = {"schema_version": SCHEMA_VERSION, "kind": kind, "params": p, **rep.to_dict()}
        summary.pop("sites")
        head = "x,delta,delta_se,inf,inf_se,piv,piv_se"
        lines = [head] + [",".join([" ".join(map(str, s.x))] + [_fmt(getattr(s, f)) for f in head.split(",")[1:]])
                          for s in rep.sites]
        return _wrap(cell, summary, "\n".join(lines) + "\n")
    rows = _map_rows(ROW_FUNCS[kind], p, p["replicas"], workers, pool)
    if kind == "theta":
        spec = ThetaSpec(p["D"], p["d"], p["r"], p["lam"], p["replicas"], p["seed"])
        reach = np.array([r[0] for r in rows], dtype=float)
        npts = np.array([r[1] for r in rows], dtype=np.int64)
        return _record_output(cell, theta_records(spec, reach, npts)[p["r"]])
    if kind == "crossing":
        a = np.array(rows, dtype=np.int64)
        rec = ExperimentRecord(kind, p, p["seed"], a[:, 1], a[:, 0], {"star": a[:, 2]})
        out = _record_output(cell, rec)
        out.summary["star_estimate"] = float(a[:, 2].mean())
        return out
    if kind == "cycle":
        a = np.array(rows, dtype=np.int64)
        rec = ExperimentRecord(kind, p, p["seed"], (a[:, 1] == 1).astype(int), a[:, 0],
                               {"verdict": a[:, 1], "face": a[:, 2], "star": a[:, 3]})
        out = _record_output(cell, rec)
        out.summary["undetermined"] = int(np.sum(a[:, 1] < 0))
        return out
    if kind == "delaunay-cycle":
        a = np.array(rows, dtype=np.int64)
        rec = ExperimentRecord(kind, p, p["seed"], a[:, 1], a[:, 0],
                               {"K_size": a[:, 2], "n_candidates": a[:, 3], "axis_escapes": a[:, 4]})
        return _record_output(cell, rec)
    if kind == "enhancement":
        ns = p["n"]
        table = enhancement_rows(ns, rows)
        summary = {"schema_version": SCHEMA_VERSION, "kind": kind, "params": p,
                   "rows": [asdict(t) for t in table]}
        head = ["replica", "seed", "n_points", "specials"]
        for n in ns:
            head += [f"star_left_n{_fmt(n)}", f"star_right_n{_fmt(n)}", f"face_left_n{_fmt(n)}",
                     f"face_right_n{_fmt(n)}"]
        lines = [",".join(head)]
        for i, r in enumerate(rows):
            vals = [str(i), f"{p['seed']}/{i}", str(r["n_points"]), str(r["specials"])]
            for n in ns:
                vals += [str(v) for v in r[n]]
            lines.append(",".join(vals))
        return _wrap(cell, summary, "\n".join(lines) + "\n")
    raise ConfigError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunResult:
    outputs: list
    skipped: list
    out_dir: Path | None

    @property
    def summaries(self) -> list[dict]:
        return [o.summary for o in self.outputs]


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
        if v < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return v
    return 1


def _write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _complete(out: Path, cell: Cell) -> dict | None:
    js, cs = out / f"{cell.stem}.json", out / f"{cell.stem}.csv"
    if not (js.exists() and cs.exists()):
        return None
    try:
        doc = json.loads(js.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    return doc if doc.get("cell_hash") == cell.hash else None


def run(cfg: ExperimentConfig, out_dir=None, workers: int | None = None, resume: bool = False) -> RunResult:
    """Run every cell of ``cfg``; with ``out_dir`` each cell is flushed as it completes."""
    cfg.validate()
    workers = workers or cfg.workers or default_workers()
    out = Path(out_dir or cfg.out) if (out_dir or cfg.out) else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write-probe"
            probe.write_text("")
            probe.unlink()
        except OSError as e:
            raise PermissionError(f"output directory {out} is not writable: {e}") from None
    outputs, skipped = [], []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for cell in cells(cfg):
            if resume and out is not None:
                done = _complete(out, cell)
                if done is not None:
                    csv = (out / f"{cell.stem}.csv").read_text(encoding="utf-8")
                    outputs.append(CellOutput(cell, done, csv))
                    skipped.append(cell.stem)
                    continue
            res = run_cell(cell, workers, pool)
            outputs.append(res)
            if out is not None:
                _write(out / f"{cell.stem}.csv", res.csv)
                _write(out / f"{cell.stem}.json", res.json)
    finally:
        if pool is not None:
            pool.shutdown()
    if out is not None:
        manifest = {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict() | {"workers": None, "out": None},
                    "cells": [o.cell.stem for o in outputs]}
        _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(outputs, skipped, out)


def load_summaries(out_dir) -> list[dict]:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    return [json.loads((out / f"{stem}.json").read_text(encoding="utf-8")) for stem in manifest["cells"]]


# ---------------------------------------------------------------------------
# plot data


def _scalar_params(params: dict) -> dict:
    return {k: v for k, v in params.items() if isinstance(v, (int, float, str)) or v is None}


def emit_plotdata(records, path=None) -> str:
    """Long-format TSV: parameter columns, then estimate, ci_low, ci_high.

    ``records`` are cell summaries or :class:`ExperimentRecord` objects of
    one kind.  Theta curves with at least five radii at a common intensity
    get their log-linear decay fit appended as ``#`` metadata rows.
    """
    docs = [r.summary() if isinstance(r, ExperimentRecord) else r for r in records]
    if not docs:
        raise ValueError("no records")
    kinds = {d["kind"] for d in docs}
    if len(kinds) != 1:
        raise ValueError(f"mixed experiment kinds: {sorted(kinds)}")
    kind = kinds.pop()
    rows = []
    for doc in docs:
        params = _scalar_params(doc["params"])
        if kind == "enhancement":
            for row in doc["rows"]:
                for side in ("left", "right"):
                    est = row[side]
                    rows.append({**params, "n": row["n"], "side": side, "estimate": est["estimate"],
                                 "ci_low": est["ci95"][0], "ci_high": est["ci95"][1]})
        elif kind == "osss-audit":
            lo, hi = doc["lhs"], doc["rhs"]
            rows.append({**params, "quantity": "lhs", "estimate": lo,
                         "ci_low": lo - 1.96 * doc["se_pooled"], "ci_high": lo + 1.96 * doc["se_pooled"]})
            rows.append({**params, "quantity": "rhs", "estimate": hi,
                         "ci_low": hi - 1.96 * doc["se_pooled"], "ci_high": hi + 1.96 * doc["se_pooled"]})
        else:
            rows.append({**params, "estimate": doc["estimate"], "ci_low": doc["ci95"][0],
                         "ci_high": doc["ci95"][1]})
    tail = ["estimate", "ci_low", "ci_high"]
    cols = sorted({k for r in rows for k in r} - set(tail)) + tail
    lines = ["\t".join(cols)]
    for r in rows:
        lines.append("\t".join(_fmt(r.get(c)) for c in cols))
    if kind == "theta":
        by_lam = {}
        for r in rows:
            by_lam.setdefault(r["lam"], []).append((r["r"], r["estimate"]))
        for lam, curve in sorted(by_lam.items()):
            curve.sort()
            try:
                fit = decay_fit(curve)
            except ValueError:
                continue
            lines.append(f"# decay_fit\tlam={_fmt(lam)}\tslope={_fmt(fit.slope)}\t"
                         f"intercept={_fmt(fit.intercept)}\tr2={_fmt(fit.r2)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        _write(Path(path), text)
    return text


def error_document(exc: BaseException) -> dict:
    """Machine-readable description of a failed run."""
    if isinstance(exc, ConfigError):
        code, status = "schema_error", 2
    elif isinstance(exc, WindowError):
        code, status = "window_error", 3
    elif isinstance(exc, (PermissionError, OSError)):
        code, status = "io_error", 4
    elif isinstance(exc, ValueError):
        code, status = "invalid_parameters", 2
    else:
        code, status = "internal_error", 1
    return {"schema_version": SCHEMA_VERSION, "error": code, "exit_status": status,
            "exception": type(exc).__name__, "message": str(exc)}
