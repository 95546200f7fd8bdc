"""Poisson point samples in boxes and balls, with a unit-cell spatial index.

Reproducibility comes from :class:`SeedLineage`: a root seed and a replica
index are mixed with a named stream id through :class:`numpy.random.SeedSequence`
(``spawn_key=(replica, stream)``) and fed to PCG64.  Every random quantity
the package draws goes through :meth:`SeedLineage.rng`, so a (root, replica,
stream) triple pins its bits for a given package version.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import EPS_GEO

GENERATOR = "PCG64/SeedSequence(entropy=root, spawn_key=(replica, stream))"

#: Named stream ids; new streams must be appended, never renumbered.
STREAMS = {
    "base": 0,
    "resample": 1,
    "add": 2,
    "xi1": 3,
    "xi2": 4,
    "superpose": 5,
    "marks": 6,
    "xi2_alt": 7,
    "pivot": 8,
}


@dataclass(frozen=True)
class SeedLineage:
    root: int
    replica: int = 0

    def rng(self, stream="base", *extra: int) -> np.random.Generator:
        sid = STREAMS[stream] if isinstance(stream, str) else int(stream)
        ss = np.random.SeedSequence(entropy=int(self.root),
                                    spawn_key=(int(self.replica), sid, *map(int, extra)))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, replica: int) -> "SeedLineage":
        return SeedLineage(self.root, replica)


@dataclass(frozen=True)
class Region:
    """An axis-aligned box (center, half-widths) or a Euclidean ball."""

    kind: str
    center: tuple
    half_widths: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "box" and (len(self.half_widths) != len(self.center)
                                   or min(self.half_widths) <= 0):
            raise ValueError("box needs positive half-widths, one per axis")
        if self.kind == "ball" and self.radius <= 0:
            raise ValueError("ball needs a positive radius")

    @classmethod
    def box(cls, center, half_widths):
        center = tuple(float(c) for c in center)
        if np.isscalar(half_widths):
            half_widths = (float(half_widths),) * len(center)
        return cls("box", center, tuple(float(h) for h in half_widths))

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", tuple(float(c) for c in center), radius=float(radius))

    @classmethod
    def centered_box(cls, dim, half_width):
        return cls.box((0.0,) * dim, half_width)

    @classmethod
    def centered_ball(cls, dim, radius):
        return cls.ball((0.0,) * dim, radius)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod([2 * h for h in self.half_widths]))
        D = self.dim
        return math.pi ** (D / 2) / math.gamma(D / 2 + 1) * self.radius ** D

    def contains(self, points, tol=0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.center)
        if self.kind == "box":
            return np.all(np.abs(pts - c) <= np.asarray(self.half_widths) + tol, axis=1)
        return np.linalg.norm(pts - c, axis=1) <= self.radius + tol

    def contains_region(self, other: "Region") -> bool:
        c = np.asarray(self.center)
        oc = np.asarray(other.center)
        if other.kind == "box":
            corners = np.array(np.meshgrid(*[(x - h, x + h) for x, h in
                                             zip(oc, other.half_widths)])).reshape(self.dim, -1).T
            return bool(np.all(self.contains(corners, tol=EPS_GEO)))
        if self.kind == "ball":
            return np.linalg.norm(oc - c) + other.radius <= self.radius + EPS_GEO
        return bool(np.all(np.abs(oc - c) + other.radius <= np.asarray(self.half_widths) + EPS_GEO))

    def contains_ball(self, radius) -> bool:
        """Whether the origin-centered ball of the given radius fits inside."""
        return self.contains_region(Region.centered_ball(self.dim, radius))

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        c = np.asarray(self.center)
        if self.kind == "box":
            h = np.asarray(self.half_widths)
            return c + rng.uniform(-1.0, 1.0, size=(n, self.dim)) * h
        g = rng.standard_normal(size=(n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = self.radius * rng.uniform(size=n) ** (1.0 / self.dim)
        return c + g * rad[:, None]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "center": list(self.center)}
        if self.kind == "box":
            d["half_widths"] = list(self.half_widths)
        else:
            d["radius"] = self.radius
        return d

    @classmethod
    def from_dict(cls, d) -> "Region":
        if d["kind"] == "box":
            return cls.box(d["center"], d["half_widths"])
        return cls.ball(d["center"], d["radius"])


class GridIndex:
    """Uniform grid of unit cells mapping integer cell keys to point ids."""

    def __init__(self, points: np.ndarray, cell: float = 1.0):
        self.cell = float(cell)
        self.points = points
        self.cells: dict[tuple, np.ndarray] = {}
        if len(points):
            keys = np.floor(points / self.cell).astype(np.int64)
            order = np.lexsort(keys.T[::-1])
            skeys = keys[order]
            breaks = np.flatnonzero(np.any(np.diff(skeys, axis=0) != 0, axis=1)) + 1
            starts = np.concatenate(([0], breaks))
            ends = np.concatenate((breaks, [len(order)]))
            for a, b in zip(starts, ends):
                self.cells[tuple(skeys[a])] = order[a:b]

    def candidates(self, x, radius) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.floor((x - radius) / self.cell).astype(np.int64)
        hi = np.floor((x + radius) / self.cell).astype(np.int64)
        span = np.prod(hi - lo + 1)
        if span > 4 * max(len(self.cells), 1):
            ids = [v for v in self.cells.values()]
        else:
            ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
            ids = []
            for key in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(x), -1).T:
                v = self.cells.get(tuple(key))
                if v is not None:
                    ids.append(v)
        if not ids:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(ids)

    def within(self, x, radius) -> np.ndarray:
        cand = self.candidates(x, radius + EPS_GEO)
        if len(cand) == 0:
            return cand
        d = np.linalg.norm(self.points[cand] - np.asarray(x, dtype=float), axis=1)
        return np.sort(cand[d <= radius + EPS_GEO])

    def pairs_within(self, radius) -> np.ndarray:
        """All index pairs ``(i, j)``, ``i < j``, at distance ``<= radius + EPS_GEO``."""
        pts = self.points
        reach = int(math.ceil((radius + EPS_GEO) / self.cell))
        dim = pts.shape[1] if pts.ndim == 2 else 0
        out = []
        offsets = np.array(np.meshgrid(*[range(-reach, reach + 1)] * dim,
                                       indexing="ij")).reshape(dim, -1).T
        for key, ids in self.cells.items():
            for off in offsets:
                nkey = tuple(np.asarray(key) + off)
                if nkey < key:
                    continue
                other = self.cells.get(nkey)
                if other is None:
                    continue
                dist = np.linalg.norm(pts[ids][:, None, :] - pts[other][None, :, :], axis=2)
                ii, jj = np.nonzero(dist <= radius + EPS_GEO)
                a, b = ids[ii], other[jj]
                keep = a < b if nkey == key else np.ones(len(a), dtype=bool)
                a, b = a[keep], b[keep]
                out.append(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1))
        if not out:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.concatenate(out)
        return pairs[np.lexsort(pairs.T[::-1])]


@dataclass(frozen=True, eq=False)
class Realization:
    """A finite point sample in ``region`` together with its provenance."""

    points: np.ndarray
    region: Region
    intensity: float
    seed: SeedLineage | None = None
    duplicate_warning: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.region.dim)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.region.dim

    @cached_property
    def grid(self) -> GridIndex:
        return GridIndex(self.points)

    def neighbors_within(self, x, radius) -> np.ndarray:
        """Ids of points with ``|p - x| <= radius + EPS_GEO``."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        return self.grid.within(x, radius)

    def with_points(self, points, **changes) -> "Realization":
        kw = dict(region=self.region, intensity=self.intensity, seed=self.seed)
        kw.update(changes)
        return Realization(points, **kw)

    def add_point(self, x) -> "Realization":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if not self.region.contains(x, tol=EPS_GEO)[0]:
            raise ValueError(f"point {x[0]} lies outside the sampling region")
        dup = bool(len(self.points)) and bool(np.any(np.all(self.points == x, axis=1)))
        if dup:
            warnings.warn("added point duplicates an existing point", stacklevel=2)
        return Realization(np.vstack([self.points, x]), self.region, self.intensity,
                           self.seed, duplicate_warning=self.duplicate_warning or dup,
                           meta=dict(self.meta))

    def resample_in_box(self, x, fresh_seed: SeedLineage | np.random.Generator,
                        half_width: float = 1.0) -> "Realization":
        """Replace the points inside ``x + [-h, h]^D`` by a fresh Poisson sample."""
        box = Region.box(x, half_width)
        if not self.region.contains_region(box):
            raise ValueError("resampling box is not contained in the sampling region")
        rng = fresh_seed.rng("resample") if isinstance(fresh_seed, SeedLineage) else fresh_seed
        inside = box.contains(self.points) if len(self.points) else np.zeros(0, dtype=bool)
        fresh = box.sample_uniform(rng, rng.poisson(self.intensity * box.volume))
        return self.with_points(np.vstack([self.points[~inside], fresh]))

    def superpose(self, extra_intensity: float, seed: SeedLineage | np.random.Generator) -> "Realization":
        """Add an independent Poisson(extra_intensity) sample on the same region."""
        if extra_intensity < 0:
            raise ValueError("extra intensity must be nonnegative")
        rng = seed.rng("superpose") if isinstance(seed, SeedLineage) else seed
        n = rng.poisson(extra_intensity * self.region.volume)
        extra = self.region.sample_uniform(rng, n)
        return self.with_points(np.vstack([self.points, extra]),
                                intensity=self.intensity + extra_intensity)

    def restrict(self, region: Region) -> "Realization":
        return self.with_points(self.points[region.contains(self.points)], region=region)

    def to_text(self) -> str:
        """One point per line, coordinates with 12 decimals, space separated."""
        header = f"# D={self.dim} n={len(self)} intensity={self.intensity!r}\n"
        body = "".join(" ".join(f"{c:.12f}" for c in p) + "\n" for p in self.points)
        return header + body

    @staticmethod
    def points_from_text(text: str) -> np.ndarray:
        rows = [list(map(float, ln.split())) for ln in text.splitlines()
                if ln.strip() and not ln.startswith("#")]
        return np.array(rows, dtype=float)


@dataclass(frozen=True, eq=False)
class MarkedRealization:
    base: Realization
    xi1: np.ndarray
    xi2: np.ndarray

    def __post_init__(self):
        n = len(self.base)
        if len(self.xi1) != n or len(self.xi2) != n:
            raise ValueError("mark arrays must align with the point list")


def sample_poisson(region: Region, lam: float, seed: SeedLineage | np.random.Generator,
                   stream="base") -> Realization:
    """Homogeneous Poisson sample of intensity ``lam`` in ``region``."""
    if not lam > 0:
        raise ValueError("intensity must be positive")
    rng = seed.rng(stream) if isinstance(seed, SeedLineage) else seed
    n = rng.poisson(lam * region.volume)
    return Realization(region.sample_uniform(rng, n), region, float(lam),
                       seed if isinstance(seed, SeedLineage) else None)


def with_origin(real: Realization) -> Realization:
    """``real`` with the origin appended as the last point (the rooted point ``o``)."""
    o = np.zeros((1, real.dim))
    return Realization(np.vstack([real.points, o]), real.region, real.intensity, real.seed,
                       meta={**real.meta, "origin_index": len(real)})
