"""Self-similar compact sets with their natural measures, and empirical
certification of the Ahlfors regularity constants.

A :class:`DSet` is a finite sample cloud (one representative point per
depth-``m`` cylinder) carrying the natural self-similar measure, so every
ball mass is a plain weighted count over sample points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import pdist

from .errors import DegenerateInputError, ResolutionError, ResourceLimitError

DEFAULT_POINT_CAP = 2**20

# Pairs (centers x points) evaluated per chunk in ball-mass computations.
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class Similarity:
    """z -> ratio * exp(i*rotation) * z + translation, applied to each complex
    coordinate of C^n.  ``translation`` holds 2n real numbers."""

    ratio: float
    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"similarity ratio must lie in (0, 1), got {self.ratio}")
        if len(self.translation) % 2:
            raise ValueError("translation needs an even number of real coordinates")

    @property
    def ambient_n(self) -> int:
        return len(self.translation) // 2

    def _linear(self) -> complex:
        return self.ratio * complex(math.cos(self.rotation), math.sin(self.rotation))

    def _shift(self) -> np.ndarray:
        t = np.asarray(self.translation, dtype=float)
        return t[0::2] + 1j * t[1::2]

    def apply(self, points: np.ndarray) -> np.ndarray:
        z = points[:, 0::2] + 1j * points[:, 1::2]
        w = self._linear() * z + self._shift()
        out = np.empty_like(points)
        out[:, 0::2] = w.real
        out[:, 1::2] = w.imag
        return out

    def fixed_point(self) -> np.ndarray:
        z = self._shift() / (1.0 - self._linear())
        out = np.empty(2 * z.size)
        out[0::2] = z.real
        out[1::2] = z.imag
        return out


@dataclass
class DSet:
    """Sampled Ahlfors-regular compact set with its natural measure."""

    points: np.ndarray
    weights: np.ndarray
    dimension_d: float
    diameter: float
    depth: int = 1
    resolution: float = 0.0
    reg_a: float | None = None
    reg_b: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, max(self.points.shape[-1], 2))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if len(self.weights) != len(self.points):
            raise ValueError("points and weights differ in length")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.points)):
            raise ValueError("weights must be nonnegative and coordinates finite")
        if self.dimension_d <= 0 or self.dimension_d > self.points.shape[1]:
            raise ValueError(f"dimension_d={self.dimension_d} outside (0, 2n]")

    @property
    def ambient_n(self) -> int:
        return self.points.shape[1] // 2

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        out = {
            "dimension_d": self.dimension_d,
            "depth": self.depth,
            "diameter": self.diameter,
            "resolution": self.resolution,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }
        if self.reg_a is not None:
            out["reg_a"] = self.reg_a
            out["reg_b"] = self.reg_b
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DSet":
        return cls(
            points=np.asarray(data["points"], dtype=float),
            weights=np.asarray(data["weights"], dtype=float),
            dimension_d=float(data["dimension_d"]),
            diameter=float(data["diameter"]),
            depth=int(data.get("depth", 1)),
            resolution=float(data.get("resolution", 0.0)),
            reg_a=data.get("reg_a"),
            reg_b=data.get("reg_b"),
        )


@dataclass
class RegularityReport:
    scales: list[float]
    upper: list[float]
    lower: list[float]
    a: float
    b: float
    n_centers: int = 0
    argmax_upper: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"scales": self.scales, "upper": self.upper, "lower": self.lower,
                "a": self.a, "b": self.b, "n_centers": self.n_centers}


def moran_dimension(ratios: Sequence[float], upper: float | None = None) -> float:
    """Similarity dimension: the d solving ``sum(r_i**d) == 1``.

    Parameters
    ----------
    ratios : sequence of float
        Contraction ratios, each in (0, 1).
    upper : float, optional
        Upper end of the search bracket; grown automatically when omitted.
    """
    r = np.asarray(ratios, dtype=float)
    if r.size == 0:
        raise DegenerateInputError("moran_dimension needs at least one ratio")
    if np.any((r <= 0) | (r >= 1)):
        raise ValueError("every ratio must lie in (0, 1)")
    if r.size == 1:
        raise DegenerateInputError("a single-map IFS has no positive similarity dimension")

    def g(d):
        return float(np.sum(r**d)) - 1.0

    hi = upper if upper is not None else 1.0
    while g(hi) > 0:
        hi *= 2.0
    return brentq(g, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def _attractor_diameter(maps: Sequence[Similarity], depth: int) -> float:
    # Words applied to all fixed points lie in K, so this is a lower bound on
    # diam(K); it is exact when the extreme points of K are fixed points.
    pts = np.array([m.fixed_point() for m in maps])
    level = 0
    while level < depth and len(pts) * len(maps) <= 4096:
        pts = np.concatenate([m.apply(pts) for m in maps])
        level += 1
    return float(pdist(pts).max()) if len(pts) > 1 else 0.0


def generate_ifs_set(maps: Sequence[Similarity], depth: int, ambient_n: int | None = None,
                     cap: int = DEFAULT_POINT_CAP) -> DSet:
    """One representative point per length-``depth`` word of the IFS.

    The representative of word ``w`` is ``S_w(p0)`` with ``p0`` the fixed
    point of the first map, so every sample lies on the attractor.  Weights
    are the cylinder masses ``prod(r_i**d)`` of the natural measure.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not maps:
        raise DegenerateInputError("empty IFS")
    n = maps[0].ambient_n
    if any(m.ambient_n != n for m in maps):
        raise ValueError("all maps must act on the same C^n")
    if ambient_n is not None and ambient_n < n:
        raise ValueError(f"maps act on C^{n}, cannot generate in C^{ambient_n}")
    count = len(maps) ** depth
    if count > cap:
        raise ResourceLimitError(f"{count} points exceed the cap of {cap}")
    ratios = np.array([m.ratio for m in maps])
    d = moran_dimension(ratios)
    if d > 2 * n:
        raise ValueError(f"similarity dimension {d} exceeds ambient real dimension {2 * n}")

    pts = maps[0].fixed_point().reshape(1, -1)
    w = np.ones(1)
    cyl_w = ratios**d
    for _ in range(depth):
        pts = np.concatenate([m.apply(pts) for m in maps])
        w = np.concatenate([cw * w for cw in cyl_w])
    w = w / w.sum()
    diam = _attractor_diameter(maps, depth)
    if len(pts) <= 4096 and len(pts) > 1:
        diam = max(diam, float(pdist(pts).max()))
    out = DSet(points=pts, weights=w, dimension_d=d, diameter=diam, depth=depth,
               resolution=float(ratios.max()) ** depth * diam)
    return embed(out, ambient_n) if ambient_n and ambient_n > n else out


def attractor_point(maps: Sequence[Similarity], word: Sequence[int], base: int = 0) -> np.ndarray:
    """S_w(p) for the fixed point p of ``maps[base]``: a point of the attractor,
    off the depth-m sample cloud when the word is longer than m."""
    p = maps[base].fixed_point().reshape(1, -1)
    for idx in reversed(list(word)):
        p = maps[idx].apply(p)
    return p[0]


# ---------------------------------------------------------------- built-ins

def cantor_maps(lo: float = 0.0, hi: float = 1.0) -> list[Similarity]:
    """Middle-thirds Cantor set on the real segment [lo, hi]."""
    return polygon_dust_maps([lo, hi], 1 / 3)


def segment_maps(lo: float = 0.0, hi: float = 1.0) -> list[Similarity]:
    return polygon_dust_maps([lo, hi], 0.5)


def corner_maps(ratio: float = 0.25, side: float = 1.0) -> list[Similarity]:
    """Four maps contracting toward the corners of [0, side]^2."""
    corners = [(0, 0), (side, 0), (0, side), (side, side)]
    return [Similarity(ratio, 0.0, ((1 - ratio) * cx, (1 - ratio) * cy)) for cx, cy in corners]


def polygon_dust_maps(vertices: Sequence[complex], ratio: float) -> list[Similarity]:
    """Maps contracting by ``ratio`` toward each vertex; a totally disconnected
    planar dust when the scaled copies are disjoint."""
    return [Similarity(ratio, 0.0, ((1 - ratio) * v.real, (1 - ratio) * v.imag))
            for v in map(complex, vertices)]


def triangle_dust_maps(ratio: float = 1 / 3, radius: float = 1.0) -> list[Similarity]:
    verts = [radius * complex(math.cos(a), math.sin(a))
             for a in (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)]
    return polygon_dust_maps(verts, ratio)


def diamond_dust_maps(radius: float = 0.1, ratio: float = 1 / 3) -> list[Similarity]:
    """Dust with fixed points at +-radius and +-i*radius."""
    return polygon_dust_maps([radius, -radius, 1j * radius, -1j * radius], ratio)


def circle_arc_polyline(n_points: int, radius: float = 1.0, arc: float = math.pi) -> DSet:
    """Equal-weight polyline sample of a circular arc (a Lipschitz 1-manifold)."""
    theta = np.linspace(0.0, arc, n_points)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    w = np.full(n_points, 1.0 / n_points)
    chord = 2 * radius * math.sin(min(arc, math.pi) / 2)
    step = 2 * radius * math.sin(arc / (2 * (n_points - 1)))
    return DSet(pts, w, 1.0, chord, depth=1, resolution=step)


def embed(set_: DSet, n: int) -> DSet:
    """Place a planar set into the first complex coordinate of C^n."""
    pts = np.zeros((len(set_), 2 * n))
    pts[:, : set_.points.shape[1]] = set_.points
    return replace(set_, points=pts)


def sequence_set(n_terms: int = 40, base: float = 0.5) -> DSet:
    """The non-regular compact {0} u {base**j : j >= 1} with weights base**j
    (the tail mass sits on the limit point 0)."""
    j = np.arange(1, n_terms + 1)
    pts = np.zeros((n_terms + 1, 2))
    pts[1:, 0] = base**j
    # mass (1-base)*base**(j-1) on base**j, so mu(D(0, base**J)) = base**J
    w = np.concatenate([[base**n_terms], (1 - base) * base ** (j - 1)])
    return DSet(pts, w, dimension_d=1.0, diameter=base, depth=n_terms, resolution=0.0)


# ------------------------------------------------------------- ball masses

def ball_masses(set_: DSet, centers: np.ndarray, radius: float, closed: bool = False) -> np.ndarray:
    """Weighted mass of the sample cloud inside D(c, radius) for each center."""
    centers = np.atleast_2d(centers)
    pts, w = set_.points, set_.weights
    out = np.empty(len(centers))
    step = max(1, _CHUNK_ELEMS // max(len(pts), 1))
    r2 = radius * radius
    for i in range(0, len(centers), step):
        c = centers[i:i + step]
        d2 = ((c[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        mask = d2 <= r2 if closed else d2 < r2
        out[i:i + step] = mask @ w
    return out


def ball_restrict(set_: DSet, center, radius: float, closed: bool = True) -> tuple[DSet, float]:
    """Sub-cloud inside the (closed by default) ball and its mass."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float).ravel()
    d2 = ((set_.points - center) ** 2).sum(axis=1)
    mask = d2 <= radius * radius if closed else d2 < radius * radius
    sub = DSet(points=set_.points[mask].reshape(-1, set_.points.shape[1]),
               weights=set_.weights[mask], dimension_d=set_.dimension_d,
               diameter=min(set_.diameter, 2 * radius), depth=set_.depth,
               resolution=set_.resolution, reg_a=set_.reg_a, reg_b=set_.reg_b)
    return sub, float(sub.weights.sum())


def _representative_centers(set_: DSet, max_centers: int) -> np.ndarray:
    if len(set_) <= max_centers:
        return set_.points
    stride = math.ceil(len(set_) / max_centers)
    return set_.points[::stride]


def _masses_at_scales(set_: DSet, centers: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Open-ball masses, shape (len(centers), len(scales)), from one sort per center."""
    pts, w = set_.points, set_.weights
    t2 = scales**2
    out = np.empty((len(centers), len(scales)))
    step = max(1, _CHUNK_ELEMS // max(len(pts), 1))
    for i in range(0, len(centers), step):
        d2 = ((centers[i:i + step, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1)
        d2 = np.take_along_axis(d2, order, axis=1)
        cum = np.concatenate([np.zeros((len(d2), 1)), np.cumsum(w[order], axis=1)], axis=1)
        for row in range(len(d2)):
            out[i + row] = cum[row, np.searchsorted(d2[row], t2, side="left")]
    return out


def regularity_constants(set_: DSet, scales: Sequence[float],
                         max_centers: int = 8192) -> RegularityReport:
    """Worst-case ratios mu(K n D(x,t)) / t**d over sample centers x.

    Centers are all sample points, or an evenly strided subset of them when
    the cloud exceeds ``max_centers`` (with the cylinder ordering produced by
    :func:`generate_ifs_set`, a stride of ``N**j`` picks one point per
    cylinder of a coarser level).
    """
    if set_.diameter <= 0 or len(set_) < 2:
        raise ResolutionError("set has zero diameter; no scale is resolvable")
    ts = sorted({float(t) for t in scales}, reverse=True)
    if not ts:
        raise ValueError("scales must be nonempty")
    tol = 1e-12 * set_.diameter
    for t in ts:
        if t <= 0 or t > set_.diameter + tol:
            raise ValueError(f"scale {t} outside (0, diam] = (0, {set_.diameter}]")
        if t < set_.resolution * (1 - 1e-12):
            raise ResolutionError(
                f"scale {t} is finer than the sampling resolution {set_.resolution}")
    centers = _representative_centers(set_, max_centers)
    d = set_.dimension_d
    masses = _masses_at_scales(set_, centers, np.array(ts))
    ratios = masses / np.array(ts) ** d
    upper = ratios.max(axis=0).tolist()
    lower = ratios.min(axis=0).tolist()
    arg = ratios.argmax(axis=0).astype(int).tolist()
    return RegularityReport(scales=ts, upper=upper, lower=lower, a=max(upper), b=min(lower),
                            n_centers=len(centers), argmax_upper=arg)


def resolvable_scales(set_: DSet, ratio: float | None = None, per_level: int = 4) -> list[float]:
    """Geometric scales from the diameter down to the sampling resolution.

    By default ``per_level`` scales per IFS generation: scales aligned with
    cylinder sizes alone can make every ball hold exactly one cylinder and
    hide the spread between the upper and lower constants.
    """
    if ratio is None:
        level = (set_.resolution / set_.diameter) ** (1 / set_.depth) if set_.resolution > 0 else 0.5
        ratio = level ** (1.0 / per_level)
    out, t = [], set_.diameter
    floor = max(set_.resolution, 1e-300)
    while t >= floor * (1 - 1e-12) and len(out) < 512:
        out.append(t)
        t *= ratio
    return out


def certify(set_: DSet, scales: Sequence[float] | None = None, max_centers: int = 8192) -> DSet:
    """Return a copy of ``set_`` carrying certified (a, b)."""
    rep = regularity_constants(set_, scales or resolvable_scales(set_), max_centers)
    return replace(set_, reg_a=rep.a, reg_b=rep.b)


def builtin_maps(spec: str) -> list[Similarity]:
    """Parse ``name[:arg,arg]`` into built-in IFS maps."""
    name, _, args = spec.partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()] if args else []
    table = {
        "cantor": cantor_maps,
        "segment": segment_maps,
        "four-corner": corner_maps,
        "dust": lambda *a: corner_maps(*(a or (1 / 3,))),
        "triangle-dust": triangle_dust_maps,
        "diamond": diamond_dust_maps,
    }
    if name not in table:
        raise ValueError(f"unknown IFS {name!r}; choose from {sorted(table)}")
    return table[name](*vals)


def maps_from_dicts(items: Sequence[dict]) -> list[Similarity]:
    return [Similarity(float(m["ratio"]), float(m.get("rotation", 0.0)),
                       tuple(float(v) for v in m.get("translation", (0.0, 0.0))))
            for m in items]


__all__ = [
    "Similarity", "DSet", "RegularityReport", "moran_dimension", "generate_ifs_set",
    "regularity_constants", "ball_restrict", "ball_masses", "certify", "resolvable_scales",
    "cantor_maps", "segment_maps", "corner_maps", "triangle_dust_maps", "diamond_dust_maps",
    "polygon_dust_maps", "circle_arc_polyline", "sequence_set", "embed", "builtin_maps",
    "maps_from_dicts", "attractor_point",
]
