"""Greedy covers of the irregular points of an atomic measure, Cartan-type
exceptional balls for logarithmic potentials, and grid verification."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import PreconditionError
from .functions import DiscreteMeasure, EvaluableFunction, sup_on_ball
from .sampling import BallSample, GridSpec, as_points

_CHUNK_ELEMS = 4_000_000
BOUND_TOL = 1e-9
BUDGET_RTOL = 1e-12


class Majorant:
    """Continuous strictly increasing phi with phi(0) = 0."""

    limit: float = math.inf

    def __call__(self, t):
        raise NotImplementedError

    def inverse(self, m):
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Power(Majorant):
    """phi(t) = (p t)^d."""

    p: float
    d: float

    def __post_init__(self):
        if not (self.p > 0 and self.d > 0 and math.isfinite(self.p) and math.isfinite(self.d)):
            raise ValueError("power majorant needs finite p > 0 and d > 0")

    def __call__(self, t):
        return (self.p * np.asarray(t, dtype=float)) ** self.d

    def inverse(self, m):
        return np.asarray(m, dtype=float) ** (1.0 / self.d) / self.p

    def describe(self) -> str:
        return f"power:{self.p!r},{self.d!r}"

    @classmethod
    def parse(cls, text: str) -> "Power":
        kind, _, args = text.partition(":")
        if kind.strip() != "power":
            raise ValueError(f"unknown majorant family {kind!r}")
        p, d = (float(v) for v in args.split(","))
        return cls(p, d)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.center], "radius": float(self.radius)}


@dataclass
class BallCover:
    balls: list
    d_exponent: float
    budget_limit: float
    taus: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def budget_used(self) -> float:
        return float(sum(b.radius ** self.d_exponent for b in self.balls))

    @property
    def within_budget(self) -> bool:
        return self.budget_used <= self.budget_limit * (1.0 + BUDGET_RTOL)

    def centers(self, dim: int) -> np.ndarray:
        if not self.balls:
            return np.zeros((0, dim))
        return np.array([b.center for b in self.balls], dtype=float)

    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls], dtype=float)

    def covered(self, pts: np.ndarray) -> np.ndarray:
        """Mask of points lying in some closed ball of the cover."""
        mask = np.zeros(len(pts), dtype=bool)
        for b in self.balls:
            mask |= np.linalg.norm(pts - b.center, axis=1) <= b.radius
        return mask

    def to_dict(self) -> dict:
        return {"balls": [b.to_dict() for b in self.balls], "d_exponent": self.d_exponent,
                "budget_used": self.budget_used, "budget_limit": self.budget_limit,
                "taus": [float(v) for v in self.taus], "params": self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "BallCover":
        balls = [Ball(np.asarray(b["center"], float), float(b["radius"])) for b in data["balls"]]
        return cls(balls, float(data["d_exponent"]), float(data["budget_limit"]),
                   list(data.get("taus", [])), dict(data.get("params", {})))


# ------------------------------------------------------------------ tau

def _check_majorant(mu: DiscreteMeasure, phi: Majorant):
    if not phi.limit > mu.total:
        raise PreconditionError(
            f"majorant limit {phi.limit} does not exceed the total mass {mu.total}")


def tau_many(points, mu: DiscreteMeasure, phi: Majorant) -> np.ndarray:
    """Vectorised ``tau`` (see :func:`tau`) at every row of ``points``."""
    pts = as_points(points)
    _check_majorant(mu, phi)
    out = np.zeros(len(pts))
    if len(mu) == 0 or len(pts) == 0:
        return out
    k = len(mu)
    step = max(1, _CHUNK_ELEMS // k)
    for i in range(0, len(pts), step):
        diff = pts[i:i + step, None, :] - mu.atoms[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        order = np.argsort(dist, axis=1, kind="stable")
        r = np.take_along_axis(dist, order, axis=1)
        cum = np.cumsum(mu.masses[order], axis=1)
        # mu(B(x, s)) = cum[j] on [r_j, r_{j+1}); feasible there iff s <= phi^{-1}(cum[j])
        rho = phi.inverse(cum)
        nxt = np.concatenate([r[:, 1:], np.full((len(r), 1), np.inf)], axis=1)
        cand = np.where(r <= rho, np.minimum(nxt, rho), 0.0)
        out[i:i + step] = cand.max(axis=1)
    return out


def tau(x, mu: DiscreteMeasure, phi: Majorant) -> float:
    """sup{t : mu(B(x, t)) >= phi(t)} over closed balls; 0 iff x is regular.

    Exact for atomic measures: the ball mass is a step function of t, so the
    supremum is either an atom distance or a level phi^{-1}(partial mass).
    """
    return float(tau_many(as_points(x), mu, phi)[0])


# ------------------------------------------------------------------ greedy cover

def _circumcenter(a, b, c):
    """Circumcenter of a non-degenerate triangle in R^m (None if collinear)."""
    u, v = b - a, c - a
    uu, vv, uv = u @ u, v @ v, u @ v
    den = 2.0 * (uu * vv - uv * uv)
    if den <= 1e-14 * (uu * vv + 1e-300):
        return None
    s = vv * (uu - uv) / den
    w = uu * (vv - uv) / den
    return a + s * u + w * v


def candidate_centers(mu: DiscreteMeasure, phi: Majorant, max_triples: int = 200_000) -> np.ndarray:
    """Atoms, midpoints of close pairs and circumcenters of close triples.

    Any ball B(y, T) with mu(B(y, T)) >= phi(T) can be recentred at the
    centre of the minimal enclosing ball of the atoms it contains, which is
    an atom, a pair midpoint or a triangle circumcenter in the plane; so the
    global maximum of tau is attained on this set.
    """
    atoms = mu.atoms
    reach = 2.0 * float(phi.inverse(mu.total))
    parts = [atoms]
    if len(atoms) >= 2:
        diff = atoms[:, None, :] - atoms[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        close = dist <= reach
        ii, jj = np.nonzero(np.triu(close, 1))
        parts.append(0.5 * (atoms[ii] + atoms[jj]))
        triples = []
        nbrs = [set(np.flatnonzero(close[i])) for i in range(len(atoms))]
        for i, j in zip(ii, jj):
            for m in sorted(nbrs[i] & nbrs[j]):
                if m > j:
                    triples.append((i, j, m))
            if len(triples) > max_triples:
                break
        centres = [_circumcenter(atoms[i], atoms[j], atoms[m]) for i, j, m in triples[:max_triples]]
        centres = [c for c in centres if c is not None]
        if centres:
            parts.append(np.array(centres))
    return np.concatenate(parts)


def _validate_gorin(alpha, beta, gamma):
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not beta >= 2.0:
        raise ValueError("beta must be >= 2")
    if not 0.0 < gamma <= alpha / beta:
        raise ValueError("gamma must lie in (0, alpha/beta]")


_PUSH = 1e-9


def _circle_hits(center, radius, others, other_radii):
    """Angles where the circle |z - center| = radius meets circles |z - o| = rho."""
    dv = others - center
    dist = np.hypot(dv[:, 0], dv[:, 1])
    ok = (dist > 0) & (dist <= radius + other_radii) & (dist >= np.abs(radius - other_radii))
    dv, dist, rho = dv[ok], dist[ok], other_radii[ok]
    base = np.arctan2(dv[:, 1], dv[:, 0])
    cos = np.clip((radius**2 + dist**2 - rho**2) / (2 * radius * dist), -1.0, 1.0)
    half = np.arccos(cos)
    return np.concatenate([base + half, base - half])


def _boundary_candidates(center, radius, mu, phi, balls, n_dirs=256, seed=0):
    """Points just outside the sphere |z - center| = radius where tau can peak.

    If an uncovered point has tau >= T, then so does either the centre of
    the minimal ball enclosing its atoms or some point just outside the
    covered region; these candidates target the second case.
    """
    atoms = mu.atoms
    out_r = radius * (1.0 + _PUSH) + 1e-12
    if center.size != 2:
        from .sampling import sphere_directions
        dv = atoms - center
        nrm = np.linalg.norm(dv, axis=1, keepdims=True)
        toward = dv[nrm[:, 0] > 0] / nrm[nrm[:, 0] > 0]
        dirs = np.concatenate([toward, -toward, sphere_directions(center.size, n_dirs, seed)])
        return center + out_r * dirs
    dv = atoms - center
    toward = np.arctan2(dv[:, 1], dv[:, 0])
    angles = [toward, toward + np.pi]
    # level circles: phi^{-1} of partial masses ordered by distance from each atom
    order = np.argsort(np.linalg.norm(atoms[:, None, :] - atoms[None, :, :], axis=2), axis=1)
    levels = phi.inverse(np.cumsum(mu.masses[order], axis=1))
    k = len(atoms)
    angles.append(_circle_hits(center, radius, np.repeat(atoms, k, axis=0), levels.ravel()))
    # bisectors of atom pairs: the nearest-atom ordering changes there
    if k >= 2:
        i, j = np.triu_indices(k, 1)
        mid = 0.5 * (atoms[i] + atoms[j])
        nvec = atoms[j] - atoms[i]
        nlen = np.hypot(nvec[:, 0], nvec[:, 1])
        good = nlen > 0
        mid, nvec, nlen = mid[good], nvec[good], nlen[good]
        off = np.einsum("ij,ij->i", mid - center, nvec) / nlen
        ok = np.abs(off) <= radius
        n_hat = nvec[ok] / nlen[ok, None]
        base = np.arctan2(n_hat[:, 1], n_hat[:, 0])
        half = np.arccos(np.clip(off[ok] / radius, -1.0, 1.0))
        angles += [base + half, base - half]
    if balls:
        oc = np.array([b.center for b in balls])
        orad = np.array([b.radius for b in balls])
        hits = _circle_hits(center, radius, oc, orad)
        angles += [hits + 1e-7, hits - 1e-7]
    th = np.concatenate(angles)
    pts = center + out_r * np.column_stack([np.cos(th), np.sin(th)])
    return pts


def gorin_cover(mu: DiscreteMeasure, phi: Majorant, alpha: float = 0.999, beta: float = 2.001,
                gamma: float = 0.49, extra_candidates=None) -> BallCover:
    """Greedy cover of the irregular points of ``mu`` with respect to ``phi``.

    At each step the uncovered candidate with the largest tau is chosen
    (so tau(x_k) >= alpha * tau_k for any alpha <= 1) and B(x_k, beta * tau_k)
    is added.  Candidates are the static centres of :func:`candidate_centers`
    plus points just outside every ball placed so far.  The balls
    B(x_k, tau_k) are pairwise disjoint, which gives sum phi(gamma t_k) <= mu(X).
    """
    _validate_gorin(alpha, beta, gamma)
    _check_majorant(mu, phi)
    params = {"alpha": alpha, "beta": beta, "gamma": gamma, "majorant": phi.describe()}
    d = getattr(phi, "d", 1.0)
    p = getattr(phi, "p", None)
    limit = mu.total / (gamma * p) ** d if p is not None else math.inf
    if len(mu) == 0:
        return BallCover([], d, limit, [], params)

    cands = candidate_centers(mu, phi)
    if extra_candidates is not None:
        cands = np.concatenate([cands, as_points(extra_candidates)])
    taus = tau_many(cands, mu, phi)
    keep = taus > 0
    cands, taus = cands[keep], taus[keep]
    balls, picked = [], []
    while len(cands):
        i = int(np.argmax(taus))
        tk = float(taus[i])
        ball = Ball(cands[i].copy(), beta * tk)
        fresh = _boundary_candidates(ball.center, ball.radius, mu, phi, balls)
        balls.append(ball)
        picked.append(tk)
        cands = np.concatenate([cands, fresh])
        taus = np.concatenate([taus, tau_many(fresh, mu, phi)])
        keep = taus > 0
        for b in balls:
            keep &= np.linalg.norm(cands - b.center, axis=1) > b.radius
        cands, taus = cands[keep], taus[keep]
    return BallCover(balls, d, limit, picked, params)


def disjointness_violations(cover: BallCover) -> list:
    """Index pairs (j, k) whose balls B(x, tau) intersect."""
    bad = []
    dim = cover.balls[0].center.size if cover.balls else 2
    c = cover.centers(dim)
    for j, k in itertools.combinations(range(len(c)), 2):
        if np.linalg.norm(c[j] - c[k]) < cover.taus[j] + cover.taus[k]:
            bad.append((j, k))
    return bad


def gorin_budget_sum(cover: BallCover, phi: Majorant) -> float:
    gamma = cover.params["gamma"]
    return float(sum(phi(gamma * b.radius) for b in cover.balls))


def cartan_majorant(k: float, H: float, d: float) -> Power:
    return Power((k * d) ** (1.0 / d) / H, d)


def cartan_cover(mu: DiscreteMeasure, H: float, d: float, mass: float | None = None,
                 extra_candidates=None) -> BallCover:
    """Exceptional balls with sum r^d <= (2H)^d / d for the potential of ``mu``.

    Uses the majorant (p t)^d with p = (k d)^{1/d} / H and the greedy with
    alpha = 1, beta = 2, gamma = 1/2, which is admissible because the greedy
    attains the supremum of tau exactly.  ``mass`` overrides k (any value
    >= mu(X) is allowed).
    """
    if not (H > 0 and d > 0):
        raise ValueError("H and d must be positive")
    k = mu.total if mass is None else float(mass)
    if k < mu.total * (1 - 1e-12):
        raise ValueError("mass parameter must be at least the total mass")
    limit = (2.0 * H) ** d / d
    meta = {"H": H, "k": k, "d": d}
    if len(mu) == 0 or k == 0:
        return BallCover([], d, limit, [], {"alpha": 1.0, "beta": 2.0, "gamma": 0.5, **meta})
    cover = gorin_cover(mu, cartan_majorant(k, H, d), 1.0, 2.0, 0.5, extra_candidates)
    cover.budget_limit = limit
    cover.params.update(meta)
    return cover


# ------------------------------------------------------------------ verification

@dataclass
class CartanReport:
    cover: BallCover
    H: float | None
    k: float | None
    bound: float
    min_off_cover: float
    grid_size: int
    violations: list
    grid: dict = field(default_factory=dict)
    off_cover_count: int = 0
    empty_off_cover: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return not self.violations and self.cover.within_budget

    def to_dict(self) -> dict:
        return {"cover": self.cover.to_dict(), "H": self.H, "k": self.k, "bound": self.bound,
                "min_off_cover": self.min_off_cover, "grid_size": self.grid_size,
                "off_cover_count": self.off_cover_count, "empty_off_cover": self.empty_off_cover,
                "violations": [[float(v) for v in p] for p in self.violations],
                "within_budget": self.cover.within_budget, "success": self.success,
                "grid": self.grid, **self.extra}


def _grid_points(grid_spec):
    if isinstance(grid_spec, (GridSpec, BallSample)):
        return grid_spec.points(), grid_spec.describe()
    pts = np.asarray(grid_spec, dtype=float)
    return pts, {"kind": "points", "count": len(pts)}


def verify_cartan(f: EvaluableFunction, cover: BallCover, bound: float, grid_spec,
                  restrict=None, max_violations: int = 1000) -> CartanReport:
    """Evaluate ``f`` on every grid point outside the cover and compare to ``bound``.

    ``restrict`` is an optional boolean mask filter (callable on points).
    """
    pts, desc = _grid_points(grid_spec)
    if restrict is not None:
        pts = pts[restrict(pts)]
    off = pts[~cover.covered(pts)]
    vals = f(off) if len(off) else np.zeros(0)
    min_off = float(vals.min()) if len(vals) else math.inf
    bad = off[vals < bound - BOUND_TOL]
    return CartanReport(cover, cover.params.get("H"), cover.params.get("k"), float(bound), min_off,
                        len(pts), [p for p in bad[:max_violations]], desc, len(off), len(off) == 0,
                        {"violation_count": int(len(bad))})


def cartan_bound(k: float, H: float) -> float:
    return k * math.log(H / math.e)


def _merge_balls(centers, radii, d):
    """Greedily merge pairs of balls while that lowers sum r^d."""
    centers = [np.asarray(c, float) for c in centers]
    radii = list(radii)
    improved = True
    while improved and len(radii) > 1:
        improved = False
        best = None
        for i, j in itertools.combinations(range(len(radii)), 2):
            dist = float(np.linalg.norm(centers[i] - centers[j]))
            if dist + radii[j] <= radii[i]:
                big_c, big_r = centers[i], radii[i]
            elif dist + radii[i] <= radii[j]:
                big_c, big_r = centers[j], radii[j]
            else:
                big_r = 0.5 * (dist + radii[i] + radii[j])
                big_c = centers[i] + (big_r - radii[i]) / dist * (centers[j] - centers[i])
            gain = radii[i] ** d + radii[j] ** d - big_r ** d
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, i, j, big_c, big_r)
        if best is not None:
            _, i, j, c, r = best
            for idx in (j, i):
                centers.pop(idx)
                radii.pop(idx)
            centers.append(c)
            radii.append(r)
            improved = True
    return centers, radii


def local_cover_check(f: EvaluableFunction, x, t: float, r: float, H: float, d: float,
                      c_hat: float, M1: float, M2: float, grid_spec: GridSpec) -> CartanReport:
    """Check the local exceptional-disk estimate with a fitted constant.

    The sublevel set {z in D(x,t) : f(z) < sup_{D(x,t)} f + c_hat (M1-M2) log(H/e)}
    is sampled on the grid, split into connected components, each enclosed
    in a disk (padded by half a cell diagonal), and the disks are merged
    greedily.  Success means the resulting cover fits the budget
    (2 t H / r)^d / d.
    """
    xc = as_points(x)[0]
    if not 0.0 < r < 1.0 or t <= 0 or H <= 0 or d <= 0 or c_hat <= 0:
        raise ValueError("need 0 < r < 1 and positive t, H, d, c_hat")
    if np.linalg.norm(xc) + t / r > r + 1e-12:
        raise PreconditionError("D(x, t/r) must lie inside D_r")
    sup_val = sup_on_ball(f, xc, t, resolution=2048).value
    level = sup_val + c_hat * (M1 - M2) * math.log(H / math.e)
    pts = grid_spec.points()
    inside = np.linalg.norm(pts - xc, axis=1) < t
    vals = np.full(len(pts), np.inf)
    vals[inside] = f(pts[inside])
    low = (vals < level).reshape(grid_spec.n, grid_spec.n)
    labels, count = ndimage.label(low, structure=np.ones((3, 3)))
    hx, hy = grid_spec.spacing
    pad = 0.5 * math.hypot(hx, hy)
    centers, radii = [], []
    flat = labels.ravel()
    for lab in range(1, count + 1):
        comp = pts[flat == lab]
        lo, hi = comp.min(axis=0), comp.max(axis=0)
        c = 0.5 * (lo + hi)
        centers.append(c)
        radii.append(float(np.linalg.norm(comp - c, axis=1).max()) + pad)
    centers, radii = _merge_balls(centers, radii, d)
    limit = (2.0 * t * H / r) ** d / d
    cover = BallCover([Ball(c, rr) for c, rr in zip(centers, radii)], d, limit, [],
                      {"H": H, "d": d, "t": t, "r": r, "c_hat": c_hat})
    off = pts[inside & ~cover.covered(pts)]
    off_vals = f(off) if len(off) else np.zeros(0)
    bad = off[off_vals < level - BOUND_TOL]
    return CartanReport(cover, H, None, float(level),
                        float(off_vals.min()) if len(off_vals) else math.inf,
                        int(inside.sum()), list(bad), grid_spec.describe(), len(off), len(off) == 0,
                        {"sublevel_points": int(low.sum()), "sup_on_disk": sup_val})
