"""Reference computations that share no code with the package.

Each one takes a deliberately different route (exact integer arithmetic,
brute-force grids, dense sampling) from the implementation it checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def bisect_root(g, lo: float, hi: float, tol: float = 1e-14) -> float:
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def moran_oracle(ratios) -> float:
    """d with sum r_i^d = 1 by plain bisection on (0, 50]."""
    return bisect_root(lambda d: sum(r**d for r in ratios) - 1.0, 1e-12, 50.0)


def cantor_numerators(depth: int) -> np.ndarray:
    """Integers n with n / 3^depth a left endpoint of a depth-``depth``
    middle-thirds cylinder of [0, 1] (base-3 digits in {0, 2})."""
    out = [sum(dig * 3 ** (depth - 1 - i) for i, dig in enumerate(word))
           for word in itertools.product((0, 2), repeat=depth)]
    return np.array(sorted(out), dtype=np.int64)


def cantor_ball_mass(depth: int, center_num: int, radius_num: int, open_ball: bool = True) -> float:
    """Natural mass (2^-depth per cylinder) of the left endpoints in the ball
    of radius radius_num / 3^depth about center_num / 3^depth, in exact integers."""
    nums = cantor_numerators(depth)
    gap = np.abs(nums - center_num)
    inside = gap < radius_num if open_ball else gap <= radius_num
    return int(inside.sum()) / 2**depth


def cantor_regularity_oracle(depth: int, max_m: int) -> tuple[float, float]:
    """(a, b) of the depth-``depth`` Cantor cloud over open balls of radius
    3^-m, m = 0..max_m, centred at every sample point."""
    nums = cantor_numerators(depth)
    d = math.log(2) / math.log(3)
    a, b = 0.0, math.inf
    for m in range(max_m + 1):
        rad = 3 ** (depth - m)
        # counts in (c - rad, c + rad) via sorted search
        left = np.searchsorted(nums, nums - rad, side="right")
        right = np.searchsorted(nums, nums + rad, side="left")
        ratios = (right - left) / 2**depth / (3.0**-m) ** d
        a, b = max(a, ratios.max()), min(b, ratios.min())
    return a, b


def brute_tau(x, atoms, masses, p: float, d: float, t_max: float, n: int = 200_001) -> float:
    """sup{t : mu(closed B(x,t)) >= (p t)^d} on a uniform t grid."""
    x = np.asarray(x, float)
    dist = np.linalg.norm(np.asarray(atoms, float) - x, axis=1)
    ts = np.linspace(0.0, t_max, n)[1:]
    mass = _cum_mass(dist, np.asarray(masses, float), ts)
    ok = mass >= (p * ts) ** d
    return float(ts[ok].max()) if ok.any() else 0.0


def _cum_mass(dist, masses, ts):
    order = np.argsort(dist)
    cum = np.concatenate([[0.0], np.cumsum(masses[order])])
    return cum[np.searchsorted(dist[order], ts, side="right")]


def dense_circle_sup(g, center: complex, radius: float, n: int = 1_000_000) -> float:
    """max of g over n equispaced points of the circle; g takes complex arrays."""
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    with np.errstate(divide="ignore"):
        return float(np.max(g(center + radius * np.exp(1j * th))))


def log_abs_poly(roots):
    roots = np.asarray(roots, complex)

    def g(z):
        z = np.asarray(z, complex)
        with np.errstate(divide="ignore"):
            return np.sum(np.log(np.abs(z[..., None] - roots)), axis=-1)
    return g


def power_mean(values, weights, p: float) -> float:
    w = np.asarray(weights, float) / np.sum(weights)
    v = np.asarray(values, float)
    if math.isinf(p):
        return float(v.max())
    return float((w @ v**p) ** (1.0 / p))


def random_unit_atoms(seed: int, max_atoms: int = 50) -> np.ndarray:
    """1..max_atoms points uniform in the unit disk (unit masses by convention)."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, max_atoms + 1))
    rad = np.sqrt(rng.uniform(0, 1, k))
    th = rng.uniform(0, 2 * math.pi, k)
    return np.column_stack([rad * np.cos(th), rad * np.sin(th)])


def closed_ball_mass(z: np.ndarray, atoms: np.ndarray, masses: np.ndarray, t: float) -> np.ndarray:
    """mu(closed B(z_i, t)) for every row z_i, by a plain distance matrix."""
    dist = np.sqrt(((z[:, None, :] - atoms[None, :, :]) ** 2).sum(-1))
    return (dist <= t) @ masses


def closed_ball_masses(z: np.ndarray, atoms: np.ndarray, masses: np.ndarray, ts) -> np.ndarray:
    """mu(closed B(z_i, t_j)) as a (len(z), len(ts)) array, one distance matrix for all radii."""
    dist = np.sqrt(((z[:, None, :] - atoms[None, :, :]) ** 2).sum(-1))
    return np.einsum("ijk,j->ik", dist[:, :, None] <= np.asarray(ts)[None, None, :], masses)
