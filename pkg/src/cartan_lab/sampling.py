"""Point-set helpers: complex/real coordinate conversion, grids and
low-discrepancy samples on spheres and balls."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc


def as_points(z, n: int | None = None) -> np.ndarray:
    """Coerce ``z`` into a real ``(N, 2n)`` array.

    Accepts Python/NumPy complex scalars or arrays of shape ``(N,)`` (one
    complex coordinate) or ``(N, n)``, and real arrays of shape ``(2n,)`` or
    ``(N, 2n)``.
    """
    arr = np.asarray(z)
    if np.iscomplexobj(arr):
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if n in (None, 1) else arr.reshape(1, -1)
        out = np.empty((arr.shape[0], 2 * arr.shape[1]))
        out[:, 0::2] = arr.real
        out[:, 1::2] = arr.imag
        return out
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0:
        return np.array([[float(arr), 0.0]])
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    return arr


def to_complex(points: np.ndarray) -> np.ndarray:
    """Real ``(N, 2n)`` array to complex ``(N, n)`` array."""
    return points[:, 0::2] + 1j * points[:, 1::2]


def pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``a`` (N, m) and ``b`` (K, m)."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _sobol(dim: int, count: int, seed: int) -> np.ndarray:
    m = max(1, math.ceil(math.log2(max(count, 2))))
    u = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)
    return u[:count]


def sphere_directions(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` low-discrepancy unit vectors in R^dim (scrambled Sobol mapped
    through the Gaussian quantile and normalised)."""
    u = np.clip(_sobol(dim, count, seed), 1e-12, 1 - 1e-12)
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_points(center, radius: float, count: int, seed: int = 0) -> np.ndarray:
    """``count`` low-discrepancy points inside the open ball B(center, radius)
    of R^dim, obtained by rejection from a scrambled Sobol cube sample."""
    center = np.asarray(center, dtype=float).ravel()
    dim = center.size
    frac = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) / 2.0**dim
    want = int(count / frac * 1.1) + 64
    while True:
        u = _sobol(dim, want, seed)
        y = 2.0 * u - 1.0
        y = y[np.einsum("ij,ij->i", y, y) < 1.0]
        if len(y) >= count:
            return center + radius * y[:count]
        want *= 2


@dataclass(frozen=True)
class GridSpec:
    """Rectangular ``n x n`` grid over ``[xmin, xmax] x [ymin, ymax]`` in C."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    n: int

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError(f"grid spec needs 'xmin,xmax,ymin,ymax,n', got {text!r}")
        return cls(*(float(p) for p in parts[:4]), int(parts[4]))

    @property
    def spacing(self) -> tuple[float, float]:
        return ((self.xmax - self.xmin) / max(self.n - 1, 1),
                (self.ymax - self.ymin) / max(self.n - 1, 1))

    def points(self) -> np.ndarray:
        xs = np.linspace(self.xmin, self.xmax, self.n)
        ys = np.linspace(self.ymin, self.ymax, self.n)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def describe(self) -> dict:
        return {"kind": "rect", "xmin": self.xmin, "xmax": self.xmax,
                "ymin": self.ymin, "ymax": self.ymax, "n": self.n}


@dataclass(frozen=True)
class BallSample:
    """Low-discrepancy sample of ``count`` points in a Euclidean ball of C^n."""

    center: tuple
    radius: float
    count: int
    seed: int = 0

    def points(self) -> np.ndarray:
        return ball_points(self.center, self.radius, self.count, self.seed)

    def describe(self) -> dict:
        return {"kind": "ball-sobol", "center": list(self.center),
                "radius": self.radius, "count": self.count, "seed": self.seed}
