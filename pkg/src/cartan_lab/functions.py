"""Subharmonic / plurisubharmonic test functions and suprema over balls.

Every function maps a real ``(N, 2n)`` point array to an extended-real
array: ``-inf`` is a legitimate value (at atoms, roots, common zeros) and
``+inf`` never occurs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DegenerateFunctionError, DimensionMismatchError
from .sampling import as_points, sphere_directions, to_complex

_CHUNK_ELEMS = 4_000_000
MAX_POLY_DEGREE = 8


@dataclass
class DiscreteMeasure:
    """Finite atomic measure: ``sum(masses[i] * delta(atoms[i]))``."""

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.atoms.ndim == 1:
            self.atoms = self.atoms.reshape(-1, 2) if self.atoms.size else self.atoms.reshape(0, 2)
        self.masses = np.asarray(self.masses, dtype=float).ravel()
        if len(self.masses) != len(self.atoms):
            raise ValueError("atoms and masses differ in length")
        if np.any(self.masses <= 0):
            raise ValueError("masses must be positive")
        if not np.all(np.isfinite(self.atoms)) or not np.all(np.isfinite(self.masses)):
            raise ValueError("atoms and masses must be finite")

    @classmethod
    def unit(cls, atoms) -> "DiscreteMeasure":
        pts = as_points(atoms) if np.iscomplexobj(np.asarray(atoms)) else np.asarray(atoms, float)
        return cls(pts, np.ones(len(pts)))

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    @property
    def ambient_n(self) -> int:
        return self.atoms.shape[1] // 2

    def __len__(self) -> int:
        return len(self.atoms)

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "masses": self.masses.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        atoms = np.asarray(data.get("atoms", []), dtype=float)
        masses = data.get("masses")
        if masses is None:
            masses = np.ones(len(atoms))
        return cls(atoms.reshape(len(atoms), -1) if atoms.size else np.zeros((0, 2)), masses)


def _log_dist_rows(z: np.ndarray, atoms: np.ndarray):
    """Yield (slice, log|z - atom|) blocks of shape (chunk, K)."""
    step = max(1, _CHUNK_ELEMS // max(len(atoms), 1))
    for i in range(0, len(z), step):
        diff = z[i:i + step, None, :] - atoms[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        with np.errstate(divide="ignore"):
            yield slice(i, i + step), np.log(dist)


class EvaluableFunction:
    """Base class; subclasses implement :meth:`_eval` on validated points."""

    ambient_n: int | None = None

    def __call__(self, z) -> np.ndarray:
        pts = as_points(z)
        if self.ambient_n is not None and pts.shape[1] != 2 * self.ambient_n:
            raise DimensionMismatchError(
                f"point has {pts.shape[1]} real coordinates, function lives in C^{self.ambient_n}")
        return self._eval(pts)

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def singularities(self) -> np.ndarray | None:
        """Points where the function is -inf, or None when not known in closed form."""
        return np.zeros((0, 2 * (self.ambient_n or 1)))

    def lipschitz_on_sphere(self, center: np.ndarray, radius: float) -> float | None:
        """Upper bound on the gradient norm along the sphere |z - center| = radius."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


def _sum_inv_dist(points: np.ndarray, weights: np.ndarray, center, radius) -> float | None:
    if len(points) == 0:
        return 0.0
    gap = np.abs(np.linalg.norm(points - center, axis=1) - radius)
    if np.any(gap == 0):
        return None
    return float(np.sum(weights / gap))


@dataclass
class Potential(EvaluableFunction):
    """Logarithmic potential ``u(z) = sum m_i log|z - xi_i|``."""

    measure: DiscreteMeasure

    @property
    def ambient_n(self) -> int:
        return self.measure.ambient_n

    def _eval(self, pts):
        out = np.zeros(len(pts))
        if len(self.measure) == 0:
            return out
        for sl, logd in _log_dist_rows(pts, self.measure.atoms):
            out[sl] = (logd * self.measure.masses).sum(axis=1)
        return out

    def singularities(self):
        return self.measure.atoms

    def lipschitz_on_sphere(self, center, radius):
        return _sum_inv_dist(self.measure.atoms, self.measure.masses, center, radius)

    def to_dict(self):
        return {"type": "potential", **self.measure.to_dict()}


@dataclass
class LogAbsPolynomial(EvaluableFunction):
    """``log|p(z)|`` for ``p(z) = exp(log_leading) * prod(z - root_i)`` on C."""

    roots: np.ndarray
    log_leading: float = 0.0
    ambient_n = 1

    def __post_init__(self):
        r = np.asarray(self.roots)
        self.roots = as_points(r) if np.iscomplexobj(r) else np.asarray(r, float).reshape(-1, 2)

    @property
    def degree(self) -> int:
        return len(self.roots)

    def _eval(self, pts):
        out = np.full(len(pts), float(self.log_leading))
        if len(self.roots) == 0:
            return out
        for sl, logd in _log_dist_rows(pts, self.roots):
            out[sl] = self.log_leading + logd.sum(axis=1)
        return out

    def singularities(self):
        return self.roots

    def lipschitz_on_sphere(self, center, radius):
        return _sum_inv_dist(self.roots, np.ones(len(self.roots)), center, radius)

    def to_dict(self):
        return {"type": "logpoly", "roots": self.roots.tolist(), "log_leading": self.log_leading}


@dataclass
class Polynomial:
    """Polynomial in n complex variables: ``sum c * prod z_j**e_j``."""

    n: int
    terms: tuple  # ((exponents tuple, complex coefficient), ...)

    def __post_init__(self):
        self.terms = tuple((tuple(int(e) for e in exps), complex(c)) for exps, c in self.terms)
        for exps, _ in self.terms:
            if len(exps) != self.n or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for {self.n} variables")
        if self.degree > MAX_POLY_DEGREE:
            raise ValueError(f"total degree {self.degree} exceeds {MAX_POLY_DEGREE}")

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """Evaluate on a complex ``(N, n)`` array."""
        out = np.zeros(len(z), dtype=complex)
        for exps, c in self.terms:
            term = np.full(len(z), c, dtype=complex)
            for j, e in enumerate(exps):
                if e:
                    term = term * z[:, j] ** e
            out += term
        return out

    def scaled(self, factor: complex) -> "Polynomial":
        return Polynomial(self.n, tuple((e, c * factor) for e, c in self.terms))

    def to_list(self) -> list:
        return [{"exp": list(e), "coef": [c.real, c.imag]} for e, c in self.terms]

    @classmethod
    def from_list(cls, n: int, items: Sequence) -> "Polynomial":
        terms = []
        for it in items:
            if isinstance(it, dict):
                exps, coef = it["exp"], it["coef"]
            else:
                exps, coef = it
            c = complex(coef[0], coef[1]) if isinstance(coef, (list, tuple)) else complex(coef)
            terms.append((tuple(exps), c))
        return cls(n, tuple(terms))


@dataclass
class LogNormMap(EvaluableFunction):
    """``log|F| = 0.5 * log(|f_1|^2 + ... + |f_m|^2)`` for polynomial components."""

    components: list

    @property
    def ambient_n(self) -> int:
        return self.components[0].n

    def sq_norm(self, pts: np.ndarray) -> np.ndarray:
        z = to_complex(pts)
        s = np.zeros(len(pts))
        for p in self.components:
            v = p(z)
            s += v.real**2 + v.imag**2
        return s

    def _eval(self, pts):
        with np.errstate(divide="ignore"):
            return 0.5 * np.log(self.sq_norm(pts))

    def singularities(self):
        return None

    def to_dict(self):
        return {"type": "lognormmap", "n": self.ambient_n,
                "components": [p.to_list() for p in self.components]}


@dataclass
class Constant(EvaluableFunction):
    value: float

    def _eval(self, pts):
        return np.full(len(pts), float(self.value))

    def lipschitz_on_sphere(self, center, radius):
        return 0.0

    def to_dict(self):
        return {"type": "constant", "value": self.value}


def _common_n(parts) -> int | None:
    dims = {p.ambient_n for p in parts if p.ambient_n is not None}
    if len(dims) > 1:
        raise DimensionMismatchError(f"parts live in different spaces: {sorted(dims)}")
    return dims.pop() if dims else None


@dataclass
class MaxOf(EvaluableFunction):
    parts: list = field(default_factory=list)

    def __post_init__(self):
        if not self.parts:
            raise ValueError("MaxOf needs at least one part")
        _common_n(self.parts)

    @property
    def ambient_n(self):
        return _common_n(self.parts)

    def _eval(self, pts):
        return np.max(np.vstack([p._eval(pts) for p in self.parts]), axis=0)

    def singularities(self):
        # max is -inf only where every part is; the union is a safe superset
        sings = [p.singularities() for p in self.parts]
        if any(s is None for s in sings):
            return None
        return np.concatenate(sings) if sings else None

    def lipschitz_on_sphere(self, center, radius):
        ls = [p.lipschitz_on_sphere(center, radius) for p in self.parts]
        return None if any(v is None for v in ls) else max(ls)

    def to_dict(self):
        return {"type": "max", "parts": [p.to_dict() for p in self.parts]}


@dataclass
class Shifted(EvaluableFunction):
    base: EvaluableFunction
    offset: float

    @property
    def ambient_n(self):
        return self.base.ambient_n

    def _eval(self, pts):
        return self.base._eval(pts) + self.offset

    def singularities(self):
        return self.base.singularities()

    def lipschitz_on_sphere(self, center, radius):
        return self.base.lipschitz_on_sphere(center, radius)

    def to_dict(self):
        return {"type": "shifted", "base": self.base.to_dict(), "offset": self.offset}


@dataclass
class Scaled(EvaluableFunction):
    """``factor * base``; subharmonic only for ``factor >= 0``."""

    base: EvaluableFunction
    factor: float

    @property
    def ambient_n(self):
        return self.base.ambient_n

    def _eval(self, pts):
        v = self.base._eval(pts)
        if self.factor == 0:
            return np.zeros_like(v)
        return self.factor * v

    def singularities(self):
        return self.base.singularities()

    def lipschitz_on_sphere(self, center, radius):
        lb = self.base.lipschitz_on_sphere(center, radius)
        return None if lb is None else abs(self.factor) * lb

    def to_dict(self):
        return {"type": "scaled", "base": self.base.to_dict(), "factor": self.factor}


def function_from_dict(data: dict) -> EvaluableFunction:
    """Inverse of ``to_dict`` for the tagged-union JSON format."""
    kind = data.get("type")
    if kind == "potential":
        return Potential(DiscreteMeasure.from_dict(data))
    if kind == "logpoly":
        return LogAbsPolynomial(np.asarray(data["roots"], float).reshape(-1, 2),
                                float(data.get("log_leading", 0.0)))
    if kind == "lognormmap":
        n = int(data["n"])
        return LogNormMap([Polynomial.from_list(n, c) for c in data["components"]])
    if kind == "constant":
        return Constant(float(data["value"]))
    if kind == "max":
        return MaxOf([function_from_dict(p) for p in data["parts"]])
    if kind == "shifted":
        return Shifted(function_from_dict(data["base"]), float(data["offset"]))
    if kind == "scaled":
        return Scaled(function_from_dict(data["base"]), float(data["factor"]))
    raise ValueError(f"unknown function type {kind!r}")


def evaluate(f: EvaluableFunction, z) -> float | np.ndarray:
    """Evaluate ``f``; a single point returns a float."""
    pts = as_points(z)
    v = f(pts)
    single = np.ndim(z) == 0 or (not np.iscomplexobj(np.asarray(z)) and np.ndim(z) == 1)
    return float(v[0]) if single else v


# ------------------------------------------------------------------ suprema

@dataclass
class SupEstimate:
    value: float
    argmax: np.ndarray
    resolution: int
    error_bound: float | None

    def to_dict(self) -> dict:
        return {"value": self.value, "argmax": self.argmax.tolist(),
                "resolution": self.resolution, "error_bound": self.error_bound}


def _finite_or_floor(v: float) -> float:
    return v if np.isfinite(v) else -1e300


def _sup_circle(f, center, radius, resolution, lip=None, max_peaks=16):
    theta = 2.0 * np.pi * np.arange(resolution) / resolution
    base = np.zeros((resolution, center.size))
    base[:, 0] = center[0] + radius * np.cos(theta)
    base[:, 1] = center[1] + radius * np.sin(theta)
    vals = f(base)
    best_v, best_theta = float(vals.max()), float(theta[int(vals.argmax())])

    prev, nxt = np.roll(vals, 1), np.roll(vals, -1)
    peaks = np.flatnonzero((vals >= prev) & (vals >= nxt) & np.isfinite(vals))
    peaks = peaks[np.argsort(vals[peaks])[::-1][:max_peaks]]
    h = 2.0 * np.pi / resolution
    if lip is not None and np.isfinite(best_v):
        # a peak can only beat the best sample if it is within one Lipschitz step
        peaks = peaks[vals[peaks] >= best_v - lip * radius * h]

    def neg(th):
        p = center.copy()
        p[0] += radius * math.cos(th)
        p[1] += radius * math.sin(th)
        return -_finite_or_floor(float(f(p[None, :])[0]))

    for j in peaks:
        res = minimize_scalar(neg, bounds=(theta[j] - h, theta[j] + h), method="bounded",
                              options={"xatol": 1e-13})
        if -res.fun > best_v:
            best_v, best_theta = -res.fun, float(res.x)
    arg = center.copy()
    arg[0] += radius * math.cos(best_theta)
    arg[1] += radius * math.sin(best_theta)
    return best_v, arg, radius * h / 2.0


def _sup_sphere(f, center, radius, resolution, seed, n_starts=4, xatol=1e-11):
    dirs = sphere_directions(center.size, resolution, seed)
    vals = f(center + radius * dirs)
    order = np.argsort(vals)[::-1]
    best_v, best_arg = float(vals[order[0]]), center + radius * dirs[order[0]]

    def neg(y):
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 1e300
        return -_finite_or_floor(float(f((center + radius * y / nrm)[None, :])[0]))

    for i in order[:n_starts]:
        if not np.isfinite(vals[i]):
            continue
        res = minimize(neg, dirs[i], method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun > best_v:
            y = res.x / np.linalg.norm(res.x)
            best_v, best_arg = float(-res.fun), center + radius * y
    return best_v, best_arg


def sup_on_ball(f: EvaluableFunction, center, radius: float, resolution: int = 512,
                seed: int = 0, n_starts: int = 4, xatol: float = 1e-11) -> SupEstimate:
    """Supremum of a (pluri)subharmonic ``f`` over the ball B(center, radius).

    By the maximum principle the supremum sits on the boundary sphere.  In C
    the circle is sampled at ``resolution`` equispaced angles and every
    sampled local maximum is refined by bounded Brent search inside its
    bracket.  In C^n, n >= 2, a scrambled-Sobol sphere sample is refined by
    Nelder-Mead from the best ``n_starts`` starts (ignored in C).

    ``error_bound`` bounds the gap between the true supremum and the best
    *sampled* value via a Lipschitz constant on the circle; it is ``None``
    when a singularity lies on the sphere, when singularities are unknown,
    or in C^n with n >= 2.
    """
    center = as_points(center)[0]
    if radius <= 0:
        raise ValueError("radius must be positive")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if f.ambient_n is not None and center.size != 2 * f.ambient_n:
        raise DimensionMismatchError("center dimension does not match the function")
    if isinstance(f, Constant):
        return SupEstimate(float(f.value), center.copy(), resolution, 0.0)
    if center.size == 2:
        lip = f.lipschitz_on_sphere(center, radius)
        value, arg, half_step = _sup_circle(f, center, radius, resolution, lip)
        err = None if lip is None or not np.isfinite(value) else lip * half_step
    else:
        value, arg = _sup_sphere(f, center, radius, resolution, seed, n_starts, xatol)
        err = 0.0 if f.lipschitz_on_sphere(center, radius) == 0.0 else None
    return SupEstimate(value, arg, resolution, err)


def normalize_m1m2(f: EvaluableFunction, r: float, resolution: int = 4096) -> tuple[float, float]:
    """Tightest (M1, M2) with sup_{D_1} f <= M1 and sup_{D_r} f >= M2."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    origin = np.zeros(2 * (f.ambient_n or 1))
    m1 = sup_on_ball(f, origin, 1.0, resolution).value
    m2 = sup_on_ball(f, origin, r, resolution).value
    if not np.isfinite(m2):
        raise DegenerateFunctionError("f is identically -inf on D_r")
    return m1, m2
