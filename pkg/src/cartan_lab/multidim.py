"""log|F| for polynomial maps F: C^n -> C^n with known isolated zeros:
lower envelope, Cartan-type exceptional balls, ellipticity probing and the
Remez-type gap on sets embedded in C^n."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cartan import CartanReport, cartan_cover, verify_cartan
from .errors import DegenerateInputError, IsolationError, PreconditionError, ResolutionError
from .functions import DiscreteMeasure, LogNormMap, Polynomial, Shifted, sup_on_ball
from .geometry import DSet
from .sampling import BallSample, as_points, sphere_directions
from .trace import RemezExperiment, _certified_a

ZERO_TOL = 1e-10
BOUND_TOL = 1e-9


@dataclass
class HolomorphicMapSample:
    """Polynomial map with analytically known zeros, normalised so that
    sup over B(0, norm_radius) of log|F| is 0; M = -inf over |z| = 1/2."""

    n: int
    components: list
    known_zeros: list  # [(real point array of length 2n, multiplicity)]
    name: str = ""
    norm_radius: float = 1.0
    log_scale: float | None = None
    M: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("maps need n >= 2 variables")
        if len(self.components) != self.n:
            raise ValueError("need exactly n component polynomials")
        if any(p.n != self.n for p in self.components):
            raise ValueError("component polynomials live in the wrong number of variables")
        self.known_zeros = [(np.asarray(as_points(np.asarray(z)) if np.iscomplexobj(np.asarray(z))
                                        else np.asarray(z, float)).ravel(), int(m))
                            for z, m in self.known_zeros]
        raw = LogNormMap(self.components)
        for z, m in self.known_zeros:
            if m < 1:
                raise ValueError("multiplicities must be >= 1")
            if math.sqrt(raw.sq_norm(z[None, :])[0]) >= ZERO_TOL:
                raise ValueError(f"listed zero {z.tolist()} is not a zero of F")
        if self.log_scale is None:
            origin = np.zeros(2 * self.n)
            self.log_scale = sup_on_ball(raw, origin, self.norm_radius, 8192, self.seed).value
        if self.M is None:
            self.M = -inf_on_sphere(self.u, np.zeros(2 * self.n), 0.5, seed=self.seed)

    @property
    def u(self) -> Shifted:
        return Shifted(LogNormMap(self.components), -float(self.log_scale))

    @property
    def k(self) -> int:
        return sum(m for z, m in self.known_zeros if np.linalg.norm(z) < 0.5)

    def zeros_in_half_ball(self) -> list:
        return [(z, m) for z, m in self.known_zeros if np.linalg.norm(z) < 0.5]

    def log_norm(self, z) -> np.ndarray:
        return self.u(z)

    def to_dict(self) -> dict:
        return {"n": self.n, "name": self.name,
                "components": [p.to_list() for p in self.components],
                "zeros": [{"point": z.tolist(), "mult": m} for z, m in self.known_zeros],
                "norm_radius": self.norm_radius, "log_scale": self.log_scale, "M": self.M}

    @classmethod
    def from_dict(cls, data: dict) -> "HolomorphicMapSample":
        n = int(data["n"])
        comps = [Polynomial.from_list(n, c) for c in data["components"]]
        zeros = [(np.asarray(z["point"], float), int(z.get("mult", 1))) for z in data.get("zeros", [])]
        return cls(n, comps, zeros, data.get("name", ""), float(data.get("norm_radius", 1.0)),
                   data.get("log_scale"), data.get("M"))


def log_norm(F: HolomorphicMapSample, z):
    """0.5 * log(sum |f_i(z)|^2) after normalisation; -inf at common zeros."""
    v = F.log_norm(z)
    return float(v[0]) if len(v) == 1 else v


def inf_on_sphere(f, center, radius, count=8192, seed=0, n_starts=6) -> float:
    """Infimum of f over the sphere |z - center| = radius (sample + Nelder-Mead)."""
    center = np.asarray(center, float)
    dirs = sphere_directions(center.size, count, seed)
    vals = f(center + radius * dirs)
    best = float(vals.min())

    def obj(y):
        nrm = np.linalg.norm(y)
        return 1e300 if nrm == 0 else float(f((center + radius * y / nrm)[None, :])[0])

    for i in np.argsort(vals)[:n_starts]:
        res = minimize(obj, dirs[i], method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def _poly(n, *terms):
    return Polynomial(n, tuple(terms))


def gallery(name: str, **params) -> HolomorphicMapSample:
    """Built-in maps of C^2 with closed-form zeros."""
    e1, e2, e0 = (1, 0), (0, 1), (0, 0)
    if name == "identity":
        comps = [_poly(2, (e1, 1)), _poly(2, (e2, 1))]
        zeros = [((0, 0, 0, 0), 1)]
    elif name == "quadratic":
        c = params.get("c", 0.01)
        s = math.sqrt(c)
        comps = [_poly(2, ((2, 0), 1), (e0, -c)), _poly(2, (e2, 1))]
        zeros = [((s, 0, 0, 0), 1), ((-s, 0, 0, 0), 1)]
    elif name == "rotated":
        comps = [_poly(2, (e1, 1), (e2, 1)), _poly(2, (e1, 1), (e2, -1))]
        zeros = [((0, 0, 0, 0), 1)]
    elif name == "double_quadratic":
        c1, c2 = params.get("c1", 0.01), params.get("c2", 0.04)
        s1, s2 = math.sqrt(c1), math.sqrt(c2)
        comps = [_poly(2, ((2, 0), 1), (e0, -c1)), _poly(2, ((0, 2), 1), (e0, -c2))]
        zeros = [((a, 0, b, 0), 1) for a in (s1, -s1) for b in (s2, -s2)]
    elif name == "cusp":
        comps = [_poly(2, (e1, 1)), _poly(2, ((0, 2), 1))]
        zeros = [((0, 0, 0, 0), 2)]
    else:
        raise ValueError(f"unknown map {name!r}; choose from {GALLERY}")
    return HolomorphicMapSample(2, comps, [(np.array(z, float), m) for z, m in zeros], name,
                                seed=params.get("seed", 0))


GALLERY = ("identity", "quadratic", "rotated", "double_quadratic", "cusp")
ELLIPTIC_GALLERY = ("identity", "quadratic", "rotated", "double_quadratic")


def half_ball_sample(n: int, count: int = 100_000, seed: int = 0) -> BallSample:
    return BallSample(tuple([0.0] * (2 * n)), 0.5, count, seed)


# ------------------------------------------------------------------ envelope

@dataclass
class EnvelopeReport:
    grid_size: int
    violations: int
    max_excess: float
    M: float
    k: int
    grid: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"grid_size": self.grid_size, "violations": self.violations,
                "max_excess": self.max_excess, "M": self.M, "k": self.k,
                "success": self.success, "grid": self.grid}


def _points_of(grid_spec):
    if isinstance(grid_spec, BallSample):
        return grid_spec.points(), grid_spec.describe()
    pts = np.asarray(grid_spec, float)
    return pts, {"kind": "points", "count": len(pts)}


def envelope_check(F: HolomorphicMapSample, grid_spec) -> EnvelopeReport:
    """-M + sum mult * log|z - xi| <= log|F(z)| at every sample point of B_{1/2}."""
    pts, desc = _points_of(grid_spec)
    pts = pts[np.linalg.norm(pts, axis=1) < 0.5]
    lower = np.full(len(pts), -F.M)
    with np.errstate(divide="ignore"):
        for z, m in F.zeros_in_half_ball():
            lower += m * np.log(np.linalg.norm(pts - z, axis=1))
    u = F.u(pts)
    excess = lower - u
    finite = np.isfinite(excess)
    bad = int(np.sum(excess[finite] > BOUND_TOL))
    return EnvelopeReport(len(pts), bad, float(excess[finite].max()) if finite.any() else -math.inf,
                          float(F.M), F.k, desc)


# ------------------------------------------------------------------ Cartan

def multidim_cartan(F: HolomorphicMapSample, H: float, d: float, grid_spec,
                    mass: float | None = None) -> CartanReport:
    """Exceptional balls for the zero-counting measure and the bound
    -M + k log(H/e) (or p log(H/e) with p = mass >= k) off them in B_{1/2}."""
    zeros = F.zeros_in_half_ball()
    if zeros:
        mu = DiscreteMeasure(np.array([z for z, _ in zeros]), np.array([m for _, m in zeros], float))
    else:
        mu = DiscreteMeasure(np.zeros((0, 2 * F.n)), np.zeros(0))
    k = mu.total if mass is None else float(mass)
    cover = cartan_cover(mu, H, d, mass=k)
    bound = -F.M + k * math.log(H / math.e)
    rep = verify_cartan(F.u, cover, bound, _points_of(grid_spec)[0],
                        restrict=lambda p: np.linalg.norm(p, axis=1) < 0.5)
    rep.k = k
    rep.H = H
    rep.extra.update({"map": F.name, "M": F.M, "zero_count": F.k})
    if isinstance(grid_spec, BallSample):
        rep.grid = grid_spec.describe()
    return rep


# ------------------------------------------------------------------ ellipticity

@dataclass
class EllipticityProbeResult:
    zero: list
    exponent_per_direction: list  # (direction, exponent, coefficient, r_squared)
    verdict: str
    spread: float

    def to_dict(self) -> dict:
        return {"zero": self.zero, "verdict": self.verdict, "spread": self.spread,
                "exponent_per_direction": [
                    {"direction": list(map(float, dvec)), "exponent": e, "coefficient": c,
                     "r_squared": r2}
                    for dvec, e, c, r2 in self.exponent_per_direction]}


def ellipticity_probe(F: HolomorphicMapSample, zero, n_directions: int = 64, t_grid=None,
                      seed: int = 0, spread_tol: float = 0.05, coef_floor: float = 1e-8,
                      r2_floor: float = 0.999) -> EllipticityProbeResult:
    """Fit log h(x + t w) ~ e log t + log c, h = |F|^2, along many directions w.

    Directions are the 2n real coordinate axes plus scrambled-Sobol points
    on the unit sphere.  Elliptic: all fits good, exponents within
    ``spread_tol`` of each other and every coefficient above ``coef_floor``.
    """
    z0 = np.asarray(as_points(np.asarray(zero)) if np.iscomplexobj(np.asarray(zero))
                    else np.asarray(zero, float)).ravel()
    known = [z for z, _ in F.known_zeros]
    if not any(np.linalg.norm(z - z0) < 1e-12 for z in known):
        raise PreconditionError("the probe point is not a listed zero")
    ts = np.geomspace(1e-5, 1e-3, 12) if t_grid is None else np.asarray(t_grid, float)
    others = [np.linalg.norm(z - z0) for z in known if np.linalg.norm(z - z0) >= 1e-12]
    if others and ts.max() >= 0.5 * min(others):
        raise IsolationError("probe radii reach half the distance to another zero")
    dim = 2 * F.n
    dirs = np.concatenate([np.eye(dim), sphere_directions(dim, n_directions, seed)])
    raw = LogNormMap(F.components)
    logt = np.log(ts)
    rows, exps, coefs, r2s = [], [], [], []
    for w in dirs:
        h = raw.sq_norm(z0 + ts[:, None] * w)
        with np.errstate(divide="ignore"):
            logh = np.log(h)
        if not np.all(np.isfinite(logh)):
            rows.append((w, math.inf, 0.0, 0.0))
            exps.append(math.inf)
            coefs.append(0.0)
            r2s.append(0.0)
            continue
        slope, icpt = np.polyfit(logt, logh, 1)
        fit = slope * logt + icpt
        ss_res = float(np.sum((logh - fit) ** 2))
        ss_tot = float(np.sum((logh - logh.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        rows.append((w, float(slope), float(math.exp(icpt)), r2))
        exps.append(float(slope))
        coefs.append(float(math.exp(icpt)))
        r2s.append(r2)
    exps_a = np.array(exps)
    spread = float(exps_a.max() - exps_a.min()) if np.all(np.isfinite(exps_a)) else math.inf
    if min(coefs) < coef_floor or spread > spread_tol:
        verdict = "non-elliptic"
    elif min(r2s) < r2_floor:
        verdict = "inconclusive"
    else:
        verdict = "elliptic"
    return EllipticityProbeResult(z0.tolist(), rows, verdict, spread)


# ------------------------------------------------------------------ Remez gap in C^n

def mcol1_log_term(t: float, a: float, r: float, d: float, eps: float) -> float:
    return math.log(16.0 * math.e * r * t * a ** (1.0 / d) / (d * eps) ** (1.0 / d))


def mcol1_gap(F: HolomorphicMapSample, set_: DSet, x, t: float, r: float, omega: DSet,
              resolution: int = 4096, tag: str = "",
              sup_ball: float | None = None) -> RemezExperiment:
    """sup_{B(x,t)} log|F| - sup_omega log|F| next to log(16 e r t a^{1/d} / (d eps)^{1/d}).

    The regressor is k times the log term, so the fitted constant plays the
    role of a multiplicative c.
    """
    xc = np.asarray(x, float).ravel()
    if xc.size != 2 * F.n or set_.points.shape[1] != 2 * F.n:
        raise ValueError("x and the set must live in C^n")
    if not r > 0.5 or t <= 0:
        raise ValueError("need r > 1/2 and t > 0")
    if np.linalg.norm(xc) + 4 * r * r * t > 0.5 + 1e-12:
        raise PreconditionError("B(x, 4 r^2 t) must lie inside B_{1/2}")
    eps = omega.total_mass if len(omega) else 0.0
    if not eps > 0:
        raise DegenerateInputError("omega carries no mass")
    if np.any(np.linalg.norm(omega.points - xc, axis=1) >= t):
        raise PreconditionError("omega must lie inside B(x, t)")
    a, d = _certified_a(set_), set_.dimension_d
    u = F.u
    if sup_ball is None:
        sup_ball = sup_on_ball(u, xc, t, resolution, seed=F.seed).value
    sup_omega = float(np.max(u(omega.points)))
    if sup_omega == -np.inf:
        raise ResolutionError("log|F| is -inf on every sample of omega")
    return RemezExperiment(xc.tolist(), t, r, None, eps, sup_ball - sup_omega,
                           mcol1_log_term(t, a, r, d, eps), 0.0, 0.0, d, a, float(F.k),
                           sup_ball, sup_omega, tag)
