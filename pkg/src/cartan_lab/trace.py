"""Empirical checks of trace inequalities for subharmonic functions on
sampled d-sets: the Remez-type gap, BMO, reverse Hoelder, distribution
decay, Bernstein-Walsh growth and the regularity-necessity experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DegenerateFunctionError, DegenerateInputError, PreconditionError,
                     ResolutionError)
from .functions import EvaluableFunction, LogAbsPolynomial, Scaled, normalize_m1m2, sup_on_ball
from .geometry import DSet, certify, _representative_centers
from .sampling import as_points

CLAMP = -1e6
SUP_RESOLUTION = 2048


def _ball_mask(set_: DSet, x, t: float) -> np.ndarray:
    """Sample points in the open ball D(x, t)."""
    c = as_points(x)[0]
    d2 = ((set_.points - c) ** 2).sum(axis=1)
    return d2 < t * t


def _certified_a(set_: DSet) -> float:
    return set_.reg_a if set_.reg_a is not None else certify(set_).reg_a


# ------------------------------------------------------------------ Remez gap

@dataclass
class RemezExperiment:
    x: list
    t: float
    r: float
    omega_radius: float | None
    epsilon: float
    lhs: float
    log_term: float
    M1: float
    M2: float
    d: float
    a: float
    scale: float = 1.0  # multiplies (M1 - M2) in the fitted design; k for the map version
    sup_ball: float = 0.0
    sup_omega: float = 0.0
    tag: str = ""

    @property
    def design(self) -> float:
        """The regressor X in lhs ~ c * X."""
        return self.scale * self.log_term

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "x", "t", "r", "omega_radius", "epsilon", "lhs", "log_term", "M1", "M2", "d", "a",
            "scale", "sup_ball", "sup_omega", "tag")}

    @classmethod
    def from_dict(cls, data: dict) -> "RemezExperiment":
        return cls(**data)


def remez_log_term(t: float, a: float, r: float, d: float, eps: float) -> float:
    return math.log(4.0 * math.e * t * a ** (1.0 / d) / (r * (d * eps) ** (1.0 / d)))


def remez_gap(f: EvaluableFunction, set_: DSet, x, t: float, r: float, omega: DSet,
              m1m2: tuple[float, float] | None = None, omega_radius: float | None = None,
              tag: str = "", sup_ball: float | None = None) -> RemezExperiment:
    """Gap sup_{D(x,t)} f - sup_omega f next to the logarithmic term of the bound.

    ``omega`` is a sub-cloud of ``set_`` inside D(x, t); its weight plays
    the role of the measure of omega.  ``a`` is the certified upper
    regularity constant of ``set_``.  A precomputed ``sup_ball`` skips the
    ball maximisation when many omegas share one ball.
    """
    xc = as_points(x)[0]
    if not 0.0 < r < 1.0 or t <= 0:
        raise ValueError("need 0 < r < 1 and t > 0")
    if np.linalg.norm(xc) + t / r > r + 1e-12:
        raise PreconditionError("D(x, t/r) must lie inside D_r")
    eps = omega.total_mass if len(omega) else 0.0
    if not eps > 0:
        raise DegenerateInputError("omega carries no mass")
    if np.any(np.linalg.norm(omega.points - xc, axis=1) >= t):
        raise PreconditionError("omega must lie inside D(x, t)")
    M1, M2 = m1m2 if m1m2 is not None else normalize_m1m2(f, r)
    a, d = _certified_a(set_), set_.dimension_d
    if sup_ball is None:
        sup_ball = sup_on_ball(f, xc, t, SUP_RESOLUTION).value
    sup_omega = float(np.max(f(omega.points)))
    if sup_omega == -np.inf:
        raise ResolutionError("f is -inf on every sample of omega; omega is below the resolution")
    return RemezExperiment(xc.tolist(), t, r, omega_radius, eps, sup_ball - sup_omega,
                           remez_log_term(t, a, r, d, eps), M1, M2, d, a, M1 - M2,
                           sup_ball, sup_omega, tag)


@dataclass
class ConstantFit:
    c_hat: float        # least-squares slope through the origin
    c_sup: float        # smallest c making lhs <= c * X hold on every experiment
    residuals: list
    n_used: int

    def to_dict(self) -> dict:
        return {"c_hat": self.c_hat, "c_sup": self.c_sup, "residuals": self.residuals,
                "n_used": self.n_used}


def fit_constant_c(experiments: Sequence[RemezExperiment], min_count: int = 10,
                   min_eps_ratio: float = 8.0) -> ConstantFit:
    """Fit lhs ~ c * scale * log_term over experiments with lhs > 0."""
    if len(experiments) < min_count:
        raise PreconditionError(f"need at least {min_count} experiments, got {len(experiments)}")
    eps = np.array([e.epsilon for e in experiments])
    if eps.max() < min_eps_ratio * eps.min():
        raise PreconditionError(f"epsilon must span a factor >= {min_eps_ratio}")
    X = np.array([e.design for e in experiments])
    y = np.array([e.lhs for e in experiments])
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("non-finite gap or log term; check omega against the resolution")
    if np.ptp(np.array([e.log_term for e in experiments])) == 0:
        raise DegenerateInputError("all log terms are equal; the fit is degenerate")
    use = y > 0
    if not use.any():
        return ConstantFit(0.0, 0.0, [0.0] * len(y), 0)
    if np.any(X[use] <= 0):
        raise DegenerateInputError("positive gap with a nonpositive log term")
    c_hat = float(X[use] @ y[use] / (X[use] @ X[use]))
    c_sup = float(np.max(y[use] / X[use]))
    return ConstantFit(c_hat, c_sup, (y - c_hat * X).tolist(), int(use.sum()))


def remez_holds(exp: RemezExperiment, c: float, tol: float = 1e-9) -> bool:
    return exp.lhs <= c * exp.design + tol


# ------------------------------------------------------------------ BMO

@dataclass
class BmoReport:
    records: list
    bmo_norm: float
    clamped: bool
    argmax: int

    def to_dict(self) -> dict:
        return {"records": self.records, "bmo_norm": self.bmo_norm, "clamped": self.clamped,
                "argmax": self.argmax}


def bmo_norm(f: EvaluableFunction, set_: DSet, ball_centers, radii) -> BmoReport:
    """Sup of mean oscillations over the balls D(c, rho), c in centers, rho in radii.

    Integrals are weighted sums over the sample cloud; -inf values are
    replaced by a clamp of -1e6 and flagged.
    """
    centers = as_points(ball_centers) if np.iscomplexobj(np.asarray(ball_centers)) \
        else np.atleast_2d(np.asarray(ball_centers, dtype=float))
    radii = sorted(float(r) for r in radii)
    if not len(centers) or not radii or radii[0] <= 0:
        raise ValueError("need at least one center and positive radii")
    raw = f(set_.points)
    if np.all(raw == -np.inf):
        raise DegenerateFunctionError("f is -inf on the whole set")
    clamped = bool(np.any(raw == -np.inf))
    v = np.where(raw == -np.inf, CLAMP, raw) if clamped else raw
    w = set_.weights
    records, best, arg = [], -1.0, -1
    for c in centers:
        dist = np.sqrt(((set_.points - c) ** 2).sum(axis=1))
        near = dist < radii[-1]
        dn, vn, wn, rn = dist[near], v[near], w[near], raw[near]
        for rho in radii:
            m = dn < rho
            mass = float(wn[m].sum())
            if mass <= 0:
                raise PreconditionError(f"ball D({c.tolist()}, {rho}) misses the set")
            if np.all(rn[m] == -np.inf):
                raise DegenerateFunctionError("f is -inf on a whole tested ball")
            vb, wb = vn[m], wn[m]
            # anchored at a sample value so that constants give an exact mean
            mean = float(vb[0] + wb @ (vb - vb[0]) / mass)
            osc = float(wb @ np.abs(vb - mean) / mass)
            records.append({"center": c.tolist(), "radius": rho, "mass": mass,
                            "mean": mean, "oscillation": osc})
            if osc > best:
                best, arg = osc, len(records) - 1
    return BmoReport(records, max(best, 0.0), clamped, arg)


def dyadic_ball_family(set_: DSet, max_centers: int = 64, finest: float | None = None,
                       coarsest: float | None = None) -> tuple[np.ndarray, list]:
    """Sample-point centres and dyadic radii from the diameter down to the resolution."""
    centers = _representative_centers(set_, max_centers)
    hi = coarsest if coarsest is not None else set_.diameter
    lo = finest if finest is not None else max(set_.resolution, hi * 2.0**-30)
    radii, rho = [], hi
    while rho >= lo * (1 - 1e-12):
        radii.append(rho)
        rho /= 2
    return centers, radii


# ------------------------------------------------------------------ reverse Hoelder

@dataclass
class ReverseHolderReport:
    x: list
    t: float
    mass: float
    records: list
    sup_ratio: dict = field(default_factory=dict)

    def ratio(self, p) -> float:
        return next(rec["ratio"] for rec in self.records if rec["p"] == p)

    def to_dict(self) -> dict:
        return {"x": self.x, "t": self.t, "mass": self.mass, "records": self.records,
                "sup_ratio": {str(k): v for k, v in self.sup_ratio.items()}}


def reverse_holder(f: EvaluableFunction, set_: DSet, x, t: float, p_list) -> ReverseHolderReport:
    """p-means of e^f over K n D(x,t) against the 1-mean, computed in log space.

    With m = max f and v = f - m, the log ratio is A_p / p - B where
    A_p = log mean e^{p v} and B = log mean e^{v}; at p = 1 the two terms are
    computed identically so the ratio is exactly 1.  ``p = inf`` uses the
    sample maximum.  e^{-inf} counts as 0.
    """
    mask = _ball_mask(set_, x, t)
    if not mask.any():
        raise DegenerateInputError("the ball misses the set")
    vals, w = f(set_.points[mask]), set_.weights[mask]
    mass = float(w.sum())
    finite = np.isfinite(vals)
    if not finite.any():
        raise DegenerateFunctionError("f is -inf on the whole ball")
    m = float(vals[finite].max())
    v = vals - m

    def log_mean_exp(scale):
        with np.errstate(under="ignore"):
            return math.log(float(w @ np.exp(scale * v)) / mass)

    B = log_mean_exp(1.0)
    records = []
    for p in p_list:
        p = float(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        log_lhs = 0.0 if math.isinf(p) else log_mean_exp(p) / p
        records.append({"p": p, "lhs": math.exp(m + log_lhs), "rhs_base": math.exp(m + B),
                        "ratio": math.exp(log_lhs - B)})
    sup_ratio = {rec["p"]: rec["ratio"] for rec in records}
    return ReverseHolderReport(as_points(x)[0].tolist(), t, mass, records, sup_ratio)


def reverse_holder_bound(c: float, M1: float, M2: float, a: float, b: float, r: float,
                         d: float) -> float:
    """Local constant for sup e^f against the mean of e^f."""
    s = c * (M1 - M2) / d
    return (1.0 + s) * ((4.0 * math.e) ** d * a / (r**d * d * b)) ** s


# ------------------------------------------------------------------ distribution

@dataclass
class DistributionReport:
    lambda_grid: list
    D_values: list
    bound_curve: list
    fitted_slope: float | None
    bound_slope: float
    mass: float
    mean_direct: float
    mean_layer_cake: float
    layer_cake_tolerance: float
    sup_ball: float

    @property
    def nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.D_values, self.D_values[1:]))

    @property
    def layer_cake_ok(self) -> bool:
        return abs(self.mean_direct - self.mean_layer_cake) <= self.layer_cake_tolerance

    @property
    def bound_holds(self) -> bool:
        return all(D <= B * (1 + 1e-12) for D, B in zip(self.D_values, self.bound_curve))

    def to_dict(self) -> dict:
        return {"lambda_grid": self.lambda_grid, "D_values": self.D_values,
                "bound_curve": self.bound_curve, "fitted_slope": self.fitted_slope,
                "bound_slope": self.bound_slope, "mass": self.mass,
                "mean_direct": self.mean_direct, "mean_layer_cake": self.mean_layer_cake,
                "layer_cake_tolerance": self.layer_cake_tolerance,
                "nonincreasing": self.nonincreasing, "layer_cake_ok": self.layer_cake_ok,
                "bound_holds": self.bound_holds, "sup_ball": self.sup_ball}


def distribution_bound(lam, t, r, a, d, M1, M2, c):
    lam = np.asarray(lam, dtype=float)
    return (4.0 * math.e * t) ** d * a / (r**d * d) * np.exp(-lam * d / (c * (M1 - M2)))


def distribution_check(f: EvaluableFunction, set_: DSet, x, t: float, lambda_grid,
                       r: float, M1: float, M2: float, c_hat: float, a: float | None = None,
                       d: float | None = None) -> DistributionReport:
    """Distribution function of f' = sup_{D(x,t)} f - f on K n D(x,t).

    The slope is a least-squares fit of log D against lambda over the
    decaying range: grid points with 0 < D below the low-lambda plateau
    (all of D > 0 when that leaves fewer than two points).  The layer-cake comparison uses the trapezoid rule
    on the grid; its tolerance is the monotone-trapezoid error
    h_max * (D(first) - D(last)) / 2 plus the exact tail beyond the grid,
    normalised by the ball mass.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.ndim != 1 or len(lam) < 2 or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be strictly increasing with >= 2 points")
    mask = _ball_mask(set_, x, t)
    if not mask.any():
        raise DegenerateInputError("the ball misses the set")
    a = _certified_a(set_) if a is None else a
    d = set_.dimension_d if d is None else d
    w = set_.weights[mask]
    mass = float(w.sum())
    sup_ball = sup_on_ball(f, as_points(x)[0], t, SUP_RESOLUTION).value
    fp = sup_ball - f(set_.points[mask])
    fp = np.where(np.isfinite(fp), fp, -CLAMP)
    order = np.argsort(fp)
    fs, ws = fp[order], w[order]
    tail = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
    D = tail[np.searchsorted(fs, lam, side="left")]
    bound = distribution_bound(lam, t, r, a, d, M1, M2, c_hat)
    pos = (D > 0) & (D < D.max())
    if pos.sum() < 2:
        pos = D > 0
    slope = float(np.polyfit(lam[pos], np.log(D[pos]), 1)[0]) if pos.sum() >= 2 else None
    # layer cake on [max(0, lam0), inf)
    start = max(lam[0], 0.0)
    sel = lam >= start
    grid_l, grid_D = lam[sel], D[sel]
    trap = float(np.sum(0.5 * (grid_D[1:] + grid_D[:-1]) * np.diff(grid_l))) if len(grid_l) > 1 else 0.0
    beyond = float(ws @ np.clip(fs - grid_l[-1], 0, None)) if len(grid_l) else 0.0
    head = float(ws @ np.clip(np.minimum(fs, start), 0, None))  # part below the first grid point
    mean_lc = (head + trap + beyond) / mass
    mean_direct = float(ws @ np.clip(fs, 0, None)) / mass
    h = float(np.max(np.diff(grid_l))) if len(grid_l) > 1 else 0.0
    tol = (0.5 * h * (grid_D[0] - grid_D[-1]) if len(grid_l) > 1 else 0.0) / mass + 1e-12
    return DistributionReport(lam.tolist(), D.tolist(), bound.tolist(), slope,
                              -d / (c_hat * (M1 - M2)), mass, mean_direct, mean_lc, tol, sup_ball)


# ------------------------------------------------------------------ Bernstein-Walsh

@dataclass
class BernsteinWalshResult:
    holds: bool
    lhs: float
    rhs: float

    def __bool__(self) -> bool:
        return self.holds


def bernstein_walsh_check(roots, degree_normalize: bool, x, t: float, q: float,
                          resolution: int = 1024, log_leading: float = 0.0) -> BernsteinWalshResult:
    """sup_{D(x,qt)} f <= log q + sup_{D(x,t)} f for f = log|p| (optionally / deg)."""
    roots = np.asarray(roots)
    if roots.size == 0:
        raise DegenerateInputError("polynomial has no roots")
    if q < 1 or t < 0:
        raise ValueError("need q >= 1 and t >= 0")
    poly = LogAbsPolynomial(roots, log_leading)
    f = Scaled(poly, 1.0 / poly.degree) if degree_normalize else poly
    xc = as_points(x)[0]
    if t == 0 or q == 1:
        v = sup_on_ball(f, xc, t, resolution).value if t > 0 else float(f(xc[None, :])[0])
        return BernsteinWalshResult(True, v, math.log(q) + v)
    small = sup_on_ball(f, xc, t, resolution).value
    big = sup_on_ball(f, xc, q * t, resolution).value
    rhs = math.log(q) + small
    return BernsteinWalshResult(bool(big <= rhs + 1e-9), big, rhs)


# ------------------------------------------------------------------ necessity

@dataclass
class SharpnessReport:
    d: float
    scales: list
    sup_ratio: list
    growth: float
    L_values: list
    C: float
    n_centers: int

    @property
    def divergent(self) -> bool:
        return self.growth > 10.0

    def to_dict(self) -> dict:
        return {"d": self.d, "scales": self.scales, "sup_ratio": self.sup_ratio,
                "growth": self.growth, "divergent": self.divergent, "L_values": self.L_values,
                "C": self.C, "n_centers": self.n_centers}


def sharpness_experiment(set_: DSet, d: float, scales: Sequence[float], C: float = 1.0,
                         max_centers: int = 4096) -> SharpnessReport:
    """Ratios eps_t / t^d with eps_t = mu(K n D(x,t)), and the gap functional
    L(x,t) = log t - log max_{y in K n D(x,t)} |y - x| - C log(t / eps_t^{1/d})
    for f_x = log|z - x|.  ``growth`` compares the sup ratio at the finest
    scale with the coarsest one."""
    if len(set_) < 2 or set_.diameter <= 0:
        raise ResolutionError("a single point resolves no scale")
    ts = sorted((float(t) for t in scales), reverse=True)
    for t in ts:
        if t < set_.resolution * (1 - 1e-12):
            raise ResolutionError(f"scale {t} is finer than the sampling resolution")
    centers = _representative_centers(set_, max_centers)
    sup_ratio = np.zeros(len(ts))
    L_vals = np.full(len(ts), -np.inf)
    for c in centers:
        dist = np.sqrt(((set_.points - c) ** 2).sum(axis=1))
        for i, t in enumerate(ts):
            m = dist < t
            eps = float(set_.weights[m].sum())
            sup_ratio[i] = max(sup_ratio[i], eps / t**d)
            far = float(dist[m].max())
            if far > 0:
                L = math.log(t) - math.log(far) - C * math.log(t / eps ** (1.0 / d))
                L_vals[i] = max(L_vals[i], L)
    sup_ratio, L_vals = sup_ratio.tolist(), L_vals.tolist()
    growth = sup_ratio[-1] / sup_ratio[0] if sup_ratio[0] > 0 else math.inf
    return SharpnessReport(d, ts, sup_ratio, growth, L_vals, C, len(centers))
