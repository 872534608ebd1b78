"""Shared fixtures and the fit-then-validate protocol for fitted constants.

A calibration batch of gap experiments fixes the constant; a validation
batch built from disjoint centres then checks stability of the least-squares
fit and the inequality with the calibration envelope constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CartanLabError
from .functions import EvaluableFunction, normalize_m1m2, sup_on_ball
from .geometry import DSet, attractor_point, ball_restrict, cantor_maps, certify, \
    diamond_dust_maps, embed, generate_ifs_set, triangle_dust_maps
from .multidim import HolomorphicMapSample, mcol1_gap, mcol1_log_term
from .trace import SUP_RESOLUTION, RemezExperiment, fit_constant_c, remez_gap, remez_holds, \
    remez_log_term

# A long binary/ternary word: its attractor point is off every sample cloud
# of depth < len(DEEP_WORD).
DEEP_WORD = (0, 1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1)
REMEZ_R = 2.0 / 3.0


def cantor_fixture(depth: int = 10, lo: float = -0.3, hi: float = 0.3) -> DSet:
    return certify(generate_ifs_set(cantor_maps(lo, hi), depth))


def cantor_deep_point(lo: float = -0.3, hi: float = 0.3) -> np.ndarray:
    return attractor_point(cantor_maps(lo, hi), DEEP_WORD, base=1)


def triangle_dust(depth: int) -> DSet:
    return generate_ifs_set(triangle_dust_maps(), depth)


def triangle_deep_point() -> np.ndarray:
    word = [(2 * i + j) % 3 for i, j in enumerate(DEEP_WORD)]
    return attractor_point(triangle_dust_maps(), word, base=1)


def diamond_fixture(depth: int = 6, n: int = 2) -> DSet:
    return certify(embed(generate_ifs_set(diamond_dust_maps(), depth), n))


def split_pool(indices: np.ndarray, part: int) -> np.ndarray:
    """Alternate entries: part 0 calibrates, part 1 validates."""
    return np.asarray(indices)[part::2]


@dataclass
class GapModel:
    """One gap experiment family: the function, the set, a single-experiment
    builder ``experiment(x, t, omega, tag, sup_ball)``, the ball supremum
    ``sup(x, t)``, the ``log_term(t, a, r, d, eps)`` of the bound and the
    points where f is -inf (the gap is largest next to them)."""
    f: EvaluableFunction
    set_: DSet
    experiment: Callable[..., RemezExperiment]
    sup: Callable[[np.ndarray, float], float]
    log_term: Callable[[float, float, float, float, float], float]
    hotspots: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))


def _hotspots(points, set_: DSet) -> np.ndarray:
    if points is None or not len(points):
        return np.zeros((0, set_.points.shape[1]))
    return np.asarray(points, float).reshape(len(points), -1)


def remez_model(f: EvaluableFunction, set_: DSet, r: float = REMEZ_R,
                m1m2: tuple[float, float] | None = None) -> GapModel:
    m1m2 = m1m2 if m1m2 is not None else normalize_m1m2(f, r)
    return GapModel(
        f, set_,
        lambda x, t, omega, tag, sb: remez_gap(f, set_, x, t, r, omega, m1m2, tag=tag,
                                               sup_ball=sb),
        lambda x, t: sup_on_ball(f, x, t, SUP_RESOLUTION).value,
        remez_log_term, _hotspots(f.singularities(), set_))


# Two Nelder-Mead starts at xatol 1e-7 match the 4-start 1e-11 default to ~1e-15
# on the diamond fixture at a quarter of the cost.
MDIM_SUP_REFINE = {"n_starts": 2, "xatol": 1e-7}


def mcol1_model(F: HolomorphicMapSample, set_: DSet, r: float = 0.6,
                resolution: int = 1024) -> GapModel:
    return GapModel(
        F.u, set_,
        lambda x, t, omega, tag, sb: mcol1_gap(F, set_, x, t, r, omega, resolution, tag=tag,
                                               sup_ball=sb),
        lambda x, t: sup_on_ball(F.u, x, t, resolution, seed=F.seed, **MDIM_SUP_REFINE).value,
        mcol1_log_term, _hotspots([z for z, _ in F.known_zeros], set_))


def _sub_ball_omega(set_: DSet, x: np.ndarray, t: float, rng: np.random.Generator,
                    shrink: float, max_power: int, min_atoms: int) -> DSet | None:
    """K n D(x', t shrink^-j) inside D(x, t); None when it holds < ``min_atoms`` atoms."""
    rho = t * shrink ** -float(rng.integers(1, max_power + 1))
    inner = set_.points[np.linalg.norm(set_.points - x, axis=1) < t - rho]
    if not len(inner):
        return None
    omega, _ = ball_restrict(set_, inner[rng.integers(len(inner))], rho, closed=False)
    return omega if len(omega) >= min_atoms else None


def omega_sweep(model: GapModel, pool: np.ndarray, count: int, rng: np.random.Generator,
                t_values: Sequence[float] = (0.05, 0.1, 0.2), shrink: float = 3.0,
                max_power: int = 6, min_atoms: int = 1, max_tries: int = 10_000) -> list:
    """Experiments with omega = K n D(x', t shrink^-j) inside D(x, t), x from ``pool``."""
    set_ = model.set_
    out, tries = [], 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise CartanLabError(f"only {len(out)} admissible experiments after {max_tries} tries")
        x = set_.points[rng.choice(pool)]
        t = float(rng.choice(list(t_values)))
        omega = _sub_ball_omega(set_, x, t, rng, shrink, max_power, min_atoms)
        if omega is None:
            continue
        try:
            out.append(model.experiment(x, t, omega, "ball", None))
        except CartanLabError:
            continue
    return out


@dataclass
class SuperlevelLadder:
    """Distinct superlevel sets {y in K n D(x,t) : sup f - f(y) >= lam}.

    Atoms in the ball sorted by f ascending; the set at level lam is a prefix
    of that order, and ``levels[k]`` is the largest lam whose set is the
    first k + 1 atoms.  For its mass, a prefix has the smallest sup of f.
    """
    sup_ball: float
    order: np.ndarray
    values: np.ndarray
    levels: np.ndarray

    def prefix(self, set_: DSet, k: int) -> DSet:
        keep = self.order[:k + 1]
        return DSet(set_.points[keep], set_.weights[keep], set_.dimension_d,
                    set_.diameter, set_.depth, set_.resolution, set_.reg_a, set_.reg_b)

    def at_level(self, lam: float) -> int | None:
        """Index of the prefix selected by level ``lam`` (None when empty)."""
        k = int(np.searchsorted(-self.levels, -lam, side="right")) - 1
        return k if k >= 0 else None

    def resolvable_top(self, min_atoms: int) -> float | None:
        """Largest level whose set still holds ``min_atoms`` sample atoms."""
        return float(self.levels[min_atoms - 1]) if len(self.levels) >= min_atoms else None

    def distinct(self, lam_lo: float, lam_hi: float) -> list[int]:
        """Every prefix some level in [lam_lo, lam_hi] selects, ties collapsed."""
        lo, hi = self.at_level(lam_hi), self.at_level(lam_lo)
        if hi is None:
            return []
        lv = self.levels
        return [k for k in range(0 if lo is None else lo, hi + 1)
                if k + 1 == len(lv) or lv[k + 1] < lv[k]]


def superlevel_ladder(f: EvaluableFunction, set_: DSet, x, t: float,
                      sup_ball: float) -> SuperlevelLadder:
    idx = np.flatnonzero(np.linalg.norm(set_.points - x, axis=1) < t)
    vals = f(set_.points[idx])
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    return SuperlevelLadder(sup_ball, idx[order], vals, sup_ball - vals)


def ladder_experiments(model: GapModel, x, t: float, ladder: SuperlevelLadder,
                       ks: Sequence[int]) -> list:
    """Experiments for the prefixes ``ks`` built from cumulative masses.

    The largest prefix goes through ``model.experiment`` (which checks the
    preconditions); the others copy it with their own mass and gap.
    """
    ks = [k for k in ks if np.isfinite(ladder.values[k])]
    if not ks:
        return []
    set_ = model.set_
    top = model.experiment(x, t, ladder.prefix(set_, max(ks)), "superlevel", ladder.sup_ball)
    cum = np.cumsum(set_.weights[ladder.order])
    out = []
    for k in ks:
        eps = float(cum[k])
        out.append(replace(top, epsilon=eps, lhs=float(ladder.levels[k]),
                           sup_omega=float(ladder.values[k]),
                           log_term=model.log_term(t, top.a, top.r, top.d, eps)))
    return out


def mixed_batch(model: GapModel, pool: np.ndarray, n_pairs: int, rng: np.random.Generator,
                systematic: bool, t_values: Sequence[float] = (0.05, 0.1, 0.2),
                n_levels: int = 6, n_random: int = 2, min_atoms: int = 8,
                shrink: float = 3.0, max_power: int = 6, max_tries: int = 10_000,
                pairs: Sequence[tuple[int, float]] | None = None) -> list:
    """Experiments around ``n_pairs`` centres drawn from ``pool``.

    Each (x, t) contributes ``n_random`` random sub-ball omegas and
    superlevel omegas with levels in [0, top], where the set at ``top`` is
    the smallest one still holding ``min_atoms`` sample atoms (finer sets
    are below what the sample resolves).  A systematic batch takes every
    distinct superlevel set in that range; otherwise ``n_levels`` levels are
    drawn uniformly.  Explicit ``pairs`` of (sample index, t) replace the
    random draw of centres; inadmissible ones are skipped.
    """
    set_ = model.set_
    fixed = list(pairs) if pairs is not None else None
    out, done, tries = [], 0, 0
    while (done < len(fixed)) if fixed is not None else (done < n_pairs):
        tries += 1
        if fixed is not None:
            i, t = fixed[tries - 1]
            x = set_.points[i]
            done += 1
        else:
            if tries > max_tries:
                raise CartanLabError(f"only {done} admissible (x, t) pairs after {max_tries} tries")
            x = set_.points[rng.choice(pool)]
            t = float(rng.choice(list(t_values)))
        try:
            ladder = superlevel_ladder(model.f, set_, x, t, model.sup(x, t))
            top = ladder.resolvable_top(min_atoms)
            if top is None or not top > 0:
                raise CartanLabError("no resolvable superlevel set")
            if systematic:
                ks = ladder.distinct(0.0, top)
            else:
                ks = {ladder.at_level(lam) for lam in rng.uniform(0.0, top, n_levels)}
                ks = sorted(k for k in ks if k is not None)
            batch = ladder_experiments(model, x, t, ladder, ks)
            for _ in range(n_random):
                omega = _sub_ball_omega(set_, x, t, rng, shrink, max_power, min_atoms)
                if omega is not None:
                    batch.append(model.experiment(x, t, omega, "ball", ladder.sup_ball))
        except CartanLabError:
            continue
        out += batch
        if fixed is None:
            done += 1
    return out


@dataclass
class CalibrationResult:
    c_fit_calibration: float  # least-squares c on the sampled calibration batch
    c_fit_validation: float   # same design, disjoint centres
    c_calibrated: float       # envelope over the whole calibration batch (sweep included)
    stability: float          # |c_fit_cal / c_fit_val - 1|
    validation_pass_rate: float
    n_calibration: int
    n_validation: int
    tolerance: float

    @property
    def stable(self) -> bool:
        return self.c_fit_calibration > 0 and self.stability <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.stable and self.validation_pass_rate == 1.0

    def to_dict(self) -> dict:
        return {"c_fit_calibration": self.c_fit_calibration,
                "c_fit_validation": self.c_fit_validation, "c_calibrated": self.c_calibrated,
                "stability": self.stability, "validation_pass_rate": self.validation_pass_rate,
                "n_calibration": self.n_calibration, "n_validation": self.n_validation,
                "tolerance": self.tolerance, "stable": self.stable, "passed": self.passed}


def envelope(experiments: Sequence[RemezExperiment]) -> float:
    """Smallest c with lhs <= c * design on every experiment (0 if no gap is positive)."""
    ratios = [e.lhs / e.design for e in experiments if e.lhs > 0]
    return float(max(ratios)) if ratios else 0.0


def calibrate_validate(calibration: Sequence[RemezExperiment],
                       validation: Sequence[RemezExperiment],
                       sweep_envelope: float = 0.0, n_sweep: int = 0,
                       tolerance: float = 0.2) -> CalibrationResult:
    """Fit c on ``calibration``, compare with the fit on ``validation`` and check
    the inequality on every validation experiment with the calibration envelope,
    raised to ``sweep_envelope`` when a worst-case sweep was run."""
    cal = fit_constant_c(calibration)
    val = fit_constant_c(validation)
    c_env = max(cal.c_sup, sweep_envelope)
    stability = abs(cal.c_hat / val.c_hat - 1.0) if val.c_hat > 0 else math.inf
    rate = sum(remez_holds(e, c_env) for e in validation) / len(validation)
    return CalibrationResult(cal.c_hat, val.c_hat, c_env, stability, rate,
                             len(calibration) + n_sweep, len(validation), tolerance)


def hotspot_pairs(model: GapModel, pool: np.ndarray, per_hotspot: int,
                  t_values: Sequence[float]) -> list[tuple[int, float]]:
    """(index, t) for the ``per_hotspot`` pool points nearest each hotspot, every t."""
    out = []
    for h in model.hotspots:
        dist = np.linalg.norm(model.set_.points[pool] - h, axis=1)
        out += [(int(i), float(t)) for i in pool[np.argsort(dist, kind="stable")[:per_hotspot]]
                for t in t_values]
    return out


def ascend_envelope(model: GapModel, pool: np.ndarray, experiments: Sequence[RemezExperiment],
                    rng: np.random.Generator, rounds: int = 8, n_top: int = 5,
                    neighbours: int = 8, **batch_kw) -> list:
    """Local search for larger lhs/design ratios among pool centres.

    Starting from the ``n_top`` (centre, t) pairs with the largest ratio in
    ``experiments``, sweep the ``neighbours`` nearest unvisited pool points
    at the same t; stop after ``rounds`` rounds or the first round that does
    not raise the envelope.  Returns the new experiments.
    """
    pts = model.set_.points
    index = {pts[i].tobytes(): int(i) for i in pool}
    best: dict[tuple[int, float], float] = {}
    visited: set[tuple[int, float]] = set()

    def record(exps):
        for e in exps:
            i = index.get(np.asarray(e.x, dtype=float).tobytes())
            if i is None:
                continue
            key = (i, float(e.t))
            visited.add(key)
            if e.lhs > 0:
                best[key] = max(best.get(key, 0.0), e.lhs / e.design)

    record(experiments)
    out = []
    for _ in range(rounds):
        if not best:
            break
        level = max(best.values())
        pairs = []
        for i, t in sorted(best, key=best.get)[-n_top:]:
            dist = np.linalg.norm(pts[pool] - pts[i], axis=1)
            for j in pool[np.argsort(dist, kind="stable")[1:neighbours + 1]]:
                if (int(j), t) not in visited:
                    visited.add((int(j), t))
                    pairs.append((int(j), t))
        if not pairs:
            break
        found = mixed_batch(model, pool, 0, rng, True, pairs=pairs, **batch_kw)
        out += found
        record(found)
        if max(best.values()) <= level:
            break
    return out


def calibration_batch(model: GapModel, seed: int = 0, n_sample: int = 80,
                      n_sweep: int = 100, per_hotspot: int = 4, ascent_rounds: int = 8,
                      **batch_kw) -> tuple[list, list]:
    """Sampled experiments and the exhaustive superlevel sweep, both centred at
    even sample indices.  The sweep visits ``n_sweep`` random centres plus the
    ``per_hotspot`` centres nearest each singularity of f, then climbs to
    neighbouring centres while the envelope grows.  Returns (sample, sweep)."""
    rng = np.random.default_rng([seed, 0])
    pool = split_pool(np.arange(len(model.set_)), 0)
    sample = mixed_batch(model, pool, n_sample, rng, False, **batch_kw)
    sweep = mixed_batch(model, pool, n_sweep, rng, True, **batch_kw)
    t_values = batch_kw.get("t_values", (0.05, 0.1, 0.2))
    sweep += mixed_batch(model, pool, 0, rng, True, pairs=hotspot_pairs(
        model, pool, per_hotspot, t_values), **batch_kw)
    sweep += ascend_envelope(model, pool, sample + sweep, rng, ascent_rounds, **batch_kw)
    return sample, sweep


def validation_batch(model: GapModel, seed: int = 0, n_sample: int = 80, **batch_kw) -> list:
    """Sampled experiments centred at odd sample indices."""
    rng = np.random.default_rng([seed, 1])
    pool = split_pool(np.arange(len(model.set_)), 1)
    return mixed_batch(model, pool, n_sample, rng, False, **batch_kw)


def run_protocol(model: GapModel, seed: int = 0, n_sample: int = 80, n_sweep: int = 100,
                 tolerance: float = 0.2, **batch_kw) -> tuple[CalibrationResult, list, list, list]:
    """Returns (result, calibration sample, sweep, validation)."""
    sample, sweep = calibration_batch(model, seed, n_sample, n_sweep, **batch_kw)
    validation = validation_batch(model, seed, n_sample, **batch_kw)
    result = calibrate_validate(sample, validation, envelope(sweep), len(sweep), tolerance)
    return result, sample, sweep, validation
