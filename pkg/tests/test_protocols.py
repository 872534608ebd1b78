import numpy as np
import pytest

from cartan_lab.functions import LogAbsPolynomial
from cartan_lab.protocols import (REMEZ_R, ascend_envelope, calibrate_validate, calibration_batch,
                                  envelope, hotspot_pairs, ladder_experiments, mixed_batch,
                                  remez_model, run_protocol, split_pool, superlevel_ladder)
from cartan_lab.trace import RemezExperiment, remez_gap

QUAD = LogAbsPolynomial(np.array([0.3 + 0j, -0.3 + 0j]))


@pytest.fixture(scope="module")
def model(cantor10):
    return remez_model(QUAD, cantor10)


def test_split_pool_disjoint():
    idx = np.arange(11)
    a, b = split_pool(idx, 0), split_pool(idx, 1)
    assert set(a).isdisjoint(b) and set(a) | set(b) == set(idx)


class TestLadder:
    def test_prefixes_are_superlevel_sets(self, model, cantor10):
        x = cantor10.points[400]
        t = 0.1
        lad = superlevel_ladder(QUAD, cantor10, x, t, model.sup(x, t))
        inside = np.linalg.norm(cantor10.points - x, axis=1) < t
        fp = lad.sup_ball - QUAD(cantor10.points)
        for lam in np.linspace(0, lad.levels[0], 13)[1:-1]:
            k = lad.at_level(lam)
            want = set(np.flatnonzero(inside & (fp >= lam)))
            assert set(lad.order[:k + 1]) == want

    def test_distinct_collapses_ties(self, model, cantor10):
        x = cantor10.points[10]
        lad = superlevel_ladder(QUAD, cantor10, x, 0.05, model.sup(x, 0.05))
        ks = lad.distinct(0.0, lad.resolvable_top(8))
        levels = [lad.levels[k] for k in ks]
        assert len(set(levels)) == len(levels)

    def test_vectorised_matches_direct(self, model, cantor10):
        x = cantor10.points[600]
        t = 0.1
        lad = superlevel_ladder(QUAD, cantor10, x, t, model.sup(x, t))
        ks = lad.distinct(0.0, lad.resolvable_top(8))[::7]
        fast = ladder_experiments(model, x, t, lad, ks)
        for k, e in zip(ks, fast):
            slow = remez_gap(QUAD, cantor10, x, t, REMEZ_R, lad.prefix(cantor10, k), sup_ball=lad.sup_ball)
            assert e.epsilon == pytest.approx(slow.epsilon, rel=1e-12)
            assert e.lhs == pytest.approx(slow.lhs, abs=1e-12)
            assert e.log_term == pytest.approx(slow.log_term, rel=1e-12)

    def test_prefix_is_worst_for_its_mass(self, model, cantor10):
        # any other subset of the same atom count has a sup of f at least as large
        x = cantor10.points[700]
        t = 0.1
        lad = superlevel_ladder(QUAD, cantor10, x, t, model.sup(x, t))
        rng = np.random.default_rng(0)
        for k in (5, 40, 200):
            pick = rng.choice(lad.order, k + 1, replace=False)
            assert QUAD(cantor10.points[pick]).max() >= lad.values[k]


def _exp(lhs, log_term, eps):
    return RemezExperiment([0.0, 0.0], 0.1, REMEZ_R, None, eps, lhs, log_term, 1.0, 0.0, 1.0, 1.0)


class TestCalibrateValidate:
    def test_synthetic_pass_and_fail(self):
        cal = [_exp(0.5 * (1 + i), 1 + i, 2.0**-i) for i in range(12)]
        val = [_exp(0.45 * (1 + i), 1 + i, 2.0**-i) for i in range(12)]
        res = calibrate_validate(cal, val)
        assert res.stable and res.passed
        assert res.c_calibrated == pytest.approx(0.5)
        val[3] = _exp(0.9 * 4, 4, 2.0**-3)
        res = calibrate_validate(cal, val)
        assert not res.passed

    def test_sweep_raises_envelope(self):
        cal = [_exp(0.5 * (1 + i), 1 + i, 2.0**-i) for i in range(12)]
        res = calibrate_validate(cal, cal, sweep_envelope=0.8, n_sweep=5)
        assert res.c_calibrated == 0.8 and res.n_calibration == 17

    def test_envelope(self):
        assert envelope([_exp(0.0, 1, 1), _exp(1.0, 2, 1), _exp(3.0, 4, 1)]) == 0.75
        assert envelope([_exp(0.0, 1, 1)]) == 0.0


class TestBatches:
    def test_hotspots_near_roots(self, model, cantor10):
        pool = split_pool(np.arange(len(cantor10)), 0)
        pairs = hotspot_pairs(model, pool, 2, (0.1,))
        pts = cantor10.points[[i for i, _ in pairs]]
        assert len(pairs) == 4
        assert np.abs(np.abs(pts[:, 0]) - 0.3).max() < 1e-3

    def test_batch_respects_pool(self, model, cantor10):
        pool = split_pool(np.arange(len(cantor10)), 1)
        exps = mixed_batch(model, pool, 5, np.random.default_rng(0), False)
        allowed = {tuple(cantor10.points[i]) for i in pool}
        assert all(tuple(e.x) in allowed for e in exps)
        assert all(e.lhs >= 0 for e in exps)

    def test_ascent_never_lowers_envelope(self, model, cantor10):
        pool = split_pool(np.arange(len(cantor10)), 0)
        rng = np.random.default_rng(1)
        base = mixed_batch(model, pool, 6, rng, True)
        more = ascend_envelope(model, pool, base, rng, rounds=3)
        assert envelope(base + more) >= envelope(base)
        visited = {(tuple(e.x), e.t) for e in base}
        assert all((tuple(e.x), e.t) not in visited for e in more)

    def test_calibration_uses_even_indices(self, model, cantor10):
        sample, sweep = calibration_batch(model, seed=2, n_sample=10, n_sweep=5)
        even = {tuple(p) for p in cantor10.points[::2]}
        assert all(tuple(e.x) in even for e in sample + sweep)

    def test_protocol_deterministic(self, model):
        a = run_protocol(model, seed=4, n_sample=20, n_sweep=10)[0]
        b = run_protocol(model, seed=4, n_sample=20, n_sweep=10)[0]
        assert a.to_dict() == b.to_dict()
