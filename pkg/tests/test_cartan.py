import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartan_lab.cartan import (BallCover, Power, cartan_bound, cartan_cover, disjointness_violations,
                               gorin_budget_sum, gorin_cover, local_cover_check, tau, tau_many,
                               verify_cartan)
from cartan_lab.errors import PreconditionError
from cartan_lab.functions import Constant, DiscreteMeasure, Potential
from cartan_lab.sampling import GridSpec

from oracles import brute_tau, closed_ball_mass, random_unit_atoms

ORIGIN = np.zeros((1, 2))


def unit_measure(atoms) -> DiscreteMeasure:
    atoms = np.asarray(atoms, float).reshape(-1, 2)
    return DiscreteMeasure(atoms, np.ones(len(atoms)))


@pytest.fixture
def single():
    return unit_measure(ORIGIN)


class TestPower:
    def test_shape(self):
        phi = Power(2.0, 1.5)
        ts = np.linspace(0, 3, 301)
        vals = phi(ts)
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) > 0)
        np.testing.assert_allclose(phi.inverse(vals), ts, atol=1e-12)

    def test_parse(self):
        assert Power.parse("power:2,0.5") == Power(2.0, 0.5)
        with pytest.raises(ValueError):
            Power.parse("exp:1,1")

    def test_bad(self):
        with pytest.raises(ValueError):
            Power(0.0, 1.0)


class TestTau:
    def test_at_atom(self, single):
        assert tau([0, 0], single, Power(1, 1)) == pytest.approx(1.0, abs=1e-15)

    def test_far_point_is_regular(self, single):
        assert tau([3.0, 0.0], single, Power(1, 1)) == 0.0

    def test_half_distance(self, single):
        assert tau([0.5, 0.0], single, Power(1, 1)) == pytest.approx(1.0, abs=1e-15)

    def test_bounded_majorant(self, single):
        class Capped(Power):
            limit = 0.5
        with pytest.raises(PreconditionError):
            tau([0, 0], single, Capped(1, 1))

    @given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]), st.floats(0.5, 3.0))
    def test_against_brute_force(self, seed, d, p):
        atoms = random_unit_atoms(seed, 12)
        mu = unit_measure(atoms)
        phi = Power(p, d)
        rng = np.random.default_rng(seed + 1)
        xs = rng.uniform(-1.5, 1.5, (4, 2))
        t_max = float(phi.inverse(len(atoms))) * 1.01
        got = tau_many(xs, mu, phi)
        step = t_max / 200_000
        for x, g in zip(xs, got):
            assert g == pytest.approx(brute_tau(x, atoms, np.ones(len(atoms)), p, d, t_max), abs=2 * step)


class TestGorin:
    def test_empty(self):
        cover = gorin_cover(unit_measure(np.zeros((0, 2))), Power(1, 1))
        assert cover.balls == []

    def test_single_atom(self, single):
        cover = gorin_cover(single, Power(1, 1))
        assert len(cover.balls) == 1
        np.testing.assert_allclose(cover.balls[0].center, [0.0, 0.0], atol=1e-12)
        # tau_1 = sup_x tau(x), found by brute force over a grid
        grid = np.stack(np.meshgrid(np.linspace(-2, 2, 81), np.linspace(-2, 2, 81)), -1).reshape(-1, 2)
        best = max(brute_tau(x, ORIGIN, np.ones(1), 1, 1, 3.0, 30_001) for x in grid)
        assert cover.taus[0] == pytest.approx(best, abs=1e-4)
        assert cover.balls[0].radius == pytest.approx(2.001 * cover.taus[0], rel=1e-12)

    @pytest.mark.parametrize("kw", [{"alpha": 1.5}, {"beta": 1.0}, {"gamma": 0.9}])
    def test_parameter_checks(self, single, kw):
        with pytest.raises(ValueError):
            gorin_cover(single, Power(1, 1), **kw)

    @given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
    def test_budget_and_disjointness(self, seed, d):
        mu = unit_measure(random_unit_atoms(seed, 30))
        phi = Power(1.0, d)
        cover = gorin_cover(mu, phi)
        assert gorin_budget_sum(cover, phi) <= mu.total * (1 + 1e-12)
        assert disjointness_violations(cover) == []

    @given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
    def test_off_cover_points_are_regular(self, seed, d):
        atoms = random_unit_atoms(seed, 20)
        mu = unit_measure(atoms)
        phi = Power(1.0, d)
        cover = gorin_cover(mu, phi)
        g = GridSpec(-2, 2, -2, 2, 60).points()
        off = g[~cover.covered(g)]
        for t in 2.0 ** -np.arange(0, 21):
            assert np.all(closed_ball_mass(off, atoms, np.ones(len(atoms)), t) < phi(t))


class TestCartanCover:
    def test_budget_two_e(self, single):
        cover = cartan_cover(single, math.e, 1.0)
        assert cover.budget_limit == pytest.approx(2 * math.e, rel=1e-15)
        assert cover.budget_used <= 2 * math.e * (1 + 1e-12)

    @pytest.mark.parametrize("H", [0.1, 0.5, 1.0, math.e])
    def test_contains_sublevel_disk(self, single, H):
        # log|z| >= log(H/e) off the cover forces D(0, H/e) inside it
        cover = cartan_cover(single, H, 1.0)
        th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        for rho in np.linspace(0, H / math.e, 20, endpoint=False):
            ring = np.column_stack([rho * np.cos(th), rho * np.sin(th)])
            assert cover.covered(ring).all()
        assert H / math.e <= cover.budget_used <= 2 * H

    def test_empty_measure(self):
        cover = cartan_cover(unit_measure(np.zeros((0, 2))), 1.0, 1.0)
        assert cover.balls == [] and cover.budget_used == 0.0

    @given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.1, 1.0, math.e]))
    def test_lower_bound_off_cover(self, seed, d, H):
        mu = unit_measure(random_unit_atoms(seed, 25))
        cover = cartan_cover(mu, H, d)
        assert cover.budget_used <= (2 * H) ** d / d * (1 + 1e-12)
        rep = verify_cartan(Potential(mu), cover, cartan_bound(mu.total, H), GridSpec(-2, 2, -2, 2, 80))
        assert rep.success, rep.violations[:3]

    @pytest.mark.parametrize("H", [0.1, 1.0, math.e])
    def test_budget_scales_as_power(self, H):
        mu = unit_measure(random_unit_atoms(3))
        for d in (0.5, 1.0, 2.0):
            limits = [cartan_cover(mu, h, d).budget_limit for h in (H, 2 * H)]
            assert limits[1] / limits[0] == pytest.approx(2.0**d, rel=1e-12)
        assert cartan_bound(mu.total, 2 * H) > cartan_bound(mu.total, H)


class TestVerify:
    def test_single_atom_bound_zero(self, single):
        cover = cartan_cover(single, math.e, 1.0)
        rep = verify_cartan(Potential(single), cover, 0.0, GridSpec(-8, 8, -8, 8, 161))
        assert rep.success
        assert rep.min_off_cover >= -1e-9

    def test_constant_empty_cover(self):
        rep = verify_cartan(Constant(5.0), BallCover([], 1.0, 1.0), 0.0, GridSpec(-1, 1, -1, 1, 11))
        assert rep.success and rep.min_off_cover == 5.0

    def test_everything_covered(self, single):
        cover = cartan_cover(single, math.e, 1.0)
        rep = verify_cartan(Potential(single), cover, 0.0, GridSpec(-1, 1, -1, 1, 11))
        assert rep.empty_off_cover and rep.min_off_cover == math.inf

    def test_reports_violation(self):
        rep = verify_cartan(Constant(-1.0), BallCover([], 1.0, 1.0), 0.0, GridSpec(-1, 1, -1, 1, 5))
        assert not rep.success and len(rep.violations) == 25


class TestLocalCover:
    def test_constant_empty(self):
        rep = local_cover_check(Constant(0.0), [0, 0], 0.2, 0.5, 0.5, 1.0, 1.0, 1.0, 0.0,
                                GridSpec(-0.3, 0.3, -0.3, 0.3, 61))
        assert rep.success and rep.cover.balls == []

    @pytest.mark.parametrize("H", [0.05, 0.2])
    def test_log_disk_matches_closed_form(self, H):
        f = Potential(unit_measure(ORIGIN))
        t, r, c, m1, m2 = 0.2, 0.5, 1.0, 1.0, 0.0
        g = GridSpec(-0.25, 0.25, -0.25, 0.25, 201)
        rep = local_cover_check(f, [0, 0], t, r, H, 1.0, c, m1, m2, g)
        rho = t * (H / math.e) ** (c * (m1 - m2))
        pad = math.hypot(*g.spacing)
        assert len(rep.cover.balls) == 1
        assert rho - pad <= rep.cover.balls[0].radius <= rho + pad
        assert rep.success == (rep.cover.budget_used <= rep.cover.budget_limit)

    def test_whole_disk_sublevel(self):
        f = Potential(unit_measure(ORIGIN))
        g = GridSpec(-0.25, 0.25, -0.25, 0.25, 101)
        rep = local_cover_check(f, [0, 0], 0.2, 0.5, 1e6, 0.5, 1.0, 1.0, 0.0, g)
        assert rep.extra["sublevel_points"] == rep.grid_size
        assert rep.off_cover_count == 0 and rep.success

    def test_geometry_precondition(self):
        with pytest.raises(PreconditionError):
            local_cover_check(Constant(0.0), [0.4, 0], 0.2, 0.5, 0.5, 1.0, 1.0, 1.0, 0.0,
                              GridSpec(-1, 1, -1, 1, 11))
