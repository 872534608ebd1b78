import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartan_lab.errors import DegenerateInputError, IsolationError, PreconditionError
from cartan_lab.functions import LogNormMap
from cartan_lab.geometry import ball_restrict
from cartan_lab.multidim import (GALLERY, HolomorphicMapSample, _poly, ellipticity_probe,
                                 envelope_check, gallery, half_ball_sample, log_norm, mcol1_gap,
                                 multidim_cartan)
from cartan_lab.sampling import to_complex

SMALL = half_ball_sample(2, 20_000, seed=3)
MAPS = {name: gallery(name) for name in GALLERY}
coord = st.floats(-0.7, 0.7, allow_nan=False)


class TestLogNorm:
    def test_identity_unit_vectors(self):
        F = gallery("identity")
        assert log_norm(F, [[1.0, 0.0, 0.0, 0.0]]) == pytest.approx(0.0, abs=1e-14)
        assert log_norm(F, [[0.6, 0.0, 0.8, 0.0]]) == pytest.approx(0.0, abs=1e-14)

    def test_quadratic_at_origin(self):
        F = gallery("quadratic", c=0.01)
        raw = LogNormMap(F.components)(np.zeros((1, 4)))[0]
        assert raw == pytest.approx(0.5 * math.log(1e-4), abs=1e-14)
        assert log_norm(F, np.zeros((1, 4))) == pytest.approx(raw - F.log_scale, abs=1e-14)

    def test_listed_zeros(self):
        assert log_norm(gallery("identity"), np.zeros((1, 4))) == -math.inf
        F = gallery("double_quadratic")
        raw = LogNormMap(F.components)
        for z, _ in F.known_zeros:
            assert raw(z[None, :])[0] < math.log(1e-10)

    @given(st.sampled_from(GALLERY), st.lists(st.tuples(coord, coord, coord, coord), min_size=1, max_size=10))
    def test_max_component_sandwich(self, name, pts):
        F = MAPS[name]
        z = np.array(pts)
        u = LogNormMap(F.components)(z)
        zc = to_complex(z)
        with np.errstate(divide="ignore"):
            comp = np.max([np.log(np.abs(p(zc))) for p in F.components], axis=0)
        ok = np.isfinite(comp)
        assert np.all(comp[ok] <= u[ok] + 1e-12)
        assert np.all(u[ok] <= comp[ok] + 0.5 * math.log(F.n) + 1e-12)

    def test_normalisation(self):
        for F in MAPS.values():
            pts = half_ball_sample(2, 4000, seed=1).points() * 2.0  # inside B_1
            assert np.max(F.u(pts)) <= 1e-9

    def test_rejects_fake_zero(self):
        F = gallery("identity")
        with pytest.raises(ValueError):
            HolomorphicMapSample(2, F.components, [(np.array([0.1, 0, 0, 0]), 1)])

    def test_dict_roundtrip(self):
        F = gallery("quadratic")
        G = HolomorphicMapSample.from_dict(F.to_dict())
        pts = SMALL.points()[:50]
        np.testing.assert_array_equal(F.u(pts), G.u(pts))
        assert G.M == F.M and G.k == F.k


class TestEnvelope:
    @pytest.mark.parametrize("name", GALLERY)
    def test_gallery(self, name):
        rep = envelope_check(MAPS[name], SMALL)
        assert rep.success, rep.max_excess

    def test_identity_closed_form(self):
        F = gallery("identity")
        assert F.k == 1
        assert F.M == pytest.approx(math.log(2), abs=1e-9)
        pts = SMALL.points()
        pts = pts[np.linalg.norm(pts, axis=1) < 0.5]
        np.testing.assert_allclose(F.u(pts), np.log(np.linalg.norm(pts, axis=1)), atol=1e-12)

    def test_zero_free(self):
        # shifting the identity's zero outside B_1/2 leaves an empty sum
        comps = [_poly(2, ((1, 0), 1), ((0, 0), -0.8)), _poly(2, ((0, 1), 1))]
        F = HolomorphicMapSample(2, comps, [(np.array([0.8, 0, 0, 0]), 1)], "shifted")
        assert F.k == 0
        assert envelope_check(F, SMALL).success


class TestMultidimCartan:
    def test_identity_at_e(self):
        rep = multidim_cartan(gallery("identity"), math.e, 2.0, SMALL)
        assert rep.success

    @pytest.mark.parametrize("H", [0.1, 1.0, math.e])
    def test_quadratic(self, H):
        rep = multidim_cartan(gallery("quadratic"), H, 2.0, SMALL)
        assert rep.success
        assert rep.cover.budget_used <= (2 * H) ** 2 / 2 * (1 + 1e-12)

    def test_extra_mass(self):
        F = gallery("quadratic")
        rep = multidim_cartan(F, 0.1, 2.0, SMALL, mass=F.k + 2)
        assert rep.success and rep.k == F.k + 2

    @pytest.mark.parametrize("H", [0.1, 1.0, math.e, 5.0])
    def test_extra_mass_sign(self, H):
        F = gallery("quadratic")
        bounds = [multidim_cartan(F, H, 2.0, SMALL, mass=m).bound for m in (F.k, F.k + 2)]
        if H <= math.e:
            assert bounds[1] <= bounds[0] + 1e-12
        else:
            assert bounds[1] > bounds[0]


class TestEllipticity:
    def test_identity(self):
        res = ellipticity_probe(gallery("identity"), (0, 0, 0, 0))
        assert res.verdict == "elliptic"
        for _, e, c, _ in res.exponent_per_direction:
            assert e == pytest.approx(2.0, abs=1e-6)
            assert c == pytest.approx(1.0, rel=1e-6)

    def test_cusp(self):
        res = ellipticity_probe(gallery("cusp"), (0, 0, 0, 0))
        assert res.verdict == "non-elliptic"
        axis = {tuple(np.round(w, 12)): e for w, e, _, _ in res.exponent_per_direction}
        assert axis[(1.0, 0.0, 0.0, 0.0)] == pytest.approx(2.0, abs=1e-6)
        assert axis[(0.0, 0.0, 1.0, 0.0)] == pytest.approx(4.0, abs=1e-6)

    def test_rotated(self):
        res = ellipticity_probe(gallery("rotated"), (0, 0, 0, 0))
        assert res.verdict == "elliptic"
        sv2 = np.linalg.svd(np.array([[1, 1], [1, -1]], float), compute_uv=False) ** 2
        for _, e, c, _ in res.exponent_per_direction:
            assert e == pytest.approx(2.0, abs=1e-6)
            assert sv2.min() * (1 - 1e-6) <= c <= sv2.max() * (1 + 1e-6)

    def test_isolation(self):
        F = gallery("quadratic", c=0.01)
        with pytest.raises(IsolationError):
            ellipticity_probe(F, F.known_zeros[0][0], t_grid=np.geomspace(1e-3, 0.2, 8))

    def test_not_a_zero(self):
        with pytest.raises(PreconditionError):
            ellipticity_probe(gallery("identity"), (0.1, 0, 0, 0))


class TestMcol1Gap:
    def test_full_ball_omega(self, diamond6):
        F = gallery("quadratic")
        x = diamond6.points[7]
        omega, _ = ball_restrict(diamond6, x, 0.05, closed=False)
        e = mcol1_gap(F, diamond6, x, 0.05, 0.6, omega, resolution=512)
        assert e.lhs >= 0
        assert e.scale == F.k

    def test_geometry_hypothesis(self, diamond6):
        F = gallery("quadratic")
        x = diamond6.points[0]
        omega, _ = ball_restrict(diamond6, x, 0.05)
        with pytest.raises(PreconditionError):
            mcol1_gap(F, diamond6, x, 0.5, 0.6, omega, resolution=256)

    def test_empty_omega(self, diamond6):
        F = gallery("quadratic")
        empty, _ = ball_restrict(diamond6, [5.0, 5.0, 0.0, 0.0], 0.01)
        with pytest.raises(DegenerateInputError):
            mcol1_gap(F, diamond6, diamond6.points[0], 0.05, 0.6, empty, resolution=256)

    def test_shrinking_omega(self, diamond6):
        F = gallery("quadratic")
        x = diamond6.points[100]
        sup = None
        exps = []
        for rho in 0.1 * 3.0 ** -np.arange(1, 4):
            omega, _ = ball_restrict(diamond6, x, rho)
            e = mcol1_gap(F, diamond6, x, 0.1, 0.6, omega, resolution=512, sup_ball=sup)
            sup = e.sup_ball
            exps.append(e)
        assert all(a.lhs <= b.lhs + 1e-12 for a, b in zip(exps, exps[1:]))
        assert all(a.log_term < b.log_term for a, b in zip(exps, exps[1:]))
