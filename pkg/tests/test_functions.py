import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartan_lab.errors import DegenerateFunctionError, DimensionMismatchError
from cartan_lab.functions import (Constant, DiscreteMeasure, LogAbsPolynomial, MaxOf, Potential,
                                  Scaled, Shifted, evaluate, function_from_dict, normalize_m1m2,
                                  sup_on_ball)

from oracles import dense_circle_sup, log_abs_poly

coord = st.floats(-1.5, 1.5, allow_nan=False)
atom_lists = st.lists(st.tuples(coord, coord), min_size=1, max_size=6)


def unit_potential(*atoms):
    pts = np.array([[z.real, z.imag] for z in map(complex, atoms)])
    return Potential(DiscreteMeasure(pts, np.ones(len(pts))))


class TestEvaluate:
    def test_log_one(self):
        assert evaluate(unit_potential(0), 1.0) == 0.0

    def test_log_e(self):
        assert evaluate(unit_potential(0), math.e) == pytest.approx(1.0, abs=1e-15)

    def test_two_atoms(self):
        assert evaluate(unit_potential(-0.5, 0.5), 0.0) == pytest.approx(2 * math.log(0.5), abs=1e-15)

    def test_minus_infinity_at_atom(self):
        assert evaluate(unit_potential(0.3j), 0.3j) == -math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            evaluate(unit_potential(0), [[1.0, 0.0, 0.0, 0.0]])

    def test_masses_must_be_positive(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(np.zeros((1, 2)), np.array([-1.0]))

    @given(atom_lists, st.lists(st.tuples(coord, coord), min_size=1, max_size=8))
    def test_potential_equals_logpoly(self, atoms, zs):
        pts = np.array(atoms, float)
        pot = Potential(DiscreteMeasure(pts, np.ones(len(pts))))
        lp = LogAbsPolynomial(pts[:, 0] + 1j * pts[:, 1])
        z = np.array(zs, float)
        np.testing.assert_array_equal(pot(z), lp(z))

    def test_combinators(self):
        f = unit_potential(0)
        z = np.array([[2.0, 0.0], [0.1, 0.0]])
        np.testing.assert_allclose(Shifted(f, 3.0)(z), f(z) + 3.0)
        np.testing.assert_allclose(Scaled(f, -2.0)(z), -2.0 * f(z))
        np.testing.assert_allclose(MaxOf([f, Constant(0.0)])(z), np.maximum(f(z), 0.0))

    @pytest.mark.parametrize("f", [
        unit_potential(0, 0.5j), LogAbsPolynomial(np.array([0.2, -0.1j]), 0.5), Constant(-2.0),
        MaxOf([unit_potential(0), Constant(-1.0)]), Shifted(unit_potential(1), 2.0),
        Scaled(unit_potential(1), 0.5)])
    def test_dict_roundtrip(self, f):
        g = function_from_dict(f.to_dict())
        z = np.array([[0.3, 0.4], [-1.0, 2.0]])
        np.testing.assert_array_equal(f(z), g(z))
        assert g.to_dict() == f.to_dict()


class TestSup:
    def test_constant_exact(self):
        assert sup_on_ball(Constant(2.5), [0.3, 0.1], 0.7).value == 2.5

    @pytest.mark.parametrize("t", [1e-3, 0.3, 5.0])
    def test_single_atom(self, t):
        assert sup_on_ball(unit_potential(0), [0, 0], t).value == pytest.approx(math.log(t), abs=1e-12)

    def test_two_atoms_dense_oracle(self):
        got = sup_on_ball(unit_potential(-0.5, 0.5), [0, 0], 1.0, 4096).value
        want = dense_circle_sup(log_abs_poly([-0.5, 0.5]), 0.0, 1.0)
        assert got == pytest.approx(want, abs=1e-6)
        assert got >= want - 1e-12
        assert got == pytest.approx(math.log(1.25), abs=1e-12)

    def test_value_attained_at_argmax(self):
        f = unit_potential(0.1, -0.2j, 0.3 + 0.3j)
        est = sup_on_ball(f, [0.05, 0.0], 0.4, 256)
        assert est.value == pytest.approx(float(f(est.argmax[None, :])[0]), abs=1e-14)

    @given(atom_lists, st.floats(0.05, 1.0), st.floats(1.05, 3.0))
    def test_monotone_in_radius(self, atoms, t, q):
        f = unit_potential(*[complex(*a) for a in atoms])
        assert sup_on_ball(f, [0, 0], t).value <= sup_on_ball(f, [0, 0], q * t).value + 1e-12

    @given(atom_lists, st.floats(0.05, 1.0))
    def test_doubling_resolution(self, atoms, t):
        f = unit_potential(*[complex(*a) for a in atoms])
        v = [sup_on_ball(f, [0.1, 0.0], t, res).value for res in (64, 128, 256)]
        assert v[0] <= v[1] + 1e-12 and v[1] <= v[2] + 1e-12

    @given(atom_lists, st.sampled_from([1e2, 1e4]))
    def test_large_radius_growth(self, atoms, R):
        pts = np.array(atoms, float)
        f = Potential(DiscreteMeasure(pts, np.ones(len(pts))))
        excess = sup_on_ball(f, [0, 0], R).value - len(pts) * math.log(R)
        rho = np.linalg.norm(pts, axis=1) / R
        assert np.sum(np.log1p(-rho)) - 1e-12 <= excess <= np.sum(np.log1p(rho)) + 1e-12
        if R == 1e4 and rho.max() * R <= 1.0:  # atoms in the unit disk
            assert abs(excess) <= 1e-3

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            sup_on_ball(Constant(0.0), [0, 0], 0.0)
        with pytest.raises(ValueError):
            sup_on_ball(unit_potential(0), [0, 0], 1.0, resolution=4)


class TestNormalize:
    def test_log_abs(self):
        m1, m2 = normalize_m1m2(unit_potential(0), 0.5)
        assert m1 == pytest.approx(0.0, abs=1e-14)
        assert m2 == pytest.approx(math.log(0.5), abs=1e-14)

    def test_constant(self):
        assert normalize_m1m2(Constant(-3.0), 2 / 3) == (-3.0, -3.0)

    def test_quadratic_dense_oracle(self):
        m1, m2 = normalize_m1m2(unit_potential(0.5, -0.5), 2 / 3)
        g = log_abs_poly([0.5, -0.5])
        assert m1 == pytest.approx(math.log(1.25), abs=1e-12)
        assert m2 == pytest.approx(dense_circle_sup(g, 0.0, 2 / 3), abs=1e-6)

    def test_r_range(self):
        with pytest.raises(ValueError):
            normalize_m1m2(Constant(0.0), 1.0)

    def test_minus_infinity_on_disk(self):
        with pytest.raises(DegenerateFunctionError):
            normalize_m1m2(Constant(-math.inf), 0.5)
