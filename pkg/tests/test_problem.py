import math

import numpy as np
import pytest

from weakflow.grid import GridSpec, ScalarField, VectorField
from weakflow.operators import divergence_of, localizer
from weakflow.problem import homogeneous_data, kaiser_shell, make_problem, well_prepared_data, zero_problem

G = GridSpec(2 * math.pi, 16)


def test_lift_solves_poisson():
    d = well_prepared_data(G, 1, [1, 4], 2.0)
    assert d.lift_defect() < 1e-12
    assert np.abs(divergence_of(d.lifted_u0).values).max() < 1e-12 * d.lifted_u0.max_abs()


def test_make_problem_rejects_mean():
    f = VectorField(G, np.ones((3,) + G.shape))
    with pytest.raises(ValueError, match="zero mean"):
        make_problem(f, ScalarField.zeros(G), VectorField.zeros(G))


def test_make_problem_rejects_grid_mismatch():
    other = GridSpec(1.0, 16)
    with pytest.raises(ValueError, match="grids"):
        make_problem(VectorField.zeros(G), ScalarField.zeros(other), VectorField.zeros(G))


def test_zero_problem():
    d = zero_problem(G, toy=True)
    assert d.lifted_u0.max_abs() == 0.0 and d.lifted_theta0.max_abs() == 0.0
    assert np.array_equal(d.toy_localizer.values, localizer(G).values)
    assert zero_problem(G).toy_localizer is None


def test_scaling_helpers():
    d = well_prepared_data(G, 2, [1, 4], 1.0)
    s = d.scaled(0.5)
    assert np.allclose(s.gravity.components, 0.5 * d.gravity.components)
    assert np.allclose(s.lifted_theta0.values, 0.5 * d.lifted_theta0.values)
    r = d.rescaled(2.0, 3.0)
    assert np.allclose(r.f_force.components, 2.0 * d.f_force.components)
    assert np.allclose(r.gravity.components, 3.0 * d.gravity.components)
    assert d.with_localizer(localizer(G)).toy_localizer is not None


def test_homogeneous_data_has_no_forces():
    d = homogeneous_data(G, 3, [1, 4], 0.1)
    assert not d.f_force.components.any() and not d.g_force.values.any()
    assert d.gravity.max_abs() > 0


def test_kaiser_window_edges():
    W = kaiser_shell(GridSpec(1.0, 32), [2, 8])
    assert W.max() <= 1.0 and W.min() >= 0.0
    assert W[0, 0, 0] == 0.0 and W[2, 0, 0] == 0.0 and W[8, 0, 0] == 0.0
    assert W[5, 0, 0] == pytest.approx(1.0)


def test_empty_band():
    g = GridSpec(1.0, 32)
    with pytest.raises(ValueError, match="no lattice modes"):
        well_prepared_data(g, 0, [1.0, 1.2], 1.0)


def test_toy_flag_sets_localizer():
    assert well_prepared_data(G, 0, [1, 4], 1.0, toy=True).toy_localizer is not None
