import math
import warnings

import numpy as np
import pytest

from weakflow.grid import GridSpec, ScalarField, VectorField
from weakflow.potential import (
    BoundaryDecayWarning,
    boundary_ratio,
    dipole_potential_at,
    newton_potential_at,
    self_cell_integral,
    stokes_potential_at,
)

G = GridSpec(4.0, 16)


def _point(grid, idx, value=1.0):
    v = np.zeros(grid.shape)
    v[idx] = value / grid.cell_volume
    return v


def test_self_cell_closed_form():
    # ∫∫_{[0,1]²} da db/√(1+a²+b²) = ln(2+√3) − π/6
    assert self_cell_integral() == pytest.approx(3 * (math.log(2 + math.sqrt(3)) - math.pi / 6), rel=1e-12)


@pytest.mark.parametrize("R", [3.0, 10.0, 100.0])
def test_point_mass(R):
    src = ScalarField(G, _point(G, (8, 8, 8)))
    c = G.mesh()[:, 8, 8, 8]
    d = np.array([1.0, 2.0, -2.0]) / 3.0
    assert newton_potential_at(src, c + R * d) == pytest.approx(1 / (4 * math.pi * R), rel=1e-13)


def test_shell_theorem_outside():
    g = GridSpec(4.0, 32)
    ball = (g.radius() < 1.0).astype(float)
    mass = ball.sum() * g.cell_volume
    pts = np.array([[3.0, 0, 0], [0, 0, 4.0], [2.0, 2.0, 2.0]])
    vals = newton_potential_at(ScalarField(g, ball), pts)
    want = mass / (4 * math.pi * np.linalg.norm(pts, axis=1))
    assert np.allclose(vals, want, rtol=2e-3)


def test_shell_theorem_inside_is_flat():
    g = GridSpec(4.0, 32)
    r = g.radius()
    shell = ((r > 1.3) & (r < 1.7)).astype(float)
    pts = np.array([[0.05, 0.02, 0.01], [0.3, 0.0, 0.0], [0.0, -0.2, 0.25]])
    vals = newton_potential_at(ScalarField(g, shell), pts)
    assert np.ptp(vals) < 1e-2 * vals.mean()


def test_self_cell_correction_applied():
    src = ScalarField(G, np.where(G.radius() < 1.0, 1.0, 0.0))
    centre = G.mesh()[:, 8, 8, 8]
    val, diag = newton_potential_at(src, centre, return_diagnostics=True)
    assert diag["self_cell_hits"] == 1
    # continuum value at the centre of a unit ball of density 1 is R²/2
    assert val == pytest.approx(0.5, rel=0.05)
    off, diag2 = newton_potential_at(src, centre + 0.3 * G.spacing, return_diagnostics=True)
    assert diag2["self_cell_hits"] == 0


def test_boundary_warning():
    vals = np.zeros(G.shape)
    vals[0, 5, 5] = 1.0
    assert boundary_ratio(vals) == 1.0
    with pytest.warns(BoundaryDecayWarning):
        newton_potential_at(ScalarField(G, vals), [10.0, 0, 0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        newton_potential_at(ScalarField(G, _point(G, (8, 8, 8))), [10.0, 0, 0])


def test_bad_points():
    with pytest.raises(ValueError):
        newton_potential_at(ScalarField(G, _point(G, (8, 8, 8))), [1.0, 2.0])


def test_stokeslet():
    F = np.zeros((3,) + G.shape)
    F[:, 8, 8, 8] = np.array([1.0, -0.5, 2.0]) / G.cell_volume
    y = G.mesh()[:, 8, 8, 8]
    x = y + np.array([5.0, 3.0, -4.0])
    z = x - y
    r = np.linalg.norm(z)
    f = np.array([1.0, -0.5, 2.0])
    want = (f / r + z * (z @ f) / r ** 3) / (8 * math.pi)
    assert np.allclose(stokes_potential_at(VectorField(G, F), None, x), want, rtol=1e-13)


def test_stokes_stress_is_force_derivative():
    # −∂_j G W for W = e_k ⊗ e_j at y equals the finite-difference derivative of the Stokeslet in y
    k, j = 0, 2
    W = np.zeros((3, 3) + G.shape)
    W[k, j, 8, 8, 8] = 1.0 / G.cell_volume
    y = G.mesh()[:, 8, 8, 8]
    x = y + np.array([6.0, -2.0, 3.0])

    def stokeslet(src):
        z = x - src
        r = np.linalg.norm(z)
        e = np.eye(3)[k]
        return (e / r + z * (z @ e) / r ** 3) / (8 * math.pi)

    eps = 1e-5
    dy = np.eye(3)[j] * eps
    # −∂_{z_j} G(x − y) = +∂_{y_j} G(x − y)
    fd = (stokeslet(y + dy) - stokeslet(y - dy)) / (2 * eps)
    got = stokes_potential_at(None, W, x, grid=G)
    assert np.allclose(got, fd, rtol=1e-7, atol=1e-12)


def test_dipole():
    d = np.zeros((3,) + G.shape)
    d[:, 8, 8, 8] = np.array([0.0, 0.0, 1.0]) / G.cell_volume
    y = G.mesh()[:, 8, 8, 8]
    x = y + np.array([0.0, 3.0, 4.0])
    got = dipole_potential_at(None, VectorField(G, d), x)
    assert got == pytest.approx(4.0 / 125.0 / (4 * math.pi), rel=1e-13)
