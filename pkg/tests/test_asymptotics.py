import math

import numpy as np
import pytest

from weakflow.asymptotics import (
    ProfileSamples,
    decay_check,
    default_directions,
    far_field_temperature,
    far_field_velocity,
    geometric_radii,
    kappa_scan,
    log_growth_ratio,
    lower_bound_radius,
    nonexistence_diagnostic,
    profile_constant,
    profile_verdict,
    projected_constant,
    sample_profile,
    shell_partial_sums,
    shell_weights,
)
from weakflow.grid import GridSpec, ScalarField, VectorField
from weakflow.picard import SolverConfig, estimate_constants, picard_solve, prepare_in_regime
from weakflow.problem import make_problem, well_prepared_data, zero_problem

G = GridSpec(8.0, 16)


def _hot_cell():
    th = np.zeros(G.shape)
    th[8, 8, 8] = 1.0 / G.cell_volume
    gv = np.zeros((3,) + G.shape)
    gv[0] = 1.0
    data = make_problem(VectorField.zeros(G), ScalarField.zeros(G), VectorField(G, gv), zero_problem(G, toy=True).toy_localizer)
    return ScalarField(G, th), data


@pytest.mark.parametrize("R", [4.0, 10.0, 40.0])
def test_hot_cell_along_force(R):
    th, data = _hot_cell()
    x0 = G.mesh()[:, 8, 8, 8]
    v = far_field_velocity(VectorField.zeros(G), th, data, (x0 + np.array([R, 0, 0]))[None])
    assert v[0, 0] == pytest.approx(1 / (4 * math.pi * R), rel=1e-2)
    assert np.abs(v[0, 1:]).max() < 1e-15


def test_hot_cell_transverse_is_half():
    th, data = _hot_cell()
    x0 = G.mesh()[:, 8, 8, 8]
    v = far_field_velocity(VectorField.zeros(G), th, data, (x0 + np.array([0, 0, 20.0]))[None])
    assert v[0, 0] == pytest.approx(1 / (8 * math.pi * 20.0), rel=1e-12)


def test_far_field_linear_in_theta():
    th, data = _hot_cell()
    pts = np.array([[10.0, 2.0, 0.0], [0.0, -9.0, 5.0]])
    z = VectorField.zeros(G)
    a = far_field_velocity(z, th, data, pts)
    b = far_field_velocity(z, th * 2.5, data, pts)
    assert np.allclose(b, 2.5 * a, rtol=1e-14)


def test_far_field_input_checks():
    th, data = _hot_cell()
    with pytest.raises(ValueError, match="L/2"):
        far_field_velocity(VectorField.zeros(G), th, data, [1.0, 0, 0])
    with pytest.raises(ValueError, match="localizer"):
        far_field_velocity(VectorField.zeros(G), th, zero_problem(G), [10.0, 0, 0])


def test_far_field_temperature_of_source():
    # −Δθ = g with no advection: θ(x) ≈ (∫ g)/(4π|x|) for mean-free g is zero at leading order
    data = well_prepared_data(G, 0, [1, 4], 1.0, toy=True)
    val = far_field_temperature(VectorField.zeros(G), ScalarField.zeros(G), data, [[40.0, 0.0, 0.0]])
    assert abs(val[0]) < 1e-3 * np.abs(data.g_force.values).max()


def test_projected_constant():
    M1 = np.array([0.0, 0.0, 8 * math.pi])
    assert projected_constant(M1, [0, 0, 1]) == pytest.approx(2.0)
    assert projected_constant(M1, [1, 0, 0]) == pytest.approx(1.0)
    assert projected_constant(M1, [0, 0, -3]) == pytest.approx(2.0)


def test_profile_constant_sum():
    th, data = _hot_cell()
    assert np.allclose(profile_constant(th, data.gravity), [1.0, 0.0, 0.0])


def test_default_directions_unit():
    d = default_directions()
    assert d.shape == (10, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


def _synthetic(radii, c=1.0):
    dirs = default_directions()
    return ProfileSamples.from_values(radii, dirs, np.full((radii.size, len(dirs)), c) / radii[:, None])


def test_one_over_R_log_growth():
    radii = geometric_radii(1.0, 1e4, 400)
    vals = 1.0 / radii
    assert log_growth_ratio(radii, vals, 3.0, 1.0, 100.0) == pytest.approx(2.0, rel=0.05)


def test_shell_sums_by_exponent():
    radii = geometric_radii(1.0, 1e4, 200)
    flags = nonexistence_diagnostic(_synthetic(radii), [2.0, 3.0, 4.0, 6.0], M2=1.0)
    assert flags[2.0] == "diverges" and flags[3.0] == "diverges"
    assert flags[4.0] == "converges" and flags[6.0] == "converges"


def test_shell_weights_cover_interval():
    r = np.linspace(1.0, 2.0, 101)
    w = shell_weights(r)
    # Σ R²ΔR ≈ ∫ R² dR over [1 − Δ/2, 2 + Δ/2]
    a, b = 1.0 - 0.005, 2.0 + 0.005
    assert w.sum() == pytest.approx((b ** 3 - a ** 3) / 3, rel=1e-4)
    r2, S = shell_partial_sums(r, np.ones_like(r), 2.0, r_min=1.5)
    assert r2.min() > 1.5 and np.all(np.diff(S) > 0)


def test_nonexistence_rejections():
    radii = geometric_radii(1.0, 100.0, 15)
    with pytest.raises(ValueError):
        nonexistence_diagnostic(_synthetic(radii), [3.0], M2=math.nan)
    with pytest.raises(ValueError, match="radii beyond"):
        nonexistence_diagnostic(_synthetic(radii), [3.0], M2=50.0)
    with pytest.raises(ValueError):
        log_growth_ratio(radii, 1 / radii, 3.0, 1.0, 50.0)


def test_lower_bound_radius():
    radii = geometric_radii(1.0, 100.0, 30)
    s = _synthetic(radii)
    assert lower_bound_radius(s, np.ones(10)) == 1.0
    assert math.isnan(lower_bound_radius(s, np.full(10, 3.0)))


def test_profile_verdict_on_exact_profile():
    radii = geometric_radii(10.0, 1e4, 60)
    M1 = np.array([1.0, -2.0, 0.5])
    dirs = default_directions()
    pred = np.array([projected_constant(M1, d) for d in dirs])
    s = ProfileSamples.from_values(radii, dirs, pred[None] / radii[:, None])
    v = profile_verdict(s, M1)
    assert v.projected_gap < 1e-12 and v.sample_gap < 1e-12
    assert v.newton_constant == pytest.approx(np.linalg.norm(M1) / (4 * math.pi))
    assert v.lp_flags[3.0] == "diverges" and v.lp_flags[4.0] == "converges"


def test_profile_samples_validation():
    with pytest.raises(ValueError):
        ProfileSamples.from_values([2.0, 1.0], default_directions(), np.ones((2, 10)))
    with pytest.raises(ValueError):
        ProfileSamples.from_values([1.0, 2.0], default_directions(), np.full((2, 10), np.nan))


@pytest.fixture(scope="module")
def toy_solution():
    g = GridSpec(8.0, 24)
    data = well_prepared_data(g, 4, [1, 7], 2.0, toy=True)
    cfg = SolverConfig(toy_mode=True)
    u, th, _ = picard_solve(data, cfg)
    return g, data, u, th, cfg


def test_decay_sign_flip_invariant(toy_solution):
    _, data, u, th, _ = toy_solution
    a = decay_check(u, th, data)
    b = decay_check(-u, -th, data)
    assert b.sup_u == pytest.approx(a.sup_u, rel=1e-14)
    assert b.sup_theta == pytest.approx(a.sup_theta, rel=1e-14)


def test_decay_halving_data(toy_solution):
    _, data, u, th, cfg = toy_solution
    half = data.scaled(0.5)
    u2, th2, _ = picard_solve(half, cfg)
    a = decay_check(u, th, data)
    b = decay_check(u2, th2, half)
    assert b.sup_u / a.sup_u == pytest.approx(0.5, rel=0.25)
    assert b.sup_theta / a.sup_theta == pytest.approx(0.5, rel=0.25)


def test_decay_grid_only(toy_solution):
    g, data, u, th, _ = toy_solution
    rep = decay_check(u, th)
    w = (1 + g.radius()) * u.magnitude()
    assert rep.sup_u == pytest.approx(w.max())
    assert set(rep.to_json()) == {"sup_u", "sup_theta", "argmax_u", "argmax_theta"}


def test_sample_profile_shape(toy_solution):
    _, data, u, th, _ = toy_solution
    s = sample_profile(u, th, data, n_radii=12, span=(0.5, 4.0))
    assert s.values.shape == (12, 10)
    assert np.allclose(s.scaled, s.radii[:, None] * s.values)
    assert len(s.rows()) == 120


def test_kappa_scan_quadratic():
    g = GridSpec(2 * math.pi, 16)
    raw = well_prepared_data(g, 2, [1, 4], 1.0)
    c = estimate_constants(g, 10, 7, gravity=raw.gravity)
    base = prepare_in_regime(raw, c, 0.5)
    res = kappa_scan(base, [0.0, 0.125, 0.25, 30.0], SolverConfig(), c)
    rows = {r["kappa"]: r for r in res["rows"]}
    assert rows[0.0]["M1_norm"] == 0.0
    assert rows[0.25]["M1_norm"] / rows[0.125]["M1_norm"] == pytest.approx(4.0, rel=0.05)
    assert rows[30.0]["status"].startswith("failed")
