import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakflow.grid import GridSpec, ScalarField, VectorField
from weakflow.liouville import (
    CutoffFamily,
    annulus_tail_norm,
    caccioppoli_ratio,
    caccioppoli_sides,
    calibrate_caccioppoli,
    cutoff_profile,
    cutoff_profile_derivative,
    homogeneous_residual,
    liouville_verdict,
)
from weakflow.operators import project, truncate
from weakflow.picard import SolverConfig, picard_solve
from weakflow.problem import homogeneous_data, well_prepared_data, zero_problem

G = GridSpec(2 * math.pi, 16)
L = G.box_length
RADII = (L / 8, L / 4, L / 2)


def _pair(seed):
    rng = np.random.default_rng(seed)
    th = ScalarField(G, truncate(rng.standard_normal(G.shape), G))
    u = project(VectorField(G, truncate(rng.standard_normal((3,) + G.shape), G)))
    return th, u


def test_profile_values():
    s = np.array([0.0, 0.25, 0.4999, 0.5, 0.75, 0.9999, 1.0, 3.0])
    out = cutoff_profile(s)
    assert out[:4].tolist() == [1.0, 1.0, 1.0, 1.0]
    assert out[4] == pytest.approx(0.5)
    assert out[6:].tolist() == [0.0, 0.0]
    assert np.all(np.diff(cutoff_profile(np.linspace(0, 1.2, 500))) <= 0)


def test_profile_derivative_matches_difference():
    s = np.linspace(0.3, 1.2, 301)
    eps = 1e-6
    fd = (cutoff_profile(s + eps) - cutoff_profile(s - eps)) / (2 * eps)
    assert np.allclose(cutoff_profile_derivative(s), fd, atol=1e-5)
    # C¹ joins at both ends of the transition
    assert abs(cutoff_profile_derivative(0.5 + 1e-9)) < 1e-12
    assert abs(cutoff_profile_derivative(1 - 1e-9)) < 1e-12


def test_cutoff_invariants():
    inv = CutoffFamily(RADII).check_invariants(G)
    for R, row in inv.items():
        assert row["in_range"]
        assert row["one_inside"] == 0.0
        assert row["zero_outside"] == 0.0
        assert row["grad_outside_annulus"] == 0.0


def test_cutoff_gradient_radial():
    fam = CutoffFamily()
    R = L / 4
    grad = fam.gradient(G, R)
    x = G.mesh()
    r = G.radius()
    radial = (grad.components * x).sum(axis=0) / np.where(r > 0, r, 1)
    assert np.allclose(grad.magnitude(), np.abs(radial))
    assert np.allclose(radial, cutoff_profile_derivative(r / R) / R)


def test_zero_and_constant_theta():
    _, u = _pair(1)
    lhs, a, b = caccioppoli_sides(ScalarField.zeros(G), u, L / 4, 4.0)
    assert lhs == a == b == 0.0
    assert caccioppoli_ratio(ScalarField.zeros(G), u, L / 4, 4.0) == 0.0
    const = ScalarField(G, np.full(G.shape, 2.0))
    lhs, a, b = caccioppoli_sides(const, u, L / 4, 4.0)
    assert lhs < 1e-24 and a > 0 and b > 0


def test_lhs_monotone_in_radius():
    th, u = _pair(2)
    lhs = [caccioppoli_sides(th, u, R, 4.5)[0] for R in np.linspace(L / 16, L / 2, 12)]
    assert np.all(np.diff(lhs) >= 0)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.01, 100), d=st.floats(0.01, 100))
def test_scaling_homogeneity(c, d):
    th, u = _pair(3)
    R, p = L / 4, 4.0
    l0, a0, b0 = caccioppoli_sides(th, u, R, p)
    l1, a1, b1 = caccioppoli_sides(th * c, u * d, R, p)
    assert l1 == pytest.approx(c * c * l0, rel=1e-11)
    assert a1 == pytest.approx(c * c * a0, rel=1e-11)
    assert b1 == pytest.approx(c * c * d * b0, rel=1e-11)


def test_argument_checks():
    th, u = _pair(4)
    with pytest.raises(ValueError):
        caccioppoli_sides(th, u, L, 4.0)
    with pytest.raises(ValueError):
        caccioppoli_sides(th, u, 0.0, 4.0)
    with pytest.raises(ValueError):
        caccioppoli_sides(th, u, L / 4, 3.0)
    with pytest.raises(ValueError):
        annulus_tail_norm(th, 2 * L)


def test_calibration_covers_references():
    pairs = [_pair(s) for s in (5, 6)]
    C = calibrate_caccioppoli(pairs, RADII[:2], 4.0, margin=2.0)
    for th, u in pairs:
        for R in RADII[:2]:
            assert caccioppoli_ratio(th, u, R, 4.0) <= C / 2 * (1 + 1e-15)


def test_tail_norm_localised():
    th, _ = _pair(7)
    R = L / 4
    t = annulus_tail_norm(th, R)
    masked = np.where((G.radius() >= R / 2) & (G.radius() < R), th.values, 0.0)
    from weakflow.lorentz import weak_norm

    assert t == pytest.approx(weak_norm(ScalarField(G, masked), 4.5))


def test_zero_fields_trivial():
    hom = homogeneous_data(G, 1, [1, 4], 0.1)
    rep = liouville_verdict(VectorField.zeros(G), ScalarField.zeros(G), 4.0, math.inf, RADII[:2], data=hom, C_emp=1.0)
    assert rep.verdict == "trivial" and rep.caccioppoli_holds and rep.residual == 0.0


def test_homogeneous_solution_is_trivial():
    hom = homogeneous_data(G, 2, [1, 4], 0.1)
    u, th, _ = picard_solve(hom, SolverConfig())
    rep = liouville_verdict(u, th, 4.0, math.inf, RADII[:2], data=hom)
    assert rep.verdict == "trivial"
    assert u.l2() + th.l2() <= 1e-12


def test_synthetic_non_solution_flagged_without_gate():
    th, u = _pair(8)
    rep = liouville_verdict(u, th, 4.0, math.inf, RADII[:2], check_solution=False)
    assert rep.verdict == "non-trivial-flagged"
    assert set(rep.to_json()) >= {"radii", "lhs", "rhs1", "rhs2", "tails", "verdict", "C_emp", "size_l2"}


def test_residual_gate_rejects_non_solution():
    th, u = _pair(9)
    hom = homogeneous_data(G, 3, [1, 4], 0.1)
    assert homogeneous_residual(u, th, hom) > 1e-3
    rep = liouville_verdict(u, th, 4.0, math.inf, RADII[:2], data=hom)
    assert rep.verdict == "rejected"
    assert "residual" in rep.notes[0]


def test_gate_rejects_forced_data_and_missing_data():
    th, u = _pair(10)
    forced = well_prepared_data(G, 1, [1, 4], 1.0)
    assert liouville_verdict(u, th, 4.0, math.inf, RADII[:2], data=forced).verdict == "rejected"
    assert liouville_verdict(u, th, 4.0, math.inf, RADII[:2]).verdict == "rejected"


def test_inequality_flag_with_tiny_constant():
    th, u = _pair(11)
    rep = liouville_verdict(u, th, 4.0, math.inf, RADII[:2], C_emp=1e-9, check_solution=False)
    assert not rep.caccioppoli_holds
