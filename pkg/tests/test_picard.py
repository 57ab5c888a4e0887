import math

import numpy as np
import pytest

from weakflow.grid import GridSpec, VectorField
from weakflow.operators import divergence_of
from weakflow.picard import (
    ConvergenceError,
    FixedPointMap,
    SolverConfig,
    data_delta,
    estimate_constants,
    fixed_point_residual,
    make_probe,
    momentum_residual,
    persistence_report,
    picard_solve,
    prepare_in_regime,
    recover_pressure,
    regime_epsilon,
    smallness_report,
    weak3,
)
from weakflow.problem import well_prepared_data, zero_problem

G = GridSpec(2 * math.pi, 16)


@pytest.fixture(scope="module")
def raw():
    return well_prepared_data(G, 1, [1, 4], 1.0)


@pytest.fixture(scope="module")
def consts(raw):
    return estimate_constants(G, 20, 7, gravity=raw.gravity)


@pytest.fixture(scope="module")
def solved(raw, consts):
    data = prepare_in_regime(raw, consts, 0.5)
    u, th, tr = picard_solve(data, SolverConfig(), consts)
    return data, u, th, tr


@pytest.mark.parametrize("kw", [{"max_iterations": 0}, {"residual_tol": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_zero_forces_give_zero_solution():
    u, th, tr = picard_solve(zero_problem(G), SolverConfig())
    assert tr.converged and len(tr) == 1
    assert not u.components.any() and not th.values.any()


def test_probes_are_admissible():
    for i in range(4):
        u, th, V = make_probe(G, 3, i)
        assert np.abs(divergence_of(VectorField(G, u)).values).max() < 1e-12 * np.abs(u).max()
        assert abs(th.mean()) < 1e-15 * np.abs(th).max() + 1e-18
    a = make_probe(G, 3, 5)
    b = make_probe(G, 3, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_constants_monotone_in_probe_count(raw, consts):
    small = estimate_constants(G, 10, 7, gravity=raw.gravity)
    for name in ("C_B1", "C_B2", "C_L"):
        assert getattr(consts, name) >= getattr(small, name)
    for p in consts.C1:
        assert consts.C1[p] >= small.C1[p]


def test_C1_rises_towards_three_halves(consts):
    assert consts.C1[1.6] > consts.C1[2.0] > consts.C1[3.0]


def test_constants_need_gravity_for_L():
    c = estimate_constants(G, 10, 7)
    assert c.C_L == 0.0 and c.C_L_slope == 0.0
    assert regime_epsilon(c) == pytest.approx(1 / (9 * c.C_B))
    with pytest.raises(ValueError):
        estimate_constants(G, 5, 7)


def test_prepare_in_regime_hits_target(raw, consts):
    data = prepare_in_regime(raw, consts, 0.5)
    eps = regime_epsilon(consts)
    assert data_delta(data) == pytest.approx(0.5 * eps, rel=1e-12)
    rep = smallness_report(data, consts)
    assert rep.in_regime
    assert rep.contraction_bound < 1


def test_smallness_flags_large_data(raw, consts):
    rep = smallness_report(raw.scaled(1e3), consts)
    assert not rep.in_regime
    assert not rep.condition_9dCB


def test_solution_is_fixed_point(solved):
    data, u, th, tr = solved
    assert tr.converged
    assert fixed_point_residual(u, th, data) <= 1e-10
    # restarting from the solution reproduces it after one application
    T = FixedPointMap(data)
    tu, tt = T(u.components, th.values)
    dv = G.cell_volume
    assert weak3(tu - u.components, dv) <= 1e-10 * weak3(u.components, dv)


def test_iterates_divergence_free(solved):
    data, u, th, tr = solved
    assert np.abs(divergence_of(u).values).max() <= 1e-12 * u.max_abs()


def test_trace_rows(solved):
    _, _, _, tr = solved
    rows = tr.rows()
    assert [r["n"] for r in rows] == list(range(len(tr)))
    assert {"u_weak3", "theta_weak3", "increment", "ratio", "u_Linf"} <= set(rows[0])
    assert np.all(tr.ratios(floor=1e-14) < 1)


def test_pressure_and_momentum(solved):
    data, u, th, _ = solved
    P = recover_pressure(u, th, data)
    assert abs(P.values.mean()) < 1e-14
    f2 = data.f_force.l2()
    assert momentum_residual(u, th, P, data) <= 1e-8 * f2


def test_persistence_rows(solved):
    data, u, th, _ = solved
    rows = persistence_report(u, th, data)
    assert [r["p"] for r in rows] == ["4", "5", "7", "inf"]
    assert all(r["passed"] for r in rows)


def test_divergence_raises_with_trace(raw, consts):
    with pytest.raises(ConvergenceError) as exc:
        picard_solve(raw.scaled(400.0), SolverConfig(max_iterations=80), consts)
    tr = exc.value.trace
    assert tr.outside_regime and not tr.converged
    assert len(tr) >= 1


def test_max_iterations_raises(raw, consts):
    data = prepare_in_regime(raw, consts, 0.5)
    with pytest.raises(ConvergenceError, match="no convergence"):
        picard_solve(data, SolverConfig(max_iterations=2))


def test_toy_mode_changes_map(raw):
    toy = raw.with_localizer(well_prepared_data(G, 1, [1, 4], 1.0, toy=True).toy_localizer).scaled(0.05)
    full = raw.scaled(0.05)
    a = picard_solve(toy, SolverConfig(toy_mode=True))[0]
    b = picard_solve(full, SolverConfig())[0]
    assert not np.allclose(a.components, b.components, rtol=0, atol=1e-14)
