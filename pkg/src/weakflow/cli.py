"""Command line entry point.

    weakflow <scenario> --config run.json [--out DIR] [--seed N] [--dump-fields]
    weakflow compare RUN_A RUN_B [--tolerances tol.json]

Exit status: 0 success, 2 informative failure (outside the contraction
regime, no convergence, blow-up, a failed check), 1 invalid input or I/O
error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ._accel import apply_thread_setting
from .config import SCENARIOS, ScenarioConfig, load_config
from .reports import Manifest, SchemaMismatch, compare_reports, write_csv, write_json, write_plot_data

log = logging.getLogger("weakflow")

EXIT_OK, EXIT_INPUT, EXIT_INFORMATIVE = 0, 1, 2


class InformativeFailure(Exception):
    """A mathematically meaningful negative result; reports are still written."""


class _Run:
    """Shared pipeline: grid, data, constants, solve, with report helpers."""

    def __init__(self, cfg: ScenarioConfig, out: Path, manifest: Manifest, dump: bool):
        from .grid import GridSpec
        from .picard import SolverConfig

        self.cfg = cfg
        self.out = out
        self.manifest = manifest
        self.dump = dump
        self.grid = GridSpec(cfg.grid.L, cfg.grid.N)
        s = cfg.solver
        self.solver = SolverConfig(s.max_iterations, s.residual_tol, s.p_list, cfg.data.toy_mode, s.divergence_factor)
        self._constants = None
        self._data = None
        self._solution = None

    # reports
    def json(self, name, obj):
        self.manifest.report(write_json(self.out / name, obj))

    def csv(self, name, rows, columns=None):
        self.manifest.report(write_csv(self.out / name, rows, columns))

    def plot(self, name, x, y):
        self.manifest.report(write_plot_data(self.out / name, x, y))

    # pipeline
    def raw_data(self, seed=None):
        from .problem import well_prepared_data

        d = self.cfg.data
        data = well_prepared_data(
            self.grid, d.seed if seed is None else seed, d.band, d.amplitude, toy=d.toy_mode, beta=d.window_beta
        )
        if d.kappa is not None:
            data = data.scaled(d.kappa)
        return data

    @property
    def constants(self):
        if self._constants is None:
            from .picard import estimate_constants

            base = self.raw_data()
            c = self.cfg.constants
            self._constants = estimate_constants(self.grid, c.probe_count, c.seed, gravity=base.gravity)
            self.manifest.stage("constants")
        return self._constants

    def place(self, data):
        from .picard import prepare_in_regime

        frac = self.cfg.data.delta_fraction
        if frac is None or data_is_zero(data):
            return data
        return prepare_in_regime(data, self.constants, frac)

    @property
    def data(self):
        if self._data is None:
            self._data = self.place(self.raw_data())
        return self._data

    def smallness(self, data=None):
        from .picard import smallness_report

        return smallness_report(self.data if data is None else data, self.constants, self.cfg.data.toy_mode)

    def solve(self):
        """Solve once; writes smallness.json and trace.csv. Raises
        InformativeFailure outside the regime or without convergence."""
        if self._solution is not None:
            return self._solution
        from .picard import ConvergenceError, picard_solve

        data = self.data
        rep = self.smallness(data)
        self.json("smallness.json", {**rep.to_json(), "in_regime": rep.in_regime, "contraction_bound": rep.contraction_bound,
                                     "epsilon_emp": self.constants.epsilon()})
        try:
            u, th, trace = picard_solve(data, self.solver, self.constants)
        except ConvergenceError as exc:
            self.csv("trace.csv", exc.trace.rows())
            self.json("solution.json", {"converged": False, "reason": exc.trace.reason, "iterations": len(exc.trace),
                                        "final_residual": exc.trace.final_residual, "in_regime": rep.in_regime})
            self.manifest.stage("solve")
            raise InformativeFailure(str(exc))
        self.manifest.stage("solve")
        self.csv("trace.csv", trace.rows())
        self.json("solution.json", solution_summary(u, th, data, trace, rep))
        if self.dump:
            from .fieldio import write_field, write_vector

            write_vector(self.out / "u", u)
            write_field(self.out / "theta.wkfl", th)
        self._solution = (u, th, trace)
        if not rep.in_regime:
            raise InformativeFailure("data lie outside the empirical contraction regime")
        return self._solution


def data_is_zero(data) -> bool:
    return not (np.any(data.f_force.components) or np.any(data.g_force.values) or np.any(data.gravity.components))


def solution_summary(u, th, data, trace, rep) -> dict:
    from .grid import fft3
    from .picard import momentum_residual, recover_pressure

    P = recover_pressure(u, th, data)
    res = momentum_residual(u, th, P, data)
    g = data.grid
    src = fft3(th.values[None] * data.gravity.components + data.f_force.components)
    src[:, 0, 0, 0] = 0.0
    scale = float(np.sqrt(g.total_volume * (np.abs(src) ** 2).sum()))
    ratios = trace.ratios(floor=1e-13 * max(trace.increments[0], 1e-300)) if len(trace) else np.zeros(0)
    norms = trace.pair_norms
    return {
        "converged": True,
        "iterations": len(trace),
        "final_residual": trace.final_residual,
        "delta": rep.delta,
        "max_pair_norm": float(norms.max()) if norms.size else 0.0,
        "max_pair_norm_over_delta": float(norms.max() / rep.delta) if rep.delta > 0 else 0.0,
        "max_contraction_ratio": float(ratios.max()) if ratios.size else 0.0,
        "contraction_bound": rep.contraction_bound,
        "in_regime": rep.in_regime,
        "u_l2": u.l2(),
        "theta_l2": th.l2(),
        "momentum_residual": res,
        "momentum_residual_relative": res / scale if scale > 0 else res,
        "pressure_mean": float(P.values.mean()),
    }


# --- scenarios ------------------------------------------------------------------


def run_constants(run: _Run):
    c = run.constants
    run.csv("constants.csv", c.rows())
    rep = run.smallness()
    run.json("smallness.json", {**rep.to_json(), "in_regime": rep.in_regime, "contraction_bound": rep.contraction_bound,
                                "epsilon_emp": c.epsilon()})


def run_solve(run: _Run):
    run.solve()


def run_persistence(run: _Run):
    from .picard import persistence_report

    u, th, _ = run.solve()
    rows = persistence_report(u, th, run.data, run.solver.p_list)
    run.csv("persistence.csv", rows)
    if not all(r["passed"] for r in rows):
        raise InformativeFailure("Lp persistence bound violated")


def run_asymptotics(run: _Run):
    from .asymptotics import decay_check, geometric_radii, profile_constant, profile_verdict, sample_profile, shell_partial_sums

    if not run.cfg.data.toy_mode:
        raise ValueError("the asymptotics scenario needs data.toy_mode = true (localised nonlinearity)")
    u, th, _ = run.solve()
    a = run.cfg.asymptotics
    L = run.grid.box_length
    radii = geometric_radii(a.span[0] * L, a.span[1] * L, a.n_radii)
    samples = sample_profile(u, th, run.data, radii=radii)
    run.manifest.stage("far_field")
    M1 = profile_constant(th, run.data.gravity)
    verdict = profile_verdict(samples, M1, a.p_list)
    run.csv("profile.csv", samples.rows())
    run.plot("profile.dat", samples.radii, np.median(samples.scaled, axis=1))
    run.json("verdict.json", verdict.to_json())
    rows = []
    if math.isfinite(verdict.M2_estimate):
        for p in a.p_list:
            r, S = shell_partial_sums(samples.radii, samples.values, p, verdict.M2_estimate * (1 - 1e-12))
            rows.extend({"p": p, "radius": float(x), "partial_sum": float(s)} for x, s in zip(r, S))
    run.csv("shell_sums.csv", rows, ["p", "radius", "partial_sum"])
    run.json("decay.json", decay_check(u, th, run.data).to_json())


def run_kappa_scan(run: _Run):
    from .asymptotics import kappa_scan

    res = kappa_scan(run.data, run.cfg.asymptotics.kappas, run.solver, run.constants)
    run.csv("kappa.csv", res["rows"])
    ok = sorted((r for r in res["rows"] if r["status"] == "ok" and r["kappa"] > 0), key=lambda r: r["kappa"])
    fit = dict(res["fit"])
    fit["smallest_pair_ratio"] = math.nan
    for lo, hi in zip(ok, ok[1:]):
        if math.isclose(hi["kappa"], 2 * lo["kappa"]):
            fit["smallest_pair_ratio"] = hi["M1_norm"] / lo["M1_norm"]
            fit["smallest_pair"] = [lo["kappa"], hi["kappa"]]
            break
    run.json("kappa_fit.json", fit)
    if any(r["status"] != "ok" for r in res["rows"]):
        raise InformativeFailure("some κ values failed to converge")


def _trajectory_reports(run, traj, name="trajectory"):
    from .parabolic import cond_sup_diagnostic

    run.csv(f"{name}.csv", traj.rows())
    run.plot(f"{name}_weighted_v.dat", traj.times, traj.weighted_sups[:, 0])
    if traj.times.size > 1:
        run.json(f"{name}_cond_sup.json", {**cond_sup_diagnostic(traj), "max_divergence": traj.max_divergence})


def run_evolve(run: _Run):
    from .parabolic import BlowUpError, mild_solve

    f = run.cfg.flow
    data = run.data
    try:
        traj = mild_solve(data.lifted_u0, data.lifted_theta0, data, f.T, f.M, f.picard_depth, f.p, run.cfg.data.toy_mode,
                          store_states=False)
    except BlowUpError as exc:
        _trajectory_reports(run, exc.trajectory)
        raise InformativeFailure(str(exc))
    run.manifest.stage("evolve")
    _trajectory_reports(run, traj)


def run_steadiness(run: _Run):
    from .operators import project, truncate
    from .parabolic import steadiness_check
    from .grid import VectorField

    u, th, _ = run.solve()
    f = run.cfg.flow
    v0 = None
    if f.perturbation > 0:
        rng = np.random.default_rng(f.perturbation_seed)
        pert = project(VectorField(run.grid, truncate(rng.standard_normal((3,) + run.grid.shape), run.grid)))
        v0 = u + pert * (f.perturbation * u.l2() / pert.l2())
    rep = steadiness_check(u, th, run.data, f.T, f.M, f.picard_depth, run.cfg.data.toy_mode, v0=v0)
    run.manifest.stage("steadiness")
    times = np.linspace(0.0, f.T, rep.drift_by_time.size)
    run.json("steadiness.json", {**rep.to_json(), "T": f.T, "M": f.M, "perturbation": f.perturbation})
    run.csv("drift.csv", [{"t": float(t), "drift": float(d)} for t, d in zip(times, rep.drift_by_time)])
    if rep.blew_up or rep.flagged:
        raise InformativeFailure("flow left the steady state (drift above 1e-2 or blow-up)")


def run_liouville(run: _Run):
    from .liouville import CutoffFamily, caccioppoli_ratio, calibrate_caccioppoli, liouville_verdict
    from .picard import picard_solve
    from .problem import zero_problem

    lc = run.cfg.liouville
    L = run.grid.box_length
    radii = [fr * L for fr in lc.radius_fractions]
    inv = CutoffFamily(tuple(radii)).check_invariants(run.grid)
    # C_emp from the forced reference solution
    u_ref, th_ref, _ = run.solve()
    C_emp = calibrate_caccioppoli([(th_ref, u_ref)], radii, lc.p, lc.calibration_margin)
    cal = [{"R": R, "ratio": caccioppoli_ratio(th_ref, u_ref, R, lc.p)} for R in radii]
    rows, reports = [], {}
    ok = True
    for seed in lc.seeds:
        base = run.raw_data(seed=seed)
        hom = run.place(zero_problem(run.grid, base.gravity, toy=run.cfg.data.toy_mode))
        u, th, trace = picard_solve(hom, run.solver)
        rep = liouville_verdict(u, th, lc.p, lc.q, radii, data=hom, C_emp=C_emp)
        reports[str(seed)] = {**rep.to_json(), "iterations": len(trace), "gravity_max": hom.gravity.max_abs()}
        for R, a, b, c in zip(rep.radii, rep.lhs, rep.rhs1, rep.rhs2):
            rows.append({"seed": seed, "R": R, "lhs": a, "rhs1": b, "rhs2": c, "C_emp": C_emp,
                         "holds": bool(a <= C_emp * (b + c) * (1 + 1e-12))})
        ok = ok and rep.verdict == "trivial" and rep.caccioppoli_holds
    run.csv("caccioppoli.csv", rows)
    run.json("liouville.json", {"C_emp": C_emp, "calibration": cal, "cutoff_invariants": {str(k): v for k, v in inv.items()},
                                "runs": reports})
    if not ok:
        raise InformativeFailure("homogeneous runs not consistent with the trivial solution")


def run_selftest(run: _Run):
    from .selftest import run_selftest as selftest

    s = run.cfg.selftest
    rows = selftest(run.grid, s.seed, s.field_count)
    columns = ["check", "value", "bound", "passed", "field", "p", "q", "p1", "p2", "sigma"]
    run.csv("selftest.csv", rows, columns)
    failed = [r for r in rows if not r["passed"]]
    run.json("selftest.json", {"checks": len(rows), "failed": len(failed)})
    if failed:
        raise InformativeFailure(f"{len(failed)} Lorentz-space checks failed")


SCENARIO_FUNCS = {
    "solve": run_solve,
    "persistence": run_persistence,
    "asymptotics": run_asymptotics,
    "kappa-scan": run_kappa_scan,
    "evolve": run_evolve,
    "steadiness": run_steadiness,
    "liouville": run_liouville,
    "lorentz-selftest": run_selftest,
    "constants": run_constants,
}


def run(cfg: ScenarioConfig, scenario: str, out: Path | None = None, dump_fields: bool = False) -> int:
    """Execute one scenario; returns the exit status."""
    if cfg.scenario is not None and cfg.scenario != scenario:
        raise ValueError(f"config is for scenario {cfg.scenario!r}, not {scenario!r}")
    out = Path(out or cfg.output_dir or Path("runs") / scenario)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, scenario, cfg.echo(), cfg.data.seed)
    r = _Run(cfg, out, manifest, dump_fields)
    try:
        SCENARIO_FUNCS[scenario](r)
    except InformativeFailure as exc:
        manifest.finish("informative-failure", EXIT_INFORMATIVE, str(exc))
        print(f"weakflow: {exc}", file=sys.stderr)
        return EXIT_INFORMATIVE
    except Exception as exc:
        manifest.finish("invalid-input", EXIT_INPUT, str(exc))
        raise
    manifest.finish("ok", EXIT_OK)
    return EXIT_OK


def _parser():
    ap = argparse.ArgumentParser(prog="weakflow", description="Steady Boussinesq solver and verification suite")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="report directory")
        sp.add_argument("--seed", type=int, help="override data.seed")
        sp.add_argument("--dump-fields", action="store_true", help="write solution fields in the binary format")
    cp = sub.add_parser("compare")
    cp.add_argument("run_a")
    cp.add_argument("run_b")
    cp.add_argument("--tolerances", help="JSON tolerance spec")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        apply_thread_setting()
        if args.command == "compare":
            res = compare_reports(args.run_a, args.run_b, args.tolerances)
            print(json.dumps(res, indent=2, default=str))
            return EXIT_OK if res["identical"] else EXIT_INFORMATIVE
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return run(cfg, args.command, args.out, args.dump_fields)
    except SchemaMismatch as exc:
        print(f"weakflow: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # validation, I/O and domain errors are user-facing
        print(f"weakflow: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
