"""Far-field evaluation of the steady solution and profile diagnostics.

Outside the support of the data the velocity is evaluated from the integral
equation by direct quadrature with the Oseen tensor G (the kernel of
(−Δ)⁻¹ℙ): u(x) = Σ G(x−y)(θg⃗ + f⃗)h³ − Σ ∂_jG(x−y)(φ u⊗u)_{·j} h³. The
monopole of θg⃗ then gives u ≈ (M1 + d(d·M1))/(8π|x|) along direction d,
where M1 = ∫θg⃗.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarField, VectorField
from .picard import ConvergenceError, SolverConfig, picard_solve, smallness_report
from .potential import dipole_potential_at, stokes_potential_at
from .problem import ProblemData

INF = math.inf


def default_directions() -> np.ndarray:
    """±e_i and four body diagonals, as unit rows (10, 3)."""
    axes = np.vstack([np.eye(3), -np.eye(3)])
    diag = np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]], dtype=float) / math.sqrt(3.0)
    return np.vstack([axes, diag])


@dataclass(frozen=True, eq=False)
class ProfileSamples:
    radii: np.ndarray  # (m,)
    directions: np.ndarray  # (n_dir, 3)
    values: np.ndarray  # (m, n_dir) |u(R d)|
    scaled: np.ndarray  # (m, n_dir) R |u(R d)|
    vectors: np.ndarray | None = None  # (m, n_dir, 3)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly ascending")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (r.size, len(self.directions)):
            raise ValueError("values must have shape (n_radii, n_directions)")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite far-field values")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, radii, directions, values, vectors=None):
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls(radii, np.asarray(directions, dtype=float), values, radii[:, None] * values, vectors)

    def rows(self) -> list[dict]:
        out = []
        for j, R in enumerate(self.radii):
            for d in range(len(self.directions)):
                out.append({"radius": R, "direction_id": d, "u_abs": self.values[j, d], "R_u_abs": self.scaled[j, d]})
        return out


@dataclass
class ProfileVerdict:
    M1: np.ndarray
    fitted_constant: float
    relative_gap: float  # against |M1| as printed (no 1/4π, no projector)
    M2_estimate: float
    lp_flags: dict
    newton_constant: float = 0.0  # |M1|/(4π)
    projected_constants: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted_by_direction: np.ndarray = field(default_factory=lambda: np.zeros(0))
    projected_gap: float = math.nan  # max_d |fitted_d − predicted_d|/predicted_d
    sample_gap: float = math.nan  # same, over every outer-third sample
    constant_discrepancy: bool = True

    def to_json(self) -> dict:
        return {
            "M1": [float(x) for x in self.M1],
            "M1_norm": float(np.linalg.norm(self.M1)),
            "fitted_constant": self.fitted_constant,
            "relative_gap": self.relative_gap,
            "newton_constant": self.newton_constant,
            "projected_constants": [float(x) for x in self.projected_constants],
            "fitted_by_direction": [float(x) for x in self.fitted_by_direction],
            "projected_gap": self.projected_gap,
            "sample_gap": self.sample_gap,
            "M2_estimate": self.M2_estimate,
            "lp_flags": {str(k): v for k, v in self.lp_flags.items()},
            "constant_discrepancy": self.constant_discrepancy,
        }


def profile_constant(theta: ScalarField, gvec: VectorField) -> np.ndarray:
    """M1 = Σ θ g⃗ h³."""
    if theta.grid != gvec.grid:
        raise ValueError("grid mismatch")
    return (theta.values[None] * gvec.components).sum(axis=(1, 2, 3)) * theta.grid.cell_volume


def projected_constant(M1, d) -> float:
    """|M1 + d(d·M1)|/(8π): the Oseen monopole along unit direction d."""
    M1 = np.asarray(M1, dtype=float)
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    return float(np.linalg.norm(M1 + d * (d @ M1)) / (8 * math.pi))


def _check_exterior(grid, pts):
    r = np.linalg.norm(np.atleast_2d(pts), axis=1)
    if np.any(r < grid.box_length / 2 * (1 - 1e-12)):
        raise ValueError(f"far-field points need |x| >= L/2 = {grid.box_length / 2}")


def far_field_terms(u: VectorField, theta: ScalarField, data: ProblemData, x) -> dict:
    """Buoyancy, nonlinear and force contributions to u at exterior points."""
    g = data.grid
    if data.toy_localizer is None:
        raise ValueError("far-field evaluation needs the toy-model localizer φ")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    _check_exterior(g, pts)
    buoy = VectorField(g, theta.values[None] * data.gravity.components)
    W = data.toy_localizer.values * (u.components[:, None] * u.components[None, :])
    return {
        "buoyancy": stokes_potential_at(buoy, None, pts),
        "nonlinear": stokes_potential_at(None, W, pts, grid=g),
        "force": stokes_potential_at(data.f_force, None, pts),
    }


def far_field_velocity(u: VectorField, theta: ScalarField, data: ProblemData, x) -> np.ndarray:
    single = np.asarray(x).ndim == 1
    t = far_field_terms(u, theta, data, x)
    out = t["buoyancy"] + t["nonlinear"] + t["force"]
    return out[0] if single else out


def far_field_temperature(u: VectorField, theta: ScalarField, data: ProblemData, x) -> np.ndarray:
    """θ(x) = (−Δ)⁻¹g − (−Δ)⁻¹div(θu) by Newton and dipole quadrature."""
    g = data.grid
    single = np.asarray(x).ndim == 1
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    _check_exterior(g, pts)
    flux = VectorField(g, theta.values[None] * u.components)
    out = dipole_potential_at(data.g_force, flux, pts, grid=g)
    return out[0] if single else out


def geometric_radii(r_min: float, r_max: float, n: int) -> np.ndarray:
    return np.geomspace(r_min, r_max, n)


def sample_profile(u, theta, data, radii=None, directions=None, n_radii: int = 40, span=(0.5, 20.0)) -> ProfileSamples:
    """|u(R d)| on geometric radii between span[0]·L and span[1]·L."""
    L = data.grid.box_length
    if radii is None:
        radii = geometric_radii(span[0] * L, span[1] * L, n_radii)
    dirs = default_directions() if directions is None else np.asarray(directions, dtype=float)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.asarray(radii, dtype=float)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, 3)
    vec = far_field_velocity(u, theta, data, pts).reshape(radii.size, len(dirs), 3)
    vals = np.linalg.norm(vec, axis=2)
    return ProfileSamples.from_values(radii, dirs, vals, vec)


def _outer(samples: ProfileSamples) -> slice:
    m = samples.radii.size
    return slice(m - max(1, m // 3), m)


def shell_weights(radii: np.ndarray) -> np.ndarray:
    """R_j² ΔR_j with ΔR_j the half-distance to the neighbouring radii."""
    r = np.asarray(radii, dtype=float)
    edges = np.empty(r.size + 1)
    edges[1:-1] = 0.5 * (r[1:] + r[:-1])
    edges[0] = r[0] - (edges[1] - r[0])
    edges[-1] = r[-1] + (r[-1] - edges[-2])
    edges[0] = max(edges[0], 0.0)
    return r ** 2 * np.diff(edges)


def shell_partial_sums(radii, values, p: float, r_min: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative Σ |u|ᵖ R²ΔR over radii > r_min; ``values`` may be (m,) or (m, n_dir)."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        v = (v ** p).mean(axis=1)
    else:
        v = v ** p
    keep = r > r_min
    w = shell_weights(r[keep])
    return r[keep], np.cumsum(v[keep] * w)


def log_growth_ratio(radii, values, p: float, M2: float, R: float) -> float:
    """S([M2, R²]) / S([M2, R]) for the shell sums; ≈ 2 for 1/R at p = 3 with M2 = 1."""
    r, S = shell_partial_sums(radii, values, p, M2)
    if r.size == 0 or R ** 2 > r[-1] * (1 + 1e-12) or R < r[0]:
        raise ValueError("radii do not cover [M2, R^2]")
    i1 = np.searchsorted(r, R, side="right") - 1
    i2 = np.searchsorted(r, R ** 2 * (1 + 1e-12), side="right") - 1
    return float(S[i2] / S[i1])


def lower_bound_radius(samples: ProfileSamples, constants) -> float:
    """Smallest sampled R with |u(R' d)| ≥ c_d/(2R') for all R' ≥ R and all d.

    Returns nan when the bound fails at the outermost radius.
    """
    c = np.asarray(constants, dtype=float)
    ok = samples.values >= c[None, :] / (2 * samples.radii[:, None])
    ok_all = ok.all(axis=1)
    if not ok_all[-1]:
        return math.nan
    j = ok_all.size - 1
    while j > 0 and ok_all[j - 1]:
        j -= 1
    return float(samples.radii[j])


def nonexistence_diagnostic(samples: ProfileSamples, p_list, M2: float, min_radii: int = 10, threshold: float = 0.1) -> dict:
    """p → "diverges" when the last third of the shell sums beyond M2 adds
    more than ``threshold`` of the total, else "converges"."""
    if M2 is None or not math.isfinite(M2):
        raise ValueError("lower-bound radius M2 not found; diagnostic undefined")
    beyond = int(np.count_nonzero(samples.radii > M2 * (1 - 1e-12)))
    if beyond < min_radii:
        raise ValueError(f"only {beyond} radii beyond M2 = {M2:g} (need {min_radii})")
    flags = {}
    for p in p_list:
        _, S = shell_partial_sums(samples.radii, samples.values, p, M2 * (1 - 1e-12))
        m = S.size
        cut = m - max(1, m // 3)
        tail = (S[-1] - S[cut - 1]) / S[-1] if S[-1] > 0 else 0.0
        flags[float(p)] = "diverges" if tail > threshold else "converges"
    return flags


def profile_verdict(samples: ProfileSamples, M1, p_list=(1.5, 2.0, 3.0, 4.0, 6.0)) -> ProfileVerdict:
    M1 = np.asarray(M1, dtype=float)
    norm = float(np.linalg.norm(M1))
    out = _outer(samples)
    fitted = float(np.median(samples.scaled[out]))
    by_dir = np.median(samples.scaled[out], axis=0)
    pred = np.array([projected_constant(M1, d) for d in samples.directions])
    with np.errstate(divide="ignore", invalid="ignore"):
        pgap = float(np.max(np.abs(by_dir - pred) / pred)) if norm > 0 else math.nan
        sgap = float(np.max(np.abs(samples.scaled[out] - pred[None]) / pred[None])) if norm > 0 else math.nan
    rel = abs(fitted - norm) / norm if norm > 0 else math.nan
    try:
        M2 = lower_bound_radius(samples, pred)
        flags = nonexistence_diagnostic(samples, p_list, M2)
    except ValueError as exc:
        M2 = math.nan
        flags = {float(p): f"rejected: {exc}" for p in p_list}
    return ProfileVerdict(
        M1=M1,
        fitted_constant=fitted,
        relative_gap=rel,
        M2_estimate=M2,
        lp_flags=flags,
        newton_constant=norm / (4 * math.pi),
        projected_constants=pred,
        fitted_by_direction=by_dir,
        projected_gap=pgap,
        sample_gap=sgap,
        constant_discrepancy=bool(rel > 0.1),
    )


@dataclass
class DecayReport:
    sup_u: float
    sup_theta: float
    argmax_u: tuple
    argmax_theta: tuple

    def to_json(self):
        return {
            "sup_u": self.sup_u,
            "sup_theta": self.sup_theta,
            "argmax_u": list(self.argmax_u),
            "argmax_theta": list(self.argmax_theta),
        }


def decay_check(u: VectorField, theta: ScalarField, data: ProblemData | None = None, radii=None, directions=None) -> DecayReport:
    """sup (1+|x|)|u| and sup (1+|x|)|θ| over the grid and, when data is
    given, over far-field samples."""
    g = u.grid
    r = g.radius()
    x = g.mesh()
    wu = (1 + r) * u.magnitude()
    wt = (1 + r) * np.abs(theta.values)
    iu = np.unravel_index(int(np.argmax(wu)), wu.shape)
    it = np.unravel_index(int(np.argmax(wt)), wt.shape)
    su, locu = float(wu[iu]), tuple(float(x[k][iu]) for k in range(3))
    st, loct = float(wt[it]), tuple(float(x[k][it]) for k in range(3))
    if data is not None:
        L = g.box_length
        rr = geometric_radii(0.5 * L, 20 * L, 16) if radii is None else np.asarray(radii, dtype=float)
        dirs = default_directions() if directions is None else np.asarray(directions, dtype=float)
        pts = (rr[:, None, None] * dirs[None]).reshape(-1, 3)
        rad = np.linalg.norm(pts, axis=1)
        fu = (1 + rad) * np.linalg.norm(far_field_velocity(u, theta, data, pts), axis=1)
        ft = (1 + rad) * np.abs(far_field_temperature(u, theta, data, pts))
        if fu.max() > su:
            su, locu = float(fu.max()), tuple(pts[int(np.argmax(fu))])
        if ft.max() > st:
            st, loct = float(ft.max()), tuple(pts[int(np.argmax(ft))])
    return DecayReport(su, st, locu, loct)


def kappa_scan(base: ProblemData, kappas, config: SolverConfig, constants) -> dict:
    """Solve at κ·(f⃗, g, g⃗) for each κ and fit |M1(κ)| against κ² and κ²+κ³."""
    rows = []
    for k in kappas:
        k = float(k)
        data = base.scaled(k)
        row = {"kappa": k, "M1_norm": math.nan, "status": "ok", "iterations": 0}
        if k == 0:
            row["M1_norm"] = 0.0
            rows.append(row)
            continue
        rep = smallness_report(data, constants, config.toy_mode)
        if not rep.in_regime:
            row["status"] = "failed: outside contraction regime"
            rows.append(row)
            continue
        try:
            u, th, tr = picard_solve(data, config, constants)
        except ConvergenceError as exc:
            row["status"] = f"failed: {exc}"
            rows.append(row)
            continue
        row["M1_norm"] = float(np.linalg.norm(profile_constant(th, data.gravity)))
        row["iterations"] = len(tr)
        rows.append(row)
    good = [r for r in rows if r["status"] == "ok" and r["kappa"] > 0]
    ks = np.array([r["kappa"] for r in good])
    ms = np.array([r["M1_norm"] for r in good])
    fit = {"c2": math.nan, "residual_k2": math.nan, "c2_cubic": math.nan, "c3_cubic": math.nan}
    if ks.size >= 1:
        c2 = float((ms * ks ** 2).sum() / (ks ** 4).sum())
        fit["c2"] = c2
        fit["residual_k2"] = float(np.linalg.norm(ms - c2 * ks ** 2) / np.linalg.norm(ms))
    if ks.size >= 2:
        A = np.stack([ks ** 2, ks ** 3], axis=1)
        coef, *_ = np.linalg.lstsq(A, ms, rcond=None)
        fit["c2_cubic"], fit["c3_cubic"] = float(coef[0]), float(coef[1])
    for r in rows:
        if r["status"] == "ok" and r["kappa"] > 0 and math.isfinite(fit["c2"]):
            r["k2_fit_residual"] = (r["M1_norm"] - fit["c2"] * r["kappa"] ** 2) / r["M1_norm"]
        else:
            r["k2_fit_residual"] = math.nan
    return {"rows": rows, "fit": fit}
