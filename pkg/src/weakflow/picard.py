"""Picard construction of the steady solution and its diagnostics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import GridSpec, ScalarField, VectorField, fft3
from .lorentz import LorentzParams, lorentz_from_sorted, lorentz_quasi_norm
from .operators import (
    b1_hat,
    b2_hat,
    dealias_hat,
    div_hat,
    div_tensor_hat,
    grad_hat,
    inv_lap_hat,
    l_hat,
    leray_hat,
    neg_lap_hat,
    to_real,
    truncate,
)
from .problem import ProblemData

INF = math.inf
WEAK3 = LorentzParams(3.0, INF)
DEFAULT_P_LIST = (4.0, 5.0, 7.0, INF)


class ConvergenceError(RuntimeError):
    """Picard iteration did not reach the residual tolerance."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 200
    residual_tol: float = 1e-10
    p_list: tuple = DEFAULT_P_LIST
    toy_mode: bool = False
    divergence_factor: float = 1e6

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))


# --- norms on raw arrays ------------------------------------------------------


def _mag(a: np.ndarray) -> np.ndarray:
    if a.ndim == 3:
        return np.abs(a).ravel()
    return np.sqrt((a.reshape(a.shape[0], -1) ** 2).sum(axis=0))


def array_norm(a: np.ndarray, dv: float, params) -> float:
    return lorentz_from_sorted(np.sort(_mag(a))[::-1], dv, params)


def array_lp(a: np.ndarray, dv: float, p: float) -> float:
    m = _mag(a)
    top = m.max() if m.size else 0.0
    if top == 0:
        return 0.0
    if p == INF:
        return float(top)
    return float(top * (((m / top) ** p).sum() * dv) ** (1.0 / p))


def weak3(a: np.ndarray, dv: float) -> float:
    return array_norm(a, dv, WEAK3)


# --- the fixed-point map --------------------------------------------------------


class FixedPointMap:
    """T(u, θ) = (u₀ + B(u,u) + L(θ), θ₀ + B₂(θ,u)) on raw arrays."""

    def __init__(self, data: ProblemData, toy_mode: bool = False):
        if toy_mode and data.toy_localizer is None:
            raise ValueError("toy mode needs a localizer φ in the problem data")
        self.data = data
        self.grid = data.grid
        self.toy = toy_mode
        g = self.grid
        self.u0 = data.lifted_u0.components
        self.th0 = data.lifted_theta0.values
        self.gvec = truncate(data.gravity.components, g)
        self.phi = truncate(data.toy_localizer.values, g) if toy_mode else None

    def parts(self, u: np.ndarray, th: np.ndarray):
        g = self.grid
        ut = truncate(u, g)
        tt = truncate(th, g)
        bu = to_real(b1_hat(ut, None, g, self.phi, pre_truncated=True))
        lt = to_real(l_hat(tt, self.gvec, g, pre_truncated=True))
        bt = to_real(b2_hat(tt, ut, g, pre_truncated=True))
        return bu, lt, bt

    def __call__(self, u, th):
        bu, lt, bt = self.parts(u, th)
        return self.u0 + bu + lt, self.th0 + bt


# --- constants by probing -----------------------------------------------------------


def _bump(grid: GridSpec, rng, ncomp: int | None):
    L = grid.box_length
    x = grid.mesh()
    sigma = L * rng.uniform(0.05, 0.15)
    sigma = max(sigma, 2.0 * grid.spacing)
    ctr = rng.uniform(-0.2, 0.2, size=3) * L
    r2 = sum((x[i] - ctr[i]) ** 2 for i in range(3))
    env = np.exp(-0.5 * r2 / sigma ** 2)
    shape = (3,) if ncomp else ()
    a = rng.normal(size=shape + (4,))
    mod = a[..., 0, None, None, None]
    for i in range(3):
        mod = mod + a[..., i + 1, None, None, None] * (x[i] - ctr[i]) / sigma
    return env * mod


def _smooth_random(grid: GridSpec, rng, ncomp: int | None):
    n = grid.mode_numbers().astype(float)
    rad = np.sqrt(n[:, None, None] ** 2 + n[None, :, None] ** 2 + n[None, None, :] ** 2)
    kc = rng.uniform(1.5, grid.points_per_axis / 6)
    env = np.exp(-0.5 * (rad / kc) ** 2)
    env[0, 0, 0] = 0.0
    shape = (3,) + grid.shape if ncomp else grid.shape
    noise = rng.normal(size=shape)
    return to_real(fft3(noise) * env)


def make_probe(grid: GridSpec, seed: int, index: int):
    """(u, θ, V) probe triple: div-free u, zero-mean θ, generic vector V.

    Even indices give localized bumps, odd ones smooth random fields. Every
    probe has its own generator, so a larger probe set extends a smaller one.
    """
    rng = np.random.default_rng([int(seed), int(index)])
    make = _bump if index % 2 == 0 else _smooth_random
    u = make(grid, rng, 3)
    th = make(grid, rng, None)
    V = make(grid, rng, 3)
    u = truncate(u, grid)
    u = to_real(leray_hat(fft3(u), grid))
    th = truncate(th - th.mean(), grid)
    V = truncate(V - V.mean(axis=(1, 2, 3), keepdims=True), grid)
    return u, th, V


def _p1(p):
    return 1.0 / (2.0 / 3.0 + 1.0 / p)


@dataclass
class ConstantsReport:
    probe_count: int
    seed: int
    C_B1: float
    C_B2: float
    C_L: float
    gravity_norm: float
    C1: dict
    C1p: dict
    argmax: dict = field(default_factory=dict)

    @property
    def C_B(self) -> float:
        return max(self.C_B1, self.C_B2)

    @property
    def C_L_slope(self) -> float:
        return self.C_L / self.gravity_norm if self.gravity_norm > 0 else 0.0

    def epsilon(self) -> float:
        return regime_epsilon(self)

    def rows(self) -> list[dict]:
        out = []
        for name, val in (("B1", self.C_B1), ("B2", self.C_B2), ("B", self.C_B), ("L", self.C_L), ("L_slope", self.C_L_slope)):
            out.append(
                {
                    "operator": name,
                    "p": 3.0,
                    "probe_count": self.probe_count,
                    "empirical_constant": val,
                    "max_ratio_field_seed": self.argmax.get(name, -1),
                }
            )
        for p, val in self.C1.items():
            out.append(
                {"operator": "C1", "p": p, "probe_count": self.probe_count, "empirical_constant": val,
                 "max_ratio_field_seed": self.argmax.get(f"C1:{p}", -1)}
            )
        for p, val in self.C1p.items():
            out.append(
                {"operator": "C1p", "p": p, "probe_count": self.probe_count, "empirical_constant": val,
                 "max_ratio_field_seed": self.argmax.get(f"C1p:{p}", -1)}
            )
        return out


def gravity_norm(gvec: VectorField) -> float:
    """‖g⃗‖ in L^{3/2,1}."""
    return lorentz_quasi_norm(gvec, LorentzParams(1.5, 1.0))


C1_P_LIST = (1.6, 2.0, 3.0, 4.0, 7.0, 12.0)
C1P_P_LIST = (3.5, 4.0, 5.0, 7.0, 12.0)


def estimate_constants(
    grid: GridSpec,
    probe_count: int,
    seed: int,
    gravity: VectorField | None = None,
    p_list=C1_P_LIST,
    p_list_prime=C1P_P_LIST,
) -> ConstantsReport:
    """Max observed ratios of the operator bounds over ``probe_count`` probes.

    C_L needs a fixed gravity field; without one it is reported as 0.
    Probes with a zero norm are skipped.
    """
    if probe_count < 10:
        raise ValueError("probe_count must be at least 10")
    dv = grid.cell_volume
    best = {"B1": 0.0, "B2": 0.0, "L": 0.0}
    arg = {}
    c1 = {float(p): 0.0 for p in p_list}
    c1p = {float(p): 0.0 for p in p_list_prime}
    gv = truncate(gravity.components, grid) if gravity is not None else None
    gnorm = gravity_norm(gravity) if gravity is not None else 0.0

    def bump(key, val, i):
        if val > best.get(key, 0.0):
            best[key] = val
            arg[key] = i

    for i in range(probe_count):
        u, th, V = make_probe(grid, seed, i)
        nu, nt = weak3(u, dv), weak3(th, dv)
        if nu == 0 or nt == 0:
            continue
        bu = to_real(b1_hat(u, None, grid, pre_truncated=True))
        bump("B1", weak3(bu, dv) / nu ** 2, i)
        bt = to_real(b2_hat(th, u, grid, pre_truncated=True))
        bump("B2", weak3(bt, dv) / (nt * nu), i)
        if gv is not None:
            lt = to_real(l_hat(th, gv, grid, pre_truncated=True))
            bump("L", weak3(lt, dv) / nt, i)
        # Young-type ratios on the tensor u⊗u and the vector V
        T = u[:, None] * u[None, :]
        That = dealias_hat(fft3(T), grid)
        m1 = to_real(-inv_lap_hat(leray_hat(div_tensor_hat(That, grid), grid), grid, check=False))
        Tm = np.sqrt((T.reshape(9, -1) ** 2).sum(axis=0))
        for p in c1:
            r = 3 * p / (3 + p)
            den = float(Tm.max() * (((Tm / Tm.max()) ** r).sum() * dv) ** (1 / r))
            val = array_lp(m1, dv, p) / den if den > 0 else 0.0
            if val > c1[p]:
                c1[p] = val
                arg[f"C1:{p}"] = i
        Vh = fft3(V)
        m3 = to_real(inv_lap_hat(leray_hat(Vh, grid), grid, check=False))
        for p in c1p:
            den = array_lp(V, dv, _p1(p))
            val = array_lp(m3, dv, p) / den if den > 0 else 0.0
            if val > c1p[p]:
                c1p[p] = val
                arg[f"C1p:{p}"] = i
    return ConstantsReport(probe_count, seed, best["B1"], best["B2"], best["L"], gnorm, c1, c1p, arg)


def regime_epsilon(c: ConstantsReport) -> float:
    """ε_emp = min(1/(3 C_L-slope), 1/(9 C_B))."""
    cands = []
    if c.C_L_slope > 0:
        cands.append(1.0 / (3.0 * c.C_L_slope))
    if c.C_B > 0:
        cands.append(1.0 / (9.0 * c.C_B))
    return min(cands) if cands else INF


# --- smallness -------------------------------------------------------------------


@dataclass
class SmallnessReport:
    delta: float
    gravity_norm: float
    C_B_emp: float
    C_L_emp: float
    condition_3CL: bool
    condition_9dCB: bool
    condition_sum: bool

    @property
    def in_regime(self) -> bool:
        return self.condition_3CL and self.condition_9dCB and self.condition_sum

    @property
    def contraction_bound(self) -> float:
        return self.C_L_emp + 6.0 * self.delta * self.C_B_emp

    def to_json(self) -> dict:
        return asdict(self)


def data_delta(data: ProblemData) -> float:
    dv = data.grid.cell_volume
    return weak3(data.lifted_u0.components, dv) + weak3(data.lifted_theta0.values, dv)


def smallness_report(data: ProblemData, constants: ConstantsReport, toy_mode: bool = False) -> SmallnessReport:
    """Conditions 3C_L < 1, 9δC_B < 1, C_L + 6δC_B < 1 with empirical constants.

    C_L is the probed slope times ‖g⃗‖_{L^{3/2,1}} of this data. In toy mode
    C_B is multiplied by ‖φ‖_∞.
    """
    delta = data_delta(data)
    gn = gravity_norm(data.gravity)
    cl = constants.C_L_slope * gn
    cb = constants.C_B
    if toy_mode and data.toy_localizer is not None:
        cb = max(constants.C_B1 * data.toy_localizer.max_abs(), constants.C_B2)
    return SmallnessReport(
        delta=delta,
        gravity_norm=gn,
        C_B_emp=cb,
        C_L_emp=cl,
        condition_3CL=bool(3 * cl < 1),
        condition_9dCB=bool(9 * delta * cb < 1),
        condition_sum=bool(cl + 6 * delta * cb < 1),
    )


def prepare_in_regime(data: ProblemData, constants: ConstantsReport, fraction: float = 0.5) -> ProblemData:
    """Rescale forces and gravity so δ = ‖g⃗‖_{L^{3/2,1}} = fraction·ε_emp."""
    eps = regime_epsilon(constants)
    delta = data_delta(data)
    gn = gravity_norm(data.gravity)
    if not math.isfinite(eps):
        raise ValueError("empirical constants are degenerate; cannot place data in the regime")
    sf = fraction * eps / delta if delta > 0 else 0.0
    sg = fraction * eps / gn if gn > 0 else 0.0
    return data.rescaled(sf, sg)


# --- the iteration ------------------------------------------------------------------


@dataclass
class IterationRecord:
    n: int
    u_weak: float
    theta_weak: float
    u_lp: dict
    increment: float
    ratio: float


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    outside_regime: bool = False
    converged: bool = False
    final_residual: float = math.nan
    reason: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def pair_norms(self) -> np.ndarray:
        return np.array([r.u_weak + r.theta_weak for r in self.records])

    @property
    def increments(self) -> np.ndarray:
        return np.array([r.increment for r in self.records])

    def ratios(self, floor: float = 0.0) -> np.ndarray:
        """Contraction ratios inc_{n}/inc_{n-1}, skipping increments below ``floor``."""
        inc = self.increments
        out = []
        for a, b in zip(inc[:-1], inc[1:]):
            if a > floor and b > floor:
                out.append(b / a)
        return np.array(out)

    def rows(self) -> list[dict]:
        out = []
        for r in self.records:
            row = {"n": r.n, "u_weak3": r.u_weak, "theta_weak3": r.theta_weak}
            for p, v in r.u_lp.items():
                row[f"u_L{_ptag(p)}"] = v
            row["increment"] = r.increment
            row["ratio"] = r.ratio
            out.append(row)
        return out


def _ptag(p):
    if p == INF:
        return "inf"
    return f"{p:g}"


def picard_solve(data: ProblemData, config: SolverConfig, constants: ConstantsReport | None = None):
    """Iterate u_{n+1} = u₀ + B(u_n,u_n) + L(u_n) from u₀.

    Record n holds the norms of u_n and the increment ‖T(u_n) − u_n‖ in
    L^{3,∞} + L^{3,∞}; the returned state is the first u_n whose increment
    (its own fixed-point residual) is at most residual_tol·‖u₀‖.
    """
    T = FixedPointMap(data, config.toy_mode)
    dv = data.grid.cell_volume
    trace = IterationTrace()
    if constants is not None:
        trace.outside_regime = not smallness_report(data, constants, config.toy_mode).in_regime
    u, th = T.u0, T.th0
    scale = weak3(u, dv) + weak3(th, dv)
    guard = config.divergence_factor * max(scale, 1e-300)
    prev = None
    for n in range(config.max_iterations):
        tu, tt = T(u, th)
        inc = weak3(tu - u, dv) + weak3(tt - th, dv)
        uw, tw = weak3(u, dv), weak3(th, dv)
        lp = {p: array_lp(u, dv, p) + array_lp(th, dv, p) for p in config.p_list}
        ratio = inc / prev if prev else math.nan
        trace.records.append(IterationRecord(n, uw, tw, lp, inc, ratio))
        if inc <= config.residual_tol * scale:
            trace.converged = True
            trace.final_residual = inc / scale if scale > 0 else 0.0
            trace.reason = "residual below tolerance"
            return VectorField(data.grid, u), ScalarField(data.grid, th), trace
        if not (math.isfinite(inc) and uw + tw < guard) or not np.all(np.isfinite(tu)):
            trace.reason = "iterates diverged"
            trace.final_residual = inc / scale if scale > 0 else math.inf
            raise ConvergenceError(f"Picard iterates diverged at n = {n}", trace)
        prev = inc
        u, th = tu, tt
    trace.reason = "max_iterations reached"
    trace.final_residual = trace.records[-1].increment / scale
    raise ConvergenceError(f"no convergence within {config.max_iterations} iterations", trace)


def fixed_point_residual(u: VectorField, theta: ScalarField, data: ProblemData, toy_mode: bool = False) -> float:
    """‖(u,θ) − T(u,θ)‖ / ‖u₀‖ in L^{3,∞} + L^{3,∞}."""
    T = FixedPointMap(data, toy_mode)
    dv = data.grid.cell_volume
    tu, tt = T(u.components, theta.values)
    num = weak3(tu - u.components, dv) + weak3(tt - theta.values, dv)
    den = weak3(T.u0, dv) + weak3(T.th0, dv)
    return num / den if den > 0 else num


def persistence_report(u: VectorField, theta: ScalarField, data: ProblemData, p_list=DEFAULT_P_LIST, slack: float = 1e-8):
    """Rows p, ‖u‖_p, ‖θ‖_p, ‖u₀‖_p pair, bound 2‖u₀‖_p, pass flag."""
    dv = data.grid.cell_volume
    rows = []
    for p in p_list:
        p = float(p)
        nu = array_lp(u.components, dv, p)
        nt = array_lp(theta.values, dv, p)
        n0 = array_lp(data.lifted_u0.components, dv, p) + array_lp(data.lifted_theta0.values, dv, p)
        rows.append(
            {
                "p": _ptag(p),
                "u_norm": nu,
                "theta_norm": nt,
                "pair_norm": nu + nt,
                "u0_pair_norm": n0,
                "bound": 2 * n0,
                "passed": bool(nu + nt <= 2 * n0 + slack),
            }
        )
    return rows


def recover_pressure(u: VectorField, theta: ScalarField, data: ProblemData) -> ScalarField:
    """P = (−Δ)⁻¹div div(u⊗u) − (−Δ)⁻¹div(θg⃗) − (−Δ)⁻¹div f⃗, zero mean."""
    g = data.grid
    uh = _uu_hat(u.components, g)
    tg = _tg_hat(theta.values, data.gravity.components, g)
    fh = fft3(data.f_force.components)
    rhs = div_hat(div_tensor_hat(uh, g), g) - div_hat(tg, g) - div_hat(fh, g)
    rhs[0, 0, 0] = 0.0
    return ScalarField(g, to_real(inv_lap_hat(rhs, g, check=False)))


def _uu_hat(u, g):
    ut = truncate(u, g)
    return dealias_hat(fft3(ut[:, None] * ut[None, :]), g)


def _tg_hat(th, gv, g):
    return dealias_hat(fft3(truncate(th, g)[None] * truncate(gv, g)), g)


def momentum_residual(u: VectorField, theta: ScalarField, P: ScalarField, data: ProblemData) -> float:
    """‖−Δu + div(u⊗u) + ∇P − θg⃗ − f⃗‖₂ with the k = 0 mode excluded.

    The mean of θg⃗ has no counterpart on the torus (every other term is a
    derivative), so it is not part of the balance.
    """
    g = data.grid
    r = (
        neg_lap_hat(fft3(u.components), g)
        + div_tensor_hat(_uu_hat(u.components, g), g)
        + grad_hat(fft3(P.values), g)
        - _tg_hat(theta.values, data.gravity.components, g)
        - fft3(data.f_force.components)
    )
    r[:, 0, 0, 0] = 0.0
    return float(np.sqrt(g.total_volume * (np.abs(r) ** 2).sum()))
