"""Cut-offs, the two sides of the local energy (Caccioppoli) estimate, and
the triviality verdict for homogeneous solutions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, ScalarField, VectorField, fft3
from .lorentz import LorentzParams, lorentz_quasi_norm
from .operators import grad_hat, to_real
from .picard import FixedPointMap, weak3
from .problem import ProblemData, zero_problem

TRIVIAL_TOL = 1e-8


def cutoff_profile(s):
    """ψ(s) = 1 for s < 1/2, 0 for s >= 1, quintic smoothstep in between (C²)."""
    s = np.asarray(s, dtype=float)
    tau = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    out = 1.0 - tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)
    out = np.where(s < 0.5, 1.0, out)
    return np.where(s >= 1.0, 0.0, out)


def cutoff_profile_derivative(s):
    s = np.asarray(s, dtype=float)
    tau = 2.0 * s - 1.0
    d = -2.0 * 30.0 * tau ** 2 * (1.0 - tau) ** 2
    return np.where((s > 0.5) & (s < 1.0), d, 0.0)


@dataclass(frozen=True)
class CutoffFamily:
    radii: tuple = ()

    def evaluate(self, grid: GridSpec, R: float) -> ScalarField:
        return ScalarField(grid, cutoff_profile(grid.radius() / R))

    def gradient(self, grid: GridSpec, R: float) -> VectorField:
        r = grid.radius()
        x = grid.mesh()
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = np.where(r > 0, cutoff_profile_derivative(r / R) / (R * r), 0.0)
        return VectorField(grid, fac[None] * x)

    def check_invariants(self, grid: GridSpec) -> dict:
        """Per radius: range, exact 1 on B_{R/2}, 0 outside B_R, gradient support."""
        r = grid.radius()
        out = {}
        for R in self.radii:
            phi = self.evaluate(grid, R).values
            grad = self.gradient(grid, R).magnitude()
            inner = r < R / 2
            outer = r >= R
            shell = (r >= R / 2) & (r < R)
            out[float(R)] = {
                "in_range": bool(phi.min() >= 0 and phi.max() <= 1),
                "one_inside": float(np.abs(phi[inner] - 1).max()) if inner.any() else 0.0,
                "zero_outside": float(np.abs(phi[outer]).max()) if outer.any() else 0.0,
                "grad_outside_annulus": float(grad[~shell].max()) if (~shell).any() else 0.0,
            }
        return out


def _annulus(grid: GridSpec, R: float):
    r = grid.radius()
    return (r >= R / 2) & (r < R)


def _check_radius(grid, R):
    if not 0 < R <= grid.box_length / 2:
        raise ValueError(f"radius {R} must lie in (0, L/2] = (0, {grid.box_length / 2}]")


def caccioppoli_sides(theta: ScalarField, u: VectorField, R: float, p: float) -> tuple[float, float, float]:
    """(∫_{B_{R/2}}|∇θ|², (∫_C|θ|ᵖ)^{2/p} R^{1−6/p}, (∫_C|θ|ᵖ)^{2/p} R^{2−9/p} (∫_C|u|ᵖ)^{1/p})
    with C the annulus R/2 ≤ |x| < R."""
    g = theta.grid
    _check_radius(g, R)
    if not p > 3:
        raise ValueError(f"need p > 3, got {p}")
    dv = g.cell_volume
    grad = to_real(grad_hat(fft3(theta.values), g))
    ball = g.radius() < R / 2
    lhs = float(((grad ** 2).sum(axis=0)[ball]).sum() * dv)
    C = _annulus(g, R)
    It = float((np.abs(theta.values[C]) ** p).sum() * dv)
    Iu = float((u.magnitude()[C] ** p).sum() * dv)
    t1 = It ** (2.0 / p) * R ** (1.0 - 6.0 / p)
    t2 = It ** (2.0 / p) * R ** (2.0 - 9.0 / p) * Iu ** (1.0 / p)
    return lhs, t1, t2


def caccioppoli_ratio(theta, u, R, p) -> float:
    lhs, a, b = caccioppoli_sides(theta, u, R, p)
    if lhs == 0:
        return 0.0
    return lhs / (a + b) if a + b > 0 else math.inf


def calibrate_caccioppoli(pairs, radii, p: float, margin: float = 2.0) -> float:
    """C_emp = margin · max lhs/(rhs₁ + rhs₂) over reference (θ, u) pairs and radii."""
    best = 0.0
    for theta, u in pairs:
        for R in radii:
            best = max(best, caccioppoli_ratio(theta, u, R, p))
    return margin * best


def annulus_tail_norm(theta: ScalarField, R: float, p: float = 4.5, q: float = math.inf) -> float:
    """‖1_{C(R/2,R)} θ‖ in L^{p,q}."""
    g = theta.grid
    _check_radius(g, R)
    masked = ScalarField(g, np.where(_annulus(g, R), theta.values, 0.0))
    return lorentz_quasi_norm(masked, LorentzParams(p, q))


def homogeneous_residual(u: VectorField, theta: ScalarField, data: ProblemData) -> float:
    """Fixed-point residual of (u, θ) for the system without forces, relative
    to ‖(u, θ)‖ in L^{3,∞} (absolute if the fields vanish)."""
    hom = zero_problem(data.grid, data.gravity, toy=data.toy_localizer is not None)
    T = FixedPointMap(hom, toy_mode=False)
    dv = data.grid.cell_volume
    tu, tt = T(u.components, theta.values)
    num = weak3(tu - u.components, dv) + weak3(tt - theta.values, dv)
    den = weak3(u.components, dv) + weak3(theta.values, dv)
    return num / den if den > 0 else num


@dataclass
class LiouvilleReport:
    radii: list
    lhs: list
    rhs1: list
    rhs2: list
    tails: list
    grad_norms: list
    C_emp: float | None
    caccioppoli_holds: bool
    tail_decreasing: bool
    size: float
    residual: float
    verdict: str
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "radii": self.radii,
            "lhs": self.lhs,
            "rhs1": self.rhs1,
            "rhs2": self.rhs2,
            "tails": self.tails,
            "grad_norms": self.grad_norms,
            "C_emp": self.C_emp,
            "caccioppoli_holds": self.caccioppoli_holds,
            "tail_decreasing": self.tail_decreasing,
            "size_l2": self.size,
            "residual": self.residual,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def liouville_verdict(
    u: VectorField,
    theta: ScalarField,
    p: float,
    q: float,
    radii,
    data: ProblemData | None = None,
    C_emp: float | None = None,
    residual_tol: float = 1e-8,
    check_solution: bool = True,
) -> LiouvilleReport:
    """Tails, Caccioppoli sides and the triviality verdict.

    With ``check_solution`` the fields must solve the force-free system
    (forces in ``data`` must vanish, residual ≤ residual_tol); otherwise the
    verdict is "rejected". ``check_solution=False`` bypasses the gate for
    synthetic inputs.
    """
    g = u.grid
    radii = [float(R) for R in radii]
    notes = []
    residual = 0.0
    rejected = False
    if check_solution:
        if data is None:
            rejected, notes = True, ["no problem data supplied for the solution gate"]
        elif np.any(data.f_force.components) or np.any(data.g_force.values):
            rejected, notes = True, ["forces are not zero; the system is not homogeneous"]
        else:
            residual = homogeneous_residual(u, theta, data)
            if residual > residual_tol:
                rejected = True
                notes.append(f"fixed-point residual {residual:.3e} exceeds {residual_tol:g}")
    lhs, r1, r2, tails, grads = [], [], [], [], []
    gradsq = (to_real(grad_hat(fft3(theta.values), g)) ** 2).sum(axis=0)
    for R in radii:
        a, b, c = caccioppoli_sides(theta, u, R, p)
        lhs.append(a)
        r1.append(b)
        r2.append(c)
        tails.append(annulus_tail_norm(theta, R, 4.5, q))
        grads.append(float(np.sqrt(gradsq[g.radius() < R].sum() * g.cell_volume)))
    holds = True
    if C_emp is not None:
        holds = all(a <= C_emp * (b + c) * (1 + 1e-12) for a, b, c in zip(lhs, r1, r2))
    decreasing = all(t2 <= t1 * (1 + 1e-12) for t1, t2 in zip(tails, tails[1:]))
    size = u.l2() + theta.l2()
    if rejected:
        verdict = "rejected"
    elif size <= TRIVIAL_TOL * g.box_length ** 1.5:
        verdict = "trivial"
    else:
        verdict = "non-trivial-flagged"
        if not decreasing:
            notes.append("annulus tails do not decrease with R")
    return LiouvilleReport(radii, lhs, r1, r2, tails, grads, C_emp, holds, decreasing, size, residual, verdict, notes)
