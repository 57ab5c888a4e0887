"""Mild solutions of the time-dependent system by a product-trapezoidal
exponential integrator.

Per step the Duhamel integral ∫₀^Δt e^{(Δt−s)Δ} N(s) ds is approximated by
interpolating N linearly between the step ends and integrating the heat
kernel against it exactly:

    v⁺ = e^{ΔtΔ} v + w₀(Δ) N(v) + w₁(Δ) N(v⁺),

with w₀ = Δt ψ(z), w₁ = Δt (φ₁(z) − ψ(z)), z = Δt|k|², φ₁(z) = (1 − e^{−z})/z
and ψ(z) = (1 − (1+z)e^{−z})/z². At z = 0 this is the trapezoidal rule. The
implicit end is resolved by ``picard_depth`` fixed-point sweeps. Because the
weights sum to Δt φ₁(z), a steady state of the integral equation is an exact
fixed point of one step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, VectorField, fft3
from .operators import (
    _k2,
    _key,
    dealias_hat,
    div_hat,
    div_tensor_hat,
    leray_hat,
    to_real,
    truncate,
)
from .problem import ProblemData

BLOWUP_FACTOR = 1e6


class BlowUpError(RuntimeError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Trajectory:
    times: np.ndarray
    states: list  # (VectorField, ScalarField) per stored time
    v_l2: np.ndarray
    v_inf: np.ndarray
    th_l2: np.ndarray
    th_inf: np.ndarray
    p: float = 4.0
    max_divergence: float = 0.0

    @property
    def weighted_sups(self) -> np.ndarray:
        """t^{3/(2p)}(‖v‖_∞, ‖ϑ‖_∞) per time, shape (M+1, 2)."""
        w = self.times ** (1.5 / self.p)
        return np.stack([w * self.v_inf, w * self.th_inf], axis=1)

    def rows(self) -> list[dict]:
        ws = self.weighted_sups
        return [
            {
                "t": float(t),
                "v_l2": float(a),
                "v_inf": float(b),
                "theta_l2": float(c),
                "theta_inf": float(d),
                "weighted_v": float(ws[i, 0]),
                "weighted_theta": float(ws[i, 1]),
            }
            for i, (t, a, b, c, d) in enumerate(zip(self.times, self.v_l2, self.v_inf, self.th_l2, self.th_inf))
        ]


def _phi1(z):
    out = np.empty_like(z)
    small = z < 1e-4
    zs = z[small]
    out[small] = 1 - zs / 2 + zs ** 2 / 6
    zb = z[~small]
    out[~small] = -np.expm1(-zb) / zb
    return out


def _psi(z):
    """ψ(z) = ∫₀¹ s e^{−zs} ds = (1 − (1+z)e^{−z})/z²."""
    out = np.empty_like(z)
    small = z < 1e-2
    zs = z[small]
    out[small] = 0.5 - zs / 3 + zs ** 2 / 8 - zs ** 3 / 30 + zs ** 4 / 144
    zb = z[~small]
    out[~small] = (-np.expm1(-zb) - zb * np.exp(-zb)) / zb ** 2
    return out


class _Nonlinearity:
    """N(v, ϑ) = (ℙ(f⃗ + ϑg⃗ − div(φ v⊗v)), g − div(ϑv)) in spectral form.

    The velocity forcing has its k = 0 mode removed, matching the steady
    operator L; ϑ's forcing is mean-free already. ``linear`` drops the two
    transport terms.
    """

    def __init__(self, data: ProblemData, toy_mode: bool, linear: bool = False):
        g = data.grid
        self.grid = g
        self.linear = linear
        self.fh = leray_hat(fft3(data.f_force.components), g)
        self.gh = fft3(data.g_force.values)
        self.gvec = truncate(data.gravity.components, g)
        self.phi = truncate(data.toy_localizer.values, g) if toy_mode else None

    def __call__(self, vh, th_h):
        g = self.grid
        th = to_real(dealias_hat(th_h, g))
        buoy = dealias_hat(fft3(th[None] * self.gvec), g)
        buoy[:, 0, 0, 0] = 0.0
        if self.linear:
            return self.fh + leray_hat(buoy, g), self.gh
        v = to_real(dealias_hat(vh, g))
        T = v[:, None] * v[None, :]
        if self.phi is not None:
            T = T * self.phi
        adv = div_tensor_hat(dealias_hat(fft3(T), g), g)
        nv = self.fh + leray_hat(buoy - adv, g)
        nt = self.gh - div_hat(dealias_hat(fft3(th[None] * v), g), g)
        return nv, nt


def _norms(vh, th_h, g):
    v = to_real(vh)
    th = to_real(th_h)
    dv = g.cell_volume
    return (
        float(np.sqrt((v ** 2).sum() * dv)),
        float(np.sqrt((v ** 2).sum(axis=0).max())),
        float(np.sqrt((th ** 2).sum() * dv)),
        float(np.abs(th).max()),
    )


def _pack(times, states, norms, p, max_div):
    a = np.array(norms)
    return Trajectory(np.array(times), states, a[:, 0], a[:, 1], a[:, 2], a[:, 3], p, max_div)


def mild_solve(
    v0: VectorField,
    th0: ScalarField,
    data: ProblemData,
    T: float,
    M: int,
    picard_depth: int = 2,
    p: float = 4.0,
    toy_mode: bool = False,
    store_states: bool = True,
    linear: bool = False,
) -> Trajectory:
    """Advance (v, ϑ) over [0, T] in M equal steps.

    ``linear=True`` drops the quadratic terms (forced heat flow). Raises
    BlowUpError carrying the partial trajectory when ‖v‖₂ + ‖ϑ‖₂ exceeds
    1e6 times the larger of its initial value and the lifted data's.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if M < 4:
        raise ValueError("need M >= 4 steps")
    if picard_depth < 2:
        raise ValueError("picard_depth must be >= 2")
    g = v0.grid
    if th0.grid != g or data.grid != g:
        raise ValueError("grid mismatch")
    vh = fft3(v0.components)
    if np.abs(div_hat(vh, g)).max() > 1e-10 * max(np.abs(vh).max(), 1e-300):
        raise ValueError("initial velocity is not divergence-free")
    th_h = fft3(th0.values)
    N = _Nonlinearity(data, toy_mode, linear)

    dt = T / M
    z = dt * _k2(*_key(g))
    E = np.exp(-z)
    w0 = dt * _psi(z)
    w1 = dt * (_phi1(z) - _psi(z))

    times = [0.0]
    states = [(v0, th0)] if store_states else []
    norms = [_norms(vh, th_h, g)]
    scale = max(norms[0][0] + norms[0][2], data.lifted_u0.l2() + data.lifted_theta0.l2())
    max_div = 0.0
    for step in range(1, M + 1):
        nv0, nt0 = N(vh, th_h)
        v_new = E * vh + (w0 + w1) * nv0
        t_new = E * th_h + (w0 + w1) * nt0
        for _ in range(picard_depth):
            nv1, nt1 = N(v_new, t_new)
            v_new = E * vh + w0 * nv0 + w1 * nv1
            t_new = E * th_h + w0 * nt0 + w1 * nt1
        vh, th_h = v_new, t_new
        nrm = _norms(vh, th_h, g)
        times.append(step * dt)
        norms.append(nrm)
        if store_states:
            states.append((VectorField(g, to_real(vh)), ScalarField(g, to_real(th_h))))
        top = np.abs(vh).max()
        if top > 0:
            max_div = max(max_div, float(np.abs(div_hat(vh, g)).max() / top))
        if not all(math.isfinite(x) for x in nrm) or nrm[0] + nrm[2] > BLOWUP_FACTOR * scale:
            raise BlowUpError(f"blow-up sentinel tripped at t = {step * dt:g}", _pack(times, states, norms, p, max_div))
    return _pack(times, states, norms, p, max_div)


def cond_sup_diagnostic(traj: Trajectory, p: float | None = None) -> dict:
    """sup over t > 0 of t^{3/(2p)}‖v‖_∞ and t^{3/(2p)}‖ϑ‖_∞ with maximizers."""
    p = traj.p if p is None else float(p)
    if traj.times.size < 2:
        raise ValueError("trajectory has no positive times")
    t = traj.times[1:]
    w = t ** (1.5 / p)
    wv = w * traj.v_inf[1:]
    wt = w * traj.th_inf[1:]
    iv, it = int(np.argmax(wv)), int(np.argmax(wt))
    return {"sup_v": float(wv[iv]), "t_v": float(t[iv]), "sup_theta": float(wt[it]), "t_theta": float(t[it]), "p": p}


@dataclass
class SteadinessReport:
    drift: float
    drift_by_time: np.ndarray
    flagged: bool
    blew_up: bool = False
    max_divergence: float = 0.0

    def to_json(self):
        return {
            "drift": self.drift,
            "flagged_inconsistent": self.flagged,
            "blew_up": self.blew_up,
            "max_divergence": self.max_divergence,
        }


def steadiness_check(
    u_steady: VectorField,
    th_steady: ScalarField,
    data: ProblemData,
    T: float = 1.0,
    M: int = 64,
    picard_depth: int = 2,
    toy_mode: bool = False,
    v0: VectorField | None = None,
    th0: ScalarField | None = None,
) -> SteadinessReport:
    """max_t (‖v(t) − u‖₂ + ‖ϑ(t) − θ‖₂)/(‖u‖₂ + ‖θ‖₂) for the flow started
    at the steady state (or at ``v0``, ``th0`` when given)."""
    v0 = u_steady if v0 is None else v0
    th0 = th_steady if th0 is None else th0
    den = u_steady.l2() + th_steady.l2()
    try:
        traj = mild_solve(v0, th0, data, T, M, picard_depth, toy_mode=toy_mode)
        blew = False
    except BlowUpError as exc:
        traj = exc.trajectory
        blew = True
    drift = []
    for v, th in traj.states:
        num = (v - u_steady).l2() + (th - th_steady).l2()
        drift.append(num / den if den > 0 else num)
    drift = np.array(drift)
    d = float(drift.max()) if drift.size else 0.0
    return SteadinessReport(d, drift, flagged=bool(d > 1e-2), blew_up=blew, max_divergence=traj.max_divergence)
