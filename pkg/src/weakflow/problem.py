"""Problem data (f⃗, g, g⃗), their lifts, and well-prepared test data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import i0

from .grid import GridSpec, ScalarField, VectorField, fft3, ifft3, physical_phase
from .operators import lift_scalar, lift_velocity, localizer, neg_lap_hat, leray_hat, to_real

MEAN_TOL = 1e-12
DEFAULT_BETA = 12.0


@dataclass(frozen=True, eq=False)
class ProblemData:
    f_force: VectorField
    g_force: ScalarField
    gravity: VectorField
    lifted_u0: VectorField
    lifted_theta0: ScalarField
    toy_localizer: ScalarField | None = None

    @property
    def grid(self) -> GridSpec:
        return self.gravity.grid

    def scaled(self, kappa: float) -> "ProblemData":
        """All three inputs multiplied by κ."""
        return make_problem(self.f_force * kappa, self.g_force * kappa, self.gravity * kappa, self.toy_localizer)

    def rescaled(self, force_scale: float, gravity_scale: float) -> "ProblemData":
        return make_problem(
            self.f_force * force_scale, self.g_force * force_scale, self.gravity * gravity_scale, self.toy_localizer
        )

    def with_localizer(self, phi: ScalarField | None) -> "ProblemData":
        return make_problem(self.f_force, self.g_force, self.gravity, phi)

    def lift_defect(self) -> float:
        """max relative mismatch of (−Δ)u₀ vs ℙf⃗ and (−Δ)θ₀ vs g."""
        g = self.grid
        pf = to_real(leray_hat(fft3(self.f_force.components), g))
        a = to_real(neg_lap_hat(fft3(self.lifted_u0.components), g)) - pf
        b = to_real(neg_lap_hat(fft3(self.lifted_theta0.values), g)) - self.g_force.values
        sa = max(np.abs(pf).max(), 1e-300)
        sb = max(np.abs(self.g_force.values).max(), 1e-300)
        return float(max(np.abs(a).max() / sa, np.abs(b).max() / sb))


def _check_mean(vals: np.ndarray, what: str):
    scale = np.abs(vals).max()
    m = np.abs(vals.mean(axis=(-3, -2, -1))).max()
    if scale > 0 and m > MEAN_TOL * scale:
        raise ValueError(f"{what} must have zero mean (|mean| = {m:.3e}, max = {scale:.3e})")


def make_problem(f: VectorField, g: ScalarField, gvec: VectorField, toy_localizer: ScalarField | None = None) -> ProblemData:
    for a in (g, gvec) + ((toy_localizer,) if toy_localizer is not None else ()):
        if a.grid != f.grid:
            raise ValueError("problem data live on different grids")
    _check_mean(f.components, "f_force")
    _check_mean(g.values, "g_force")
    return ProblemData(f, g, gvec, lift_velocity(f), lift_scalar(g), toy_localizer)


def zero_problem(grid: GridSpec, gravity: VectorField | None = None, toy: bool = False) -> ProblemData:
    gv = gravity if gravity is not None else VectorField.zeros(grid)
    return make_problem(VectorField.zeros(grid), ScalarField.zeros(grid), gv, localizer(grid) if toy else None)


def kaiser_shell(grid: GridSpec, band, beta: float = DEFAULT_BETA) -> np.ndarray:
    """Radial Kaiser window on |n| in the open annulus (k_min, k_max).

    W = (I0(β√(1−s²)) − 1)/(I0(β) − 1) with s = (|n|−c)/w; smooth in |n|
    and exactly zero on and outside the band edge.
    """
    kmin, kmax = float(band[0]), float(band[1])
    n = grid.mode_numbers().astype(float)
    rad = np.sqrt(n[:, None, None] ** 2 + n[None, :, None] ** 2 + n[None, None, :] ** 2)
    c = 0.5 * (kmin + kmax)
    w = 0.5 * (kmax - kmin)
    s = (rad - c) / w
    inside = np.abs(s) < 1
    W = np.zeros(rad.shape)
    W[inside] = (i0(beta * np.sqrt(1 - s[inside] ** 2)) - 1.0) / (i0(beta) - 1.0)
    return W


def _band_check(grid: GridSpec, band):
    if len(band) != 2:
        raise ValueError("band must be [k_min, k_max]")
    kmin, kmax = float(band[0]), float(band[1])
    if kmin < 1:
        raise ValueError(f"band needs k_min >= 1 (got {kmin})")
    if kmax <= kmin:
        raise ValueError(f"band needs k_max > k_min (got {band})")
    if kmax >= grid.points_per_axis / 3:
        raise ValueError(f"band edge k_max = {kmax} leaves no dealias headroom (need < N/3 = {grid.points_per_axis / 3:.3f})")


def _random_profile(grid, rng, window, kmax):
    """Window times a low-order polynomial in n with Hermitian structure.

    a0 + n·C n/k² is real and even, i b·n/k is odd and imaginary, so
    c(−n) = conj c(n) holds exactly; the phase factor moves the centre of
    the resulting wave packet to x = 0.
    """
    n = grid.mode_numbers().astype(float)
    nn = (n[:, None, None], n[None, :, None], n[None, None, :])
    a0 = rng.uniform(0.5, 1.5)
    b = rng.normal(size=3)
    C = rng.normal(size=(3, 3)) * 0.5
    C = 0.5 * (C + C.T)
    poly = np.full(window.shape, a0, dtype=complex)
    for i in range(3):
        poly = poly + 1j * b[i] * nn[i] / kmax
        for j in range(3):
            poly = poly + C[i, j] * nn[i] * nn[j] / kmax ** 2
    c = window * poly * physical_phase(grid)
    return c


def _unit_field(c: np.ndarray) -> np.ndarray:
    """Inverse transform scaled by Σ|c_k|, which bounds max|f| by 1 and does
    not depend on N once the band is resolved."""
    s = np.abs(c).sum()
    v = ifft3(c).real
    return v / s if s > 0 else v


def well_prepared_data(
    grid: GridSpec,
    seed: int,
    band,
    amplitude: float,
    toy: bool = False,
    beta: float = DEFAULT_BETA,
) -> ProblemData:
    """Band-limited, zero-mean f⃗, g, g⃗ localised around the origin.

    Each field is a smooth radial window in |n| times a seeded low-order
    polynomial, normalised to unit coefficient sum (so max|f| ≤ 1) and scaled by ``amplitude``. The
    gravity components reuse g's profile with positive weights, so
    ∫(−Δ)⁻¹(g) g_i dx > 0 for every i.
    """
    _band_check(grid, band)
    rng = np.random.default_rng(seed)
    W = kaiser_shell(grid, band, beta)
    if not W.any():
        raise ValueError(f"band {band} contains no lattice modes")
    kmax = float(band[1])
    gh = _unit_field(_random_profile(grid, rng, W, kmax))
    f = np.stack([_unit_field(_random_profile(grid, rng, W, kmax)) for _ in range(3)])
    weights = rng.uniform(0.5, 1.5, size=3)
    gvec = weights[:, None, None, None] * gh[None]
    # the constructions are exactly mean-free in spectral space; remove the
    # roundoff mean left by the inverse transform
    f -= f.mean(axis=(1, 2, 3), keepdims=True)
    gh = gh - gh.mean()
    gvec -= gvec.mean(axis=(1, 2, 3), keepdims=True)
    a = float(amplitude)
    phi = localizer(grid) if toy else None
    return make_problem(VectorField(grid, a * f), ScalarField(grid, a * gh), VectorField(grid, a * gvec), phi)


def homogeneous_data(grid: GridSpec, seed: int, band, gravity_amplitude: float, toy: bool = False) -> ProblemData:
    """f⃗ = 0, g = 0 and a small well-prepared gravity field."""
    base = well_prepared_data(grid, seed, band, 1.0, toy=toy)
    return zero_problem(grid, base.gravity * gravity_amplitude, toy=toy)
