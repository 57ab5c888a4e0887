"""Fourier multipliers: (−Δ)⁻¹, ∇, div, Leray projector, heat semigroup,
and the composite maps B, B₂, L and the localized toy bilinear term.

Odd-order symbols use the wavevector with the Nyquist component zeroed, so
they map real fields to real fields; even symbols (|k|², e^{-t|k|²}) use the
true wavevector. The Leray projector is built from the odd wavevector, which
keeps div∘ℙ = 0 exact.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    ScalarField,
    SpectralField,
    VectorField,
    _kvec,
    fft3,
    ifft3,
)
from .lorentz import lorentz_quasi_norm, LorentzParams

log = logging.getLogger(__name__)

ZERO_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class MultiplierSymbol:
    """A named Fourier symbol; value at k = 0 is fixed to 0."""

    name: str
    symbol: object  # callable grid -> array of symbol values
    zero_mode_value: float = 0.0

    def values(self, grid: GridSpec) -> np.ndarray:
        return self.symbol(grid)


# --- cached symbol arrays ---------------------------------------------------


@functools.lru_cache(maxsize=16)
def _kodd(L, N):
    out = []
    for k in _kvec(L, N):
        k = k.copy()
        k[np.abs(k) >= np.pi * N / L - 1e-9 * N / L] = 0.0  # Nyquist
        k.setflags(write=False)
        out.append(k)
    return tuple(out)


@functools.lru_cache(maxsize=16)
def _inv_k2(L, N):
    k1, k2, k3 = _kvec(L, N)
    kk = k1 ** 2 + k2 ** 2 + k3 ** 2
    with np.errstate(divide="ignore"):
        inv = np.where(kk > 0, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)
    inv.setflags(write=False)
    return inv


@functools.lru_cache(maxsize=16)
def _k2(L, N):
    k1, k2, k3 = _kvec(L, N)
    out = k1 ** 2 + k2 ** 2 + k3 ** 2
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=16)
def _inv_kodd2(L, N):
    k1, k2, k3 = _kodd(L, N)
    kk = k1 ** 2 + k2 ** 2 + k3 ** 2
    inv = np.where(kk > 0, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)
    inv.setflags(write=False)
    return inv


@functools.lru_cache(maxsize=16)
def _mask(N):
    from .grid import _dealias

    return _dealias(N)


def _key(grid: GridSpec):
    return grid.box_length, grid.points_per_axis


INV_LAPLACIAN = MultiplierSymbol("inv_laplacian", lambda g: _inv_k2(*_key(g)))
HEAT = MultiplierSymbol("heat", lambda g: _k2(*_key(g)))


def leray_symbol(grid: GridSpec, n) -> np.ndarray:
    """3x3 matrix δ - k kᵀ/|k|² at integer mode n (identity at n = 0)."""
    k = 2 * np.pi / grid.box_length * np.asarray(n, dtype=float)
    kk = k @ k
    if kk == 0:
        return np.eye(3)
    return np.eye(3) - np.outer(k, k) / kk


# --- array-level kernels (hat = spectral coefficients) -----------------------


def check_zero_mean(c: np.ndarray, what: str = "input"):
    c0 = c[..., 0, 0, 0]
    scale = np.abs(c).max()
    if scale > 0 and np.abs(c0).max() > ZERO_MEAN_TOL * scale:
        raise ValueError(
            f"{what} has non-zero mean (|c(0)| = {np.abs(c0).max():.3e}, max |c| = {scale:.3e}); "
            "(−Δ)⁻¹ is undefined on constants"
        )


def inv_lap_hat(c: np.ndarray, grid: GridSpec, check: bool = True) -> np.ndarray:
    if check:
        check_zero_mean(c)
    return c * _inv_k2(*_key(grid))


def neg_lap_hat(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    return c * _k2(*_key(grid))


def grad_hat(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = _kodd(*_key(grid))
    return np.stack([1j * kj * c for kj in k])


def div_hat(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = _kodd(*_key(grid))
    return 1j * (k[0] * c[0] + k[1] * c[1] + k[2] * c[2])


def div_tensor_hat(T: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(div T)_i = Σ_j ∂_j T_ij for T of shape (3, 3, N, N, N)."""
    k = _kodd(*_key(grid))
    return np.stack([1j * (k[0] * T[i, 0] + k[1] * T[i, 1] + k[2] * T[i, 2]) for i in range(3)])


def leray_hat(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = _kodd(*_key(grid))
    kc = (k[0] * c[0] + k[1] * c[1] + k[2] * c[2]) * _inv_kodd2(*_key(grid))
    return np.stack([c[j] - k[j] * kc for j in range(3)])


def heat_hat(c: np.ndarray, grid: GridSpec, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    return c * np.exp(-t * _k2(*_key(grid)))


def dealias_hat(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    return c * _mask(grid.points_per_axis)


def truncate(vals: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Physical values with every mode outside the 2/3 box removed."""
    return ifft3(fft3(vals) * _mask(grid.points_per_axis)).real


def to_real(c: np.ndarray) -> np.ndarray:
    return ifft3(c).real


# --- composite maps on raw arrays (used in the hot loops) --------------------


def b1_hat(u: np.ndarray, v: np.ndarray, grid: GridSpec, phi: np.ndarray | None = None, *, pre_truncated=False) -> np.ndarray:
    """Spectrum of −(−Δ)⁻¹ℙ div(φ u⊗v) from physical (3,N,N,N) arrays."""
    if not pre_truncated:
        u = truncate(u, grid)
        v = u if v is None else truncate(v, grid)
    elif v is None:
        v = u
    T = u[:, None] * v[None, :]
    if phi is not None:
        T = T * phi
    That = dealias_hat(fft3(T), grid)
    d = div_tensor_hat(That, grid)
    return -leray_hat(d, grid) * _inv_k2(*_key(grid))


def b2_hat(theta: np.ndarray, u: np.ndarray, grid: GridSpec, *, pre_truncated=False) -> np.ndarray:
    """Spectrum of −(−Δ)⁻¹ div(θu)."""
    if not pre_truncated:
        theta = truncate(theta, grid)
        u = truncate(u, grid)
    V = dealias_hat(fft3(theta[None] * u), grid)
    return -div_hat(V, grid) * _inv_k2(*_key(grid))


def l_hat(theta: np.ndarray, gvec: np.ndarray, grid: GridSpec, *, pre_truncated=False) -> np.ndarray:
    """Spectrum of (−Δ)⁻¹ℙ(θg⃗); the product's mean is dropped and logged."""
    if not pre_truncated:
        theta = truncate(theta, grid)
        gvec = truncate(gvec, grid)
    P = dealias_hat(fft3(theta[None] * gvec), grid)
    c0 = np.abs(P[:, 0, 0, 0]).max()
    if c0 > 0:
        log.debug("linear_L: dropping mean of θg⃗ (|c(0)| = %.3e)", c0)
    P[:, 0, 0, 0] = 0.0
    return leray_hat(P, grid) * _inv_k2(*_key(grid))


# --- field-level public API ---------------------------------------------------


def _spec_grid(spec):
    if not isinstance(spec, SpectralField):
        raise TypeError(f"expected SpectralField, got {type(spec).__name__}")
    return spec.grid


def _same(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def inv_laplacian(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    return SpectralField(g, inv_lap_hat(spec.coefficients, g))


def neg_laplacian(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    return SpectralField(g, neg_lap_hat(spec.coefficients, g))


def gradient(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    if spec.is_vector:
        raise ValueError("gradient takes a scalar spectrum")
    return SpectralField(g, grad_hat(spec.coefficients, g))


def divergence(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    if not spec.is_vector:
        raise ValueError("divergence takes a vector spectrum")
    return SpectralField(g, div_hat(spec.coefficients, g))


def leray_project(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    if not spec.is_vector:
        raise ValueError("Leray projection takes a vector spectrum")
    return SpectralField(g, leray_hat(spec.coefficients, g))


def heat_semigroup(spec: SpectralField, t: float) -> SpectralField:
    g = _spec_grid(spec)
    return SpectralField(g, heat_hat(spec.coefficients, g, t))


def dealias(spec: SpectralField) -> SpectralField:
    g = _spec_grid(spec)
    return SpectralField(g, dealias_hat(spec.coefficients, g))


def bilinear_B(u: VectorField, v: VectorField) -> VectorField:
    _same(u, v)
    c = b1_hat(u.components, v.components, u.grid)
    return VectorField(u.grid, to_real(c))


def bilinear_B2(theta: ScalarField, u: VectorField) -> ScalarField:
    _same(theta, u)
    return ScalarField(u.grid, to_real(b2_hat(theta.values, u.components, u.grid)))


def linear_L(theta: ScalarField, gvec: VectorField) -> VectorField:
    _same(theta, gvec)
    return VectorField(gvec.grid, to_real(l_hat(theta.values, gvec.components, gvec.grid)))


def toy_bilinear(u: VectorField, phi: ScalarField) -> VectorField:
    _same(u, phi)
    g = u.grid
    ut = truncate(u.components, g)
    ph = truncate(phi.values, g)
    return VectorField(g, to_real(b1_hat(ut, None, g, ph, pre_truncated=True)))


def localizer(grid: GridSpec, c: float = 1.0) -> ScalarField:
    """φ(x) = c/(1+|x|²) in signed box coordinates."""
    return ScalarField(grid, c / (1.0 + grid.radius() ** 2))


def lift_velocity(f: VectorField) -> VectorField:
    """(−Δ)⁻¹ℙ f⃗."""
    g = f.grid
    c = fft3(f.components)
    return VectorField(g, to_real(inv_lap_hat(leray_hat(c, g), g)))


def lift_scalar(s: ScalarField) -> ScalarField:
    g = s.grid
    return ScalarField(g, to_real(inv_lap_hat(fft3(s.values), g)))


def divergence_of(u: VectorField) -> ScalarField:
    g = u.grid
    return ScalarField(g, to_real(div_hat(fft3(u.components), g)))


def gradient_of(s: ScalarField) -> VectorField:
    g = s.grid
    return VectorField(g, to_real(grad_hat(fft3(s.values), g)))


def project(u: VectorField) -> VectorField:
    g = u.grid
    return VectorField(g, to_real(leray_hat(fft3(u.components), g)))


def heat_flow(f, t: float):
    g = f.grid
    if isinstance(f, VectorField):
        return VectorField(g, to_real(heat_hat(fft3(f.components), g, t)))
    return ScalarField(g, to_real(heat_hat(fft3(f.values), g, t)))


def heat_weighted_sup(field: ScalarField, p: float, times) -> dict:
    """sup_t t^{3/(2p)}‖e^{tΔ}f‖_∞ / ‖f‖_{L^{p,∞}} over the given t-grid.

    ``interior`` is False when the maximizer sits on an end of the grid, in
    which case the grid does not bracket the supremum.
    """
    times = np.asarray(sorted(times), dtype=float)
    if times.size == 0 or times[0] <= 0:
        raise ValueError("time grid must be non-empty and strictly positive")
    den = lorentz_quasi_norm(field, LorentzParams(p, np.inf))
    if den == 0:
        return {"ratio": 0.0, "t_max": float(times[0]), "p": p, "interior": False}
    g = field.grid
    c = fft3(field.values)
    k2 = _k2(*_key(g))
    best, tbest = -1.0, times[0]
    for t in times:
        val = t ** (1.5 / p) * np.abs(ifft3(c * np.exp(-t * k2)).real).max()
        if val > best:
            best, tbest = val, t
    interior = bool(times[0] < tbest < times[-1])
    return {"ratio": float(best / den), "t_max": float(tbest), "p": p, "interior": interior}
