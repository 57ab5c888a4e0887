"""Periodic-box discretization, field containers and transforms."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _accel

HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Cube [-L/2, L/2)^3 with N cells per axis, sampled at cell centers."""

    box_length: float
    points_per_axis: int

    def __post_init__(self):
        L, N = self.box_length, self.points_per_axis
        if isinstance(N, bool) or int(N) != N:
            raise ValueError(f"points_per_axis must be an integer, got {N!r}")
        object.__setattr__(self, "points_per_axis", int(N))
        object.__setattr__(self, "box_length", float(L))
        if self.points_per_axis < 8 or self.points_per_axis % 2:
            raise ValueError(f"points_per_axis must be even and >= 8, got {N}")
        if not (math.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {L}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self):
        n = self.points_per_axis
        return (n, n, n)

    @property
    def total_volume(self) -> float:
        return self.box_length ** 3

    def coordinates(self) -> np.ndarray:
        """1D cell-center coordinates (i+1/2)h - L/2."""
        return _coords(self.box_length, self.points_per_axis)

    def mesh(self) -> np.ndarray:
        """Cell-center positions, shape (3, N, N, N); index order (i1, i2, i3)."""
        return _mesh(self.box_length, self.points_per_axis)

    def radius(self) -> np.ndarray:
        return _radius(self.box_length, self.points_per_axis)

    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers n with k = 2πn/L, in [-N/2, N/2)."""
        return _modes(self.points_per_axis)

    def wavevectors(self):
        """Broadcastable (k1, k2, k3) with shapes (N,1,1), (1,N,1), (1,1,N)."""
        return _kvec(self.box_length, self.points_per_axis)

    def k_squared(self) -> np.ndarray:
        return _k2(self.box_length, self.points_per_axis)

    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with |n_i| < N/3 on every axis."""
        return _dealias(self.points_per_axis)

    def point_cloud(self) -> np.ndarray:
        """Cell centers as an (N^3, 3) array in C order of (i1, i2, i3)."""
        return self.mesh().reshape(3, -1).T.copy()


@functools.lru_cache(maxsize=16)
def _coords(L, N):
    h = L / N
    c = (np.arange(N) + 0.5) * h - L / 2
    c.setflags(write=False)
    return c


@functools.lru_cache(maxsize=8)
def _mesh(L, N):
    c = _coords(L, N)
    m = np.stack(np.meshgrid(c, c, c, indexing="ij"))
    m.setflags(write=False)
    return m


@functools.lru_cache(maxsize=8)
def _radius(L, N):
    m = _mesh(L, N)
    r = np.sqrt((m * m).sum(axis=0))
    r.setflags(write=False)
    return r


@functools.lru_cache(maxsize=16)
def _modes(N):
    n = np.fft.fftfreq(N, 1.0 / N).round().astype(np.int64)
    n.setflags(write=False)
    return n


@functools.lru_cache(maxsize=16)
def _kvec(L, N):
    k = 2 * np.pi / L * _modes(N).astype(float)
    out = (k[:, None, None], k[None, :, None], k[None, None, :])
    for a in out:
        a.setflags(write=False)
    return out


@functools.lru_cache(maxsize=16)
def _k2(L, N):
    k1, k2, k3 = _kvec(L, N)
    out = k1 ** 2 + k2 ** 2 + k3 ** 2
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=16)
def _dealias(N):
    keep = np.abs(_modes(N)) < N / 3
    out = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
    out.setflags(write=False)
    return out


def _check_values(values, grid: GridSpec, ncomp=None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    want = grid.shape if ncomp is None else (ncomp,) + grid.shape
    if arr.shape != want:
        raise ValueError(f"expected sample array of shape {want}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, self.grid))

    def __add__(self, other):
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def mean(self) -> float:
        return float(self.values.mean())

    def l2(self) -> float:
        return float(np.sqrt((self.values ** 2).sum() * self.grid.cell_volume))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    components: np.ndarray  # shape (3, N, N, N)

    def __post_init__(self):
        comps = self.components
        if isinstance(comps, (list, tuple)) and comps and isinstance(comps[0], ScalarField):
            for c in comps:
                if c.grid != self.grid:
                    raise ValueError("vector components live on different grids")
            comps = np.stack([c.values for c in comps])
        object.__setattr__(self, "components", _check_values(comps, self.grid, 3))

    @classmethod
    def from_components(cls, a: ScalarField, b: ScalarField, c: ScalarField):
        return cls(a.grid, [a, b, c])

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((3,) + grid.shape))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.components[i])

    def magnitude(self) -> np.ndarray:
        return np.sqrt((self.components ** 2).sum(axis=0))

    def __add__(self, other):
        _same_grid(self, other)
        return VectorField(self.grid, self.components + other.components)

    def __sub__(self, other):
        _same_grid(self, other)
        return VectorField(self.grid, self.components - other.components)

    def __mul__(self, c):
        return VectorField(self.grid, self.components * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.components)

    def l2(self) -> float:
        return float(np.sqrt((self.components ** 2).sum() * self.grid.cell_volume))

    def max_abs(self) -> float:
        return float(self.magnitude().max())


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients c(n), field = Σ c(n) exp(2πi n·j/N) over grid indices j.

    Scalar spectra have shape (N, N, N), vector spectra (3, N, N, N).
    """

    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape not in (self.grid.shape, (3,) + self.grid.shape):
            raise ValueError(f"bad spectral shape {c.shape} for grid {self.grid.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def is_vector(self) -> bool:
        return self.coefficients.ndim == 4

    def energy(self) -> float:
        """L^3 Σ|c|^2, equal to Σ|values|^2 h^3 by Parseval."""
        return float(self.grid.total_volume * (np.abs(self.coefficients) ** 2).sum())


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def fft3(values: np.ndarray) -> np.ndarray:
    """Forward transform over the last three axes, normalized by 1/N^3."""
    return sfft.fftn(values, axes=(-3, -2, -1), norm="forward", workers=_accel.thread_count())


def ifft3(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=(-3, -2, -1), norm="forward", workers=_accel.thread_count())


def reflect_modes(coeffs: np.ndarray) -> np.ndarray:
    """c(-n) for every n (index arithmetic mod N)."""
    out = np.flip(coeffs, axis=(-3, -2, -1))
    return np.roll(out, 1, axis=(-3, -2, -1))


def hermitian_defect(coeffs: np.ndarray) -> float:
    """max|c(-n) - conj c(n)| relative to max|c|."""
    scale = np.abs(coeffs).max()
    if scale == 0:
        return 0.0
    return float(np.abs(reflect_modes(coeffs) - np.conj(coeffs)).max() / scale)


def forward_transform(f) -> SpectralField:
    if isinstance(f, ScalarField):
        return SpectralField(f.grid, fft3(f.values))
    if isinstance(f, VectorField):
        return SpectralField(f.grid, fft3(f.components))
    raise TypeError(f"cannot transform {type(f).__name__}")


def inverse_transform(spec: SpectralField):
    d = hermitian_defect(spec.coefficients)
    if d > HERMITIAN_TOL:
        raise ValueError(f"spectrum is not Hermitian (relative defect {d:.3e}); it does not represent a real field")
    vals = ifft3(spec.coefficients).real
    if spec.is_vector:
        return VectorField(spec.grid, vals)
    return ScalarField(spec.grid, vals)


def make_wave(grid: GridSpec, k, amplitude: float, phase: float = 0.0) -> ScalarField:
    """amplitude·cos(2π k·x/L + phase) at cell centers.

    k = 0 is the constant branch: the field is amplitude·cos(phase).
    """
    k = np.asarray(k)
    if k.shape != (3,) or not np.all(np.equal(np.mod(k, 1), 0)):
        raise ValueError(f"k must be an integer 3-vector, got {k!r}")
    k = k.astype(np.int64)
    if np.any(np.abs(k) >= grid.points_per_axis // 2):
        raise ValueError(f"wavevector {tuple(k)} outside |k_i| < N/2 = {grid.points_per_axis // 2}")
    x = grid.mesh()
    arg = 2 * np.pi / grid.box_length * np.tensordot(k.astype(float), x, axes=1) + phase
    return ScalarField(grid, amplitude * np.cos(arg))


def physical_phase(grid: GridSpec) -> np.ndarray:
    """exp(i k·x_0) with x_0 = h/2 - L/2 the first cell center.

    Multiplying coefficients referred to exp(ik·x) by this factor refers
    them to the index basis used by the FFT.
    """
    return _phase(grid.box_length, grid.points_per_axis)


@functools.lru_cache(maxsize=8)
def _phase(L, N):
    x0 = L / N / 2 - L / 2
    k1, k2, k3 = _kvec(L, N)
    out = np.exp(1j * (k1 + k2 + k3) * x0)
    out.setflags(write=False)
    return out
