"""Distribution functions, rearrangements and Lorentz quasi-norms on the grid.

The measure is the cell-counting measure times h^3, so the decreasing
rearrangement of a grid field is an exact step function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, VectorField
from .kernels import pair_ratio_max

INF = math.inf


@dataclass(frozen=True)
class LorentzParams:
    p: float
    q: float

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if math.isnan(p) or math.isnan(q) or p < 1 or q < 1:
            raise ValueError(f"Lorentz exponents need p >= 1, q >= 1 (got p={p}, q={q})")
        if p == INF and q != INF:
            raise ValueError("p = inf requires q = inf")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """f*(t) = values[k] on [breakpoints[k], breakpoints[k+1])."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size + 1:
            raise ValueError("need len(breakpoints) == len(values) + 1")
        if t.size and t[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise ValueError("values must be non-negative and non-increasing")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        out = np.zeros(t.shape)
        ok = (idx >= 0) & (idx < self.values.size)
        out[ok] = self.values[idx[ok]]
        return out

    def distribution(self, lam: float) -> float:
        """|{t : f*(t) > λ}|, which must equal d_f(λ)."""
        k = int(np.count_nonzero(self.values > lam))
        return float(self.breakpoints[k])

    @property
    def span(self) -> float:
        return float(self.breakpoints[-1])


def magnitudes(field) -> tuple[np.ndarray, float]:
    """Flat |values| (Euclidean magnitude for vectors) and the cell volume."""
    if isinstance(field, ScalarField):
        return np.abs(field.values).ravel(), field.grid.cell_volume
    if isinstance(field, VectorField):
        return field.magnitude().ravel(), field.grid.cell_volume
    raise TypeError(f"expected ScalarField or VectorField, got {type(field).__name__}")


def _sorted_desc(field):
    vals, dv = magnitudes(field)
    return np.sort(vals)[::-1], dv


def distribution_function(field, lam: float) -> float:
    if not lam >= 0:
        raise ValueError(f"distribution function needs lambda >= 0, got {lam}")
    vals, dv = magnitudes(field)
    return float(np.count_nonzero(vals > lam)) * dv


def rearrangement(field) -> StepFunction:
    """Sort |values| descending, merging ties into one step."""
    v, dv = _sorted_desc(field)
    if v.size == 0:
        return StepFunction(np.zeros(1), np.zeros(0))
    cut = np.flatnonzero(np.diff(v) != 0) + 1  # starts of new groups
    ends = np.append(cut, v.size)
    vals = v[np.concatenate(([0], cut))]
    t = np.concatenate(([0.0], ends * dv))
    return StepFunction(t, vals)


def _power_increments(n: int, a: float, dv: float) -> np.ndarray:
    """(k dv)^a - ((k-1) dv)^a for k = 1..n, without cancellation."""
    k = np.arange(1, n + 1, dtype=float)
    out = np.empty(n)
    out[0] = 1.0
    km1 = k[1:] - 1.0
    out[1:] = km1 ** a * np.expm1(a * np.log1p(1.0 / km1))
    return out * dv ** a


def _as_params(params) -> LorentzParams:
    if isinstance(params, LorentzParams):
        return params
    p, q = params
    return LorentzParams(p, q)


def lorentz_from_sorted(v: np.ndarray, dv: float, params, mode: str = "standard") -> float:
    """Lorentz quasi-norm of a descending per-cell array ``v``."""
    pr = _as_params(params)
    p, q = pr.p, pr.q
    if v.size == 0 or v[0] == 0.0:
        return 0.0
    if p == INF:
        return float(v[0])
    if q == INF:
        t = np.arange(1, v.size + 1, dtype=float) * dv
        return float((t ** (1.0 / p) * v).max())
    if mode == "standard":
        # (q/p) ∫ (t^{1/p} f*)^q dt/t, exact on steps
        s = float((v ** q * _power_increments(v.size, q / p, dv)).sum())
        return s ** (1.0 / q)
    if mode == "verbatim":
        # (q/p) (∫ (t^{1/p} f*)^q dt)^{1/q}, as printed
        a = q / p + 1.0
        s = float((v ** q * _power_increments(v.size, a, dv)).sum()) / a
        return (q / p) * s ** (1.0 / q)
    raise ValueError(f"unknown Lorentz mode {mode!r} (use 'standard' or 'verbatim')")


def lorentz_quasi_norm(field, params, mode: str = "standard") -> float:
    v, dv = _sorted_desc(field)
    return lorentz_from_sorted(v, dv, params, mode)


def lp_norm(field, p: float) -> float:
    """Discrete L^p norm (Σ|f|^p h^3)^{1/p}; max norm for p = inf."""
    vals, dv = magnitudes(field)
    p = float(p)
    if p == INF:
        return float(vals.max()) if vals.size else 0.0
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    m = vals.max() if vals.size else 0.0
    if m == 0:
        return 0.0
    # scale first so large p does not overflow
    return float(m * ((vals / m) ** p).sum() ** (1.0 / p) * dv ** (1.0 / p))


def weak_norm(field, p: float) -> float:
    return lorentz_quasi_norm(field, LorentzParams(p, INF))


def pair_norm(u, theta, p: float = 3.0, q: float = INF) -> float:
    """‖u‖ + ‖θ‖ in L^{p,q}, the norm of the product space."""
    prm = LorentzParams(p, q)
    return lorentz_quasi_norm(u, prm) + lorentz_quasi_norm(theta, prm)


def interpolation_check(field, p: float, sigma: float) -> float:
    """‖f‖_{pσ} / (‖f‖_{p,∞}^{1/σ} ‖f‖_∞^{1-1/σ}); 0 for the zero field."""
    if p < 1 or sigma < 1:
        raise ValueError(f"need p >= 1 and sigma >= 1, got p={p}, sigma={sigma}")
    v, dv = _sorted_desc(field)
    if v.size == 0 or v[0] == 0:
        return 0.0
    top = lp_norm(field, p * sigma)
    weak = lorentz_from_sorted(v, dv, (p, INF))
    return float(top / (weak ** (1.0 / sigma) * v[0] ** (1.0 - 1.0 / sigma)))


def hoelder_product_ratio(f, g, p1: float, p2: float) -> float:
    """‖fg‖_{p,∞} / (‖f‖_{p1,∞}‖g‖_{p2,∞}) with 1/p = 1/p1 + 1/p2.

    On any measure space this ratio is at most 2^{1/p}.
    """
    a, _ = magnitudes(f)
    b, dv = magnitudes(g)
    p = 1.0 / (1.0 / p1 + 1.0 / p2)
    den = weak_norm(f, p1) * weak_norm(g, p2)
    if den == 0:
        return 0.0
    prod = np.sort(a * b)[::-1]
    return lorentz_from_sorted(prod, dv, (p, INF)) / den


def hoelder_seminorm(field: ScalarField, s: float, pair_budget: int, seed: int = 0, local_span: int = 4) -> float:
    """max over sampled pairs of |f(x) - f(y)| / d(x,y)^s, torus metric.

    Half of the budget goes to uniformly random pairs, half to pairs within
    ``local_span`` cells of each other, where smooth fields attain the max.
    """
    if not 0 < s < 1:
        raise ValueError(f"Hölder exponent must lie in (0,1), got {s}")
    if pair_budget < 1:
        raise ValueError("pair_budget must be positive")
    if not isinstance(field, ScalarField):
        raise TypeError("Hölder seminorm takes a ScalarField")
    n = field.grid.points_per_axis
    rng = np.random.default_rng(seed)
    n_glob = pair_budget - pair_budget // 2
    n_loc = pair_budget // 2
    total = n ** 3
    ia = rng.integers(0, total, size=n_glob)
    ib = rng.integers(0, total, size=n_glob)
    base = rng.integers(0, n, size=(3, n_loc))
    off = rng.integers(-local_span, local_span + 1, size=(3, n_loc))
    other = (base + off) % n
    ja = np.ravel_multi_index(tuple(base), (n, n, n))
    jb = np.ravel_multi_index(tuple(other), (n, n, n))
    ia = np.concatenate([ia, ja])
    ib = np.concatenate([ib, jb])
    return pair_ratio_max(field.values.ravel(), ia, ib, n, field.grid.spacing, s)


def norm_rows(field_id: str, field, pqs, grid) -> list[dict]:
    """CSV-ready rows field_id, p, q, value, grid_N, box_L."""
    rows = []
    for p, q in pqs:
        rows.append(
            {
                "field_id": field_id,
                "p": p,
                "q": q,
                "value": lorentz_quasi_norm(field, (p, q)),
                "grid_N": grid.points_per_axis,
                "box_L": grid.box_length,
            }
        )
    return rows
