"""Free-space potentials of box-supported grid data by direct quadrature."""
from __future__ import annotations

import functools
import math
import warnings

import numpy as np
from scipy import integrate

from .grid import ScalarField, VectorField
from .kernels import laplace_sum, stokes_sum

BOUNDARY_TOL = 1e-6


class BoundaryDecayWarning(UserWarning):
    """Source data is not negligible on the box boundary."""


@functools.lru_cache(maxsize=1)
def self_cell_integral() -> float:
    """c_cell = ∫_{[-1/2,1/2]^3} dz/|z|.

    The cube splits into six pyramids over its faces; on each, scaling out
    the height leaves (1/8)∫∫_{[-1,1]^2} da db/√(a²+b²+1).
    """
    val, _ = integrate.dblquad(
        lambda b, a: 1.0 / math.sqrt(a * a + b * b + 1.0), 0.0, 1.0, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13
    )
    return 6.0 * 4.0 * val / 8.0


def boundary_ratio(values: np.ndarray) -> float:
    """max over the outermost cell shell / global max, of |values|."""
    a = np.abs(values)
    if a.ndim == 4:
        a = a.max(axis=0)
    top = a.max()
    if top == 0:
        return 0.0
    shell = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max(), a[:, :, 0].max(), a[:, :, -1].max())
    return float(shell / top)


def check_boundary(values: np.ndarray, what: str) -> float:
    r = boundary_ratio(values)
    if r > BOUNDARY_TOL:
        warnings.warn(
            f"{what}: boundary-shell max is {r:.2e} of the global max (> {BOUNDARY_TOL:g}); "
            "box truncation error is not controlled",
            BoundaryDecayWarning,
            stacklevel=3,
        )
    return r


def _points(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != 3:
        raise ValueError(f"evaluation points need 3 coordinates, got shape {x.shape}")
    return x, single


def _self_cell_hits(grid, pts) -> list[tuple[int, int]]:
    """(target row, flat cell index) for targets sitting on a cell center."""
    h = grid.spacing
    n = grid.points_per_axis
    idx = (pts + grid.box_length / 2) / h - 0.5
    near = np.rint(idx)
    hits = []
    on = np.all(np.abs(idx - near) < 1e-9, axis=1) & np.all((near >= 0) & (near < n), axis=1)
    for a in np.flatnonzero(on):
        i, j, k = near[a].astype(int)
        hits.append((int(a), int((i * n + j) * n + k)))
    return hits


def newton_potential_at(source: ScalarField, x, *, return_diagnostics: bool = False):
    """(1/4π)Σ source(y) h³/|x−y| at one point (3,) or many (m, 3).

    A target on a cell center gets the analytic self-cell term
    c_cell h² source/(4π) in place of the singular summand.
    """
    g = source.grid
    pts, single = _points(x)
    ratio = check_boundary(source.values, "newton_potential_at")
    vals = source.values.ravel()
    keep = vals != 0
    out = laplace_sum(g.point_cloud()[keep], vals[keep] * g.cell_volume, None, pts)
    hits = _self_cell_hits(g, pts)
    if hits:
        c = self_cell_integral() * g.spacing ** 2 / (4 * math.pi)
        for a, flat in hits:
            out[a] += c * vals[flat]
    res = float(out[0]) if single else out
    if return_diagnostics:
        return res, {"boundary_ratio": ratio, "boundary_warning": ratio > BOUNDARY_TOL, "self_cell_hits": len(hits)}
    return res


def stokes_potential_at(force: VectorField | None, stress: np.ndarray | None, x, grid=None):
    """Σ G(x−y)F(y)h³ − Σ ∂_jG(x−y)W(y)h³ with the Oseen tensor G.

    ``stress`` is a (3, 3, N, N, N) array W_kj. Targets must lie off the
    cell centers (far-field use); coincident pairs are skipped.
    """
    if grid is None:
        grid = force.grid
    pts, single = _points(x)
    n3 = grid.points_per_axis ** 3
    dv = grid.cell_volume
    F = None if force is None else force.components.reshape(3, n3).T * dv
    W = None if stress is None else np.asarray(stress).reshape(9, n3).T * dv
    keep = np.ones(n3, dtype=bool)
    if F is not None and W is None:
        keep = np.any(F != 0, axis=1)
    elif W is not None and F is None:
        keep = np.any(W != 0, axis=1)
    src = grid.point_cloud()[keep]
    out = stokes_sum(src, None if F is None else F[keep], None if W is None else W[keep], pts)
    return out[0] if single else out


def dipole_potential_at(charge: ScalarField | None, dipole: VectorField | None, x, grid=None):
    """(1/4π)Σ [q(y)/|x−y| + d(y)·(x−y)/|x−y|³] h³."""
    if grid is None:
        grid = (charge or dipole).grid
    pts, single = _points(x)
    n3 = grid.points_per_axis ** 3
    dv = grid.cell_volume
    q = np.zeros(n3) if charge is None else charge.values.ravel() * dv
    d = np.zeros((n3, 3)) if dipole is None else dipole.components.reshape(3, n3).T * dv
    out = laplace_sum(grid.point_cloud(), q, d, pts)
    return float(out[0]) if single else out
