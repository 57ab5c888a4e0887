"""Direct-summation kernels for far-field quadrature and pair sampling.

Each kernel exists twice: a numba version (parallel over targets, serial
sum per target, so results do not depend on the thread count) and a numpy
twin used when numba is disabled. The public functions dispatch on
``_accel.numba_enabled()`` at call time.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

INV_4PI = 1.0 / (4.0 * math.pi)
INV_8PI = 1.0 / (8.0 * math.pi)

# targets per numpy chunk; keeps the (chunk, sources) temporaries near 32 MB
_CHUNK_PAIRS = 4_000_000


# --- Laplace: charge and dipole layers -------------------------------------


@njit(parallel=True, cache=True)
def _laplace_sum_nb(src, charge, dipole, tgt):
    m = tgt.shape[0]
    n = src.shape[0]
    out = np.zeros(m)
    for a in prange(m):
        x0 = tgt[a, 0]
        x1 = tgt[a, 1]
        x2 = tgt[a, 2]
        acc = 0.0
        for b in range(n):
            z0 = x0 - src[b, 0]
            z1 = x1 - src[b, 1]
            z2 = x2 - src[b, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 == 0.0:
                continue
            r = math.sqrt(r2)
            inv_r = 1.0 / r
            inv_r3 = inv_r / r2
            acc += charge[b] * inv_r
            acc += (dipole[b, 0] * z0 + dipole[b, 1] * z1 + dipole[b, 2] * z2) * inv_r3
        out[a] = acc * INV_4PI
    return out


def _laplace_sum_np(src, charge, dipole, tgt):
    m = tgt.shape[0]
    n = src.shape[0]
    out = np.zeros(m)
    step = max(1, _CHUNK_PAIRS // max(n, 1))
    for a0 in range(0, m, step):
        z = tgt[a0:a0 + step, None, :] - src[None, :, :]
        r2 = np.einsum("abk,abk->ab", z, z)
        zero = r2 == 0.0
        r2 = np.where(zero, 1.0, r2)
        inv_r = np.where(zero, 0.0, 1.0 / np.sqrt(r2))
        inv_r3 = inv_r / r2
        acc = inv_r @ charge
        acc += np.einsum("ab,abk,bk->a", inv_r3, z, dipole)
        out[a0:a0 + step] = acc * INV_4PI
    return out


def laplace_sum(src, charge, dipole, tgt):
    """(1/4π) Σ_y [q(y)/|x−y| + d(y)·(x−y)/|x−y|³] at each target x.

    ``charge`` and ``dipole`` already carry the cell volume. Coincident
    source/target pairs are skipped; callers add any self-cell correction.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    tgt = np.ascontiguousarray(np.atleast_2d(tgt), dtype=np.float64)
    charge = np.ascontiguousarray(charge, dtype=np.float64)
    if dipole is None:
        dipole = np.zeros_like(src)
    dipole = np.ascontiguousarray(dipole, dtype=np.float64)
    if _accel.numba_enabled():
        return _laplace_sum_nb(src, charge, dipole, tgt)
    return _laplace_sum_np(src, charge, dipole, tgt)


# --- Stokes: Oseen tensor and its gradient ----------------------------------


@njit(parallel=True, cache=True)
def _stokes_sum_nb(src, force, stress, tgt):
    m = tgt.shape[0]
    n = src.shape[0]
    out = np.zeros((m, 3))
    for a in prange(m):
        u0 = 0.0
        u1 = 0.0
        u2 = 0.0
        for b in range(n):
            z0 = tgt[a, 0] - src[b, 0]
            z1 = tgt[a, 1] - src[b, 1]
            z2 = tgt[a, 2] - src[b, 2]
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 == 0.0:
                continue
            r = math.sqrt(r2)
            inv_r = 1.0 / r
            inv_r3 = inv_r / r2
            inv_r5 = inv_r3 / r2
            f0 = force[b, 0]
            f1 = force[b, 1]
            f2 = force[b, 2]
            zf = z0 * f0 + z1 * f1 + z2 * f2
            # G F = (F/r + z (z.F)/r^3)
            g0 = f0 * inv_r + z0 * zf * inv_r3
            g1 = f1 * inv_r + z1 * zf * inv_r3
            g2 = f2 * inv_r + z2 * zf * inv_r3
            # -dG_ik/dz_j W_kj, with W row-major (k, j)
            w00 = stress[b, 0]
            w01 = stress[b, 1]
            w02 = stress[b, 2]
            w10 = stress[b, 3]
            w11 = stress[b, 4]
            w12 = stress[b, 5]
            w20 = stress[b, 6]
            w21 = stress[b, 7]
            w22 = stress[b, 8]
            wz0 = w00 * z0 + w01 * z1 + w02 * z2  # (W z)_k
            wz1 = w10 * z0 + w11 * z1 + w12 * z2
            wz2 = w20 * z0 + w21 * z1 + w22 * z2
            zw0 = z0 * w00 + z1 * w10 + z2 * w20  # (z W)_j
            zw1 = z0 * w01 + z1 * w11 + z2 * w21
            zw2 = z0 * w02 + z1 * w12 + z2 * w22
            tr = w00 + w11 + w22
            zwz = z0 * wz0 + z1 * wz1 + z2 * wz2
            # dG_ik/dz_j W_kj = [-(W z)_i + (z W)_i + z_i tr W]/r^3 - 3 z_i zWz / r^5
            d0 = (-wz0 + zw0 + z0 * tr) * inv_r3 - 3.0 * z0 * zwz * inv_r5
            d1 = (-wz1 + zw1 + z1 * tr) * inv_r3 - 3.0 * z1 * zwz * inv_r5
            d2 = (-wz2 + zw2 + z2 * tr) * inv_r3 - 3.0 * z2 * zwz * inv_r5
            u0 += g0 - d0
            u1 += g1 - d1
            u2 += g2 - d2
        out[a, 0] = u0 * INV_8PI
        out[a, 1] = u1 * INV_8PI
        out[a, 2] = u2 * INV_8PI
    return out


def _stokes_sum_np(src, force, stress, tgt):
    m = tgt.shape[0]
    n = src.shape[0]
    out = np.zeros((m, 3))
    W = stress.reshape(n, 3, 3)
    tr = np.trace(W, axis1=1, axis2=2)
    step = max(1, _CHUNK_PAIRS // max(4 * n, 1))
    for a0 in range(0, m, step):
        z = tgt[a0:a0 + step, None, :] - src[None, :, :]
        r2 = np.einsum("abk,abk->ab", z, z)
        zero = r2 == 0.0
        r2 = np.where(zero, 1.0, r2)
        inv_r = np.where(zero, 0.0, 1.0 / np.sqrt(r2))
        inv_r3 = inv_r / r2
        inv_r5 = inv_r3 / r2
        zf = np.einsum("abk,bk->ab", z, force)
        g = force[None] * inv_r[..., None] + z * (zf * inv_r3)[..., None]
        wz = np.einsum("bkj,abj->abk", W, z)
        zw = np.einsum("abk,bkj->abj", z, W)
        zwz = np.einsum("abk,abk->ab", z, wz)
        d = (-wz + zw + z * tr[None, :, None]) * inv_r3[..., None]
        d -= 3.0 * z * (zwz * inv_r5)[..., None]
        out[a0:a0 + step] = (g - d).sum(axis=1) * INV_8PI
    return out


def stokes_sum(src, force, stress, tgt):
    """Σ_y [G(x−y) F(y) − ∂_j G(x−y) W(y)_{·j}] with the Oseen tensor G.

    G_ik(z) = (δ_ik/|z| + z_i z_k/|z|³)/(8π) is the kernel of (−Δ)⁻¹ℙ, so the
    first sum is (−Δ)⁻¹ℙF and the second is −(−Δ)⁻¹ℙ div W. ``stress`` has
    shape (n, 9), row-major in (k, j). Weights already carry the cell volume.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    tgt = np.ascontiguousarray(np.atleast_2d(tgt), dtype=np.float64)
    n = src.shape[0]
    force = np.zeros((n, 3)) if force is None else force
    stress = np.zeros((n, 9)) if stress is None else stress
    force = np.ascontiguousarray(force, dtype=np.float64)
    stress = np.ascontiguousarray(np.reshape(stress, (n, 9)), dtype=np.float64)
    if _accel.numba_enabled():
        return _stokes_sum_nb(src, force, stress, tgt)
    return _stokes_sum_np(src, force, stress, tgt)


# --- pair sampling for the Hölder seminorm ----------------------------------


@njit(parallel=True, cache=True)
def _pair_ratio_max_nb(values, ia, ib, n, h, s):
    m = ia.shape[0]
    best = np.zeros(m)
    box = n * h
    for a in prange(m):
        i = ia[a]
        j = ib[a]
        if i == j:
            continue
        i0 = i // (n * n)
        i1 = (i // n) % n
        i2 = i % n
        j0 = j // (n * n)
        j1 = (j // n) % n
        j2 = j % n
        d2 = 0.0
        for di in (abs(i0 - j0), abs(i1 - j1), abs(i2 - j2)):
            dd = min(di, n - di) * h
            d2 += dd * dd
        dist = math.sqrt(d2)
        if dist > 0.0 and dist <= box:
            best[a] = abs(values[i] - values[j]) / dist ** s
    return best.max() if m > 0 else 0.0


def _pair_ratio_max_np(values, ia, ib, n, h, s):
    pa = np.stack(np.unravel_index(ia, (n, n, n)))
    pb = np.stack(np.unravel_index(ib, (n, n, n)))
    d = np.abs(pa - pb)
    d = np.minimum(d, n - d) * h
    dist = np.sqrt((d * d).sum(axis=0))
    ok = dist > 0
    if not ok.any():
        return 0.0
    ratio = np.abs(values[ia[ok]] - values[ib[ok]]) / dist[ok] ** s
    return float(ratio.max())


def pair_ratio_max(values, ia, ib, n, h, s):
    """max |f_i − f_j| / dist(i, j)^s over index pairs, torus metric.

    ``values`` is the C-order flattened (n, n, n) sample array.
    """
    values = np.ascontiguousarray(values, dtype=np.float64).ravel()
    ia = np.ascontiguousarray(ia, dtype=np.int64)
    ib = np.ascontiguousarray(ib, dtype=np.int64)
    if _accel.numba_enabled():
        return float(_pair_ratio_max_nb(values, ia, ib, int(n), float(h), float(s)))
    return _pair_ratio_max_np(values, ia, ib, int(n), float(h), float(s))
