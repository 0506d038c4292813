"""Compiled inner loop of the PDHG subproblem solver.

Arrays are 2-D ``(nz, nx)``; the loop mirrors the vectorized reference in
:mod:`tvfwi.pdhg` one operation at a time.  The simplex threshold uses
Condat's linear-time method, which is exact and needs no sort.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def simplex_threshold(v, s, work):
    """Threshold ``a`` with ``sum(max(0, v - a)) = s`` (Condat's method).

    Entries ``v <= 0`` never enter.  ``work`` is scratch of twice the
    length of ``v``.
    """
    n = v.size
    # active list grows from the front, the postponed list from the back
    na = 0
    nw = 0
    rho = 0.0
    for i in range(n):
        y = v[i]
        if y <= 0.0:
            continue
        if na == 0:
            work[0] = y
            na = 1
            rho = y - s
            continue
        if y > rho:
            rho += (y - rho) / (na + 1)
            if rho > y - s:
                work[na] = y
                na += 1
            else:
                for j in range(na):
                    work[2 * n - 1 - nw] = work[j]
                    nw += 1
                work[0] = y
                na = 1
                rho = y - s
    for j in range(nw):
        y = work[2 * n - 1 - j]
        if y > rho:
            work[na] = y
            na += 1
            rho += (y - rho) / na
    # drop entries below the running threshold until the set is stable
    changed = True
    while changed:
        changed = False
        m = 0
        for j in range(na):
            y = work[j]
            if y <= rho:
                changed = True
            else:
                work[m] = y
                m += 1
        if changed:
            total = 0.0
            for j in range(m):
                total += work[j]
            na = m
            rho = (total - s) / na
    return rho


@njit(cache=True)
def pdhg_loop(g, denom, lo, hi, m_n, dm, px, pz, q2, alpha, delta, h,
              r_tv, r_asym, use_tv, use_asym, tol, it0, n_iters):
    """Run up to ``n_iters`` iterations in place.

    Returns ``(iterations_done_total, converged, rel_dual, rel_primal)``.
    """
    nz, nx = g.shape
    gx = np.zeros((nz, nx))
    gz = np.zeros((nz, nx))
    ax = np.zeros((nz, nx))
    az = np.zeros((nz, nx))
    a2 = np.zeros((nz, nx))
    back = np.zeros((nz, nx))
    nrm = np.zeros(nz * nx)
    work = np.zeros(2 * nz * nx)
    rel_p = math.inf
    rel_m = math.inf
    it = it0
    inv_h = 1.0 / h
    for _ in range(n_iters):
        it += 1
        for l in range(nx):
            for k in range(nz):
                x = m_n[k, l] + dm[k, l]
                gx[k, l] = (m_n[k, l + 1] + dm[k, l + 1] - x) * inv_h if l < nx - 1 else 0.0
                gz[k, l] = (m_n[k + 1, l] + dm[k + 1, l] - x) * inv_h if k < nz - 1 else 0.0
        d_diff = 0.0
        d_norm = 0.0
        for l in range(nx):
            for k in range(nz):
                back[k, l] = 0.0
        if use_tv:
            total = 0.0
            i = 0
            for l in range(nx):
                for k in range(nz):
                    zx = px[k, l] + delta * gx[k, l]
                    zz = pz[k, l] + delta * gz[k, l]
                    gx[k, l] = zx
                    gz[k, l] = zz
                    nv = math.sqrt(zx * zx + zz * zz)
                    nrm[i] = nv
                    total += nv
                    i += 1
            inside = total <= r_tv
            a = 0.0
            if not inside and r_tv > 0.0:
                a = simplex_threshold(nrm, r_tv, work)
            i = 0
            for l in range(nx):
                for k in range(nz):
                    zx = gx[k, l]
                    zz = gz[k, l]
                    if inside:
                        f = 0.0
                    elif r_tv == 0.0:
                        f = 1.0
                    else:
                        nv = nrm[i]
                        f = 0.0 if nv <= 0.0 else 1.0 - max(0.0, nv - a) / nv
                    i += 1
                    nxv = zx * f
                    nzv = zz * f
                    d_diff += (nxv - px[k, l]) ** 2 + (nzv - pz[k, l]) ** 2
                    d_norm += nxv * nxv + nzv * nzv
                    ax[k, l] = 2.0 * nxv - px[k, l]
                    az[k, l] = 2.0 * nzv - pz[k, l]
                    px[k, l] = nxv
                    pz[k, l] = nzv
            for l in range(nx):
                for k in range(nz):
                    v = 0.0
                    if l < nx - 1:
                        v -= ax[k, l]
                    if l > 0:
                        v += ax[k, l - 1]
                    if k < nz - 1:
                        v -= az[k, l]
                    if k > 0:
                        v += az[k - 1, l]
                    back[k, l] += v * inv_h
            # gz was overwritten with the TV dual argument; rebuild it
            if use_asym:
                for l in range(nx):
                    for k in range(nz):
                        gz[k, l] = (m_n[k + 1, l] + dm[k + 1, l] - m_n[k, l] - dm[k, l]) * inv_h \
                            if k < nz - 1 else 0.0
        if use_asym:
            total = 0.0
            i = 0
            for l in range(nx):
                for k in range(nz):
                    z = q2[k, l] + delta * gz[k, l]
                    a2[k, l] = z
                    nrm[i] = z
                    if z > 0.0:
                        total += z
                    i += 1
            inside = total <= r_asym
            a = 0.0
            if not inside and r_asym > 0.0:
                a = simplex_threshold(nrm, r_asym, work)
            for l in range(nx):
                for k in range(nz):
                    z = a2[k, l]
                    if inside or z <= 0.0:
                        nv = 0.0
                    elif r_asym == 0.0:
                        nv = z
                    else:
                        nv = z - max(0.0, z - a)
                    d_diff += (nv - q2[k, l]) ** 2
                    d_norm += nv * nv
                    a2[k, l] = 2.0 * nv - q2[k, l]
                    q2[k, l] = nv
            for l in range(nx):
                for k in range(nz):
                    v = 0.0
                    if k < nz - 1:
                        v -= a2[k, l]
                    if k > 0:
                        v += a2[k - 1, l]
                    back[k, l] += v * inv_h
        m_diff = 0.0
        m_norm = 0.0
        for l in range(nx):
            for k in range(nz):
                t = (-g[k, l] + dm[k, l] / alpha - back[k, l]) / denom[k, l]
                t = min(max(t, lo[k, l]), hi[k, l])
                m_diff += (t - dm[k, l]) ** 2
                m_norm += t * t
                dm[k, l] = t
        rel_p = _rel(math.sqrt(d_diff), math.sqrt(d_norm))
        rel_m = _rel(math.sqrt(m_diff), math.sqrt(m_norm))
        if max(rel_p, rel_m) <= tol and it > 1:
            return it, True, rel_p, rel_m
    return it, False, rel_p, rel_m


@njit(cache=True)
def _rel(diff_norm, new_norm):
    if new_norm == 0.0:
        return 0.0 if diff_norm == 0.0 else math.inf
    return diff_norm / new_norm
