"""Compiled inner loops: the pairwise birth-death-move chain and the 1D Sturm count."""

import math

import numpy as np
from numba import njit

# status codes returned by the chain kernel
DONE = 0
FULL = 1


@njit(cache=True)
def _phi(r, kind, par, kr, kv):
    if kind == 1:
        return par[0] if r <= par[1] else 0.0
    if kind == 2:
        return math.inf if r <= par[1] else 0.0
    if kind == 3:
        if r > 0.0 and r <= par[1]:
            return math.exp(-(r ** (-par[0])))
        return 0.0
    if kind == 4:
        if r > kr[kr.shape[0] - 1]:
            return 0.0
        return np.interp(r, kr, kv)
    return 0.0


@njit(cache=True)
def _local_energy(x, pts, n, skip, bnd, kind, par, kr, kv, rng_max):
    """sum_j phi(x - x_j) over current points (except ``skip``) and boundary points."""
    if kind == 0:
        return 0.0
    d = pts.shape[1]
    s = 0.0
    for i in range(n):
        if i == skip:
            continue
        r2 = 0.0
        for k in range(d):
            t = x[k] - pts[i, k]
            r2 += t * t
        r = math.sqrt(r2)
        if r <= rng_max:
            s += _phi(r, kind, par, kr, kv)
            if s == math.inf:
                return s
    for i in range(bnd.shape[0]):
        r2 = 0.0
        for k in range(d):
            t = x[k] - bnd[i, k]
            r2 += t * t
        r = math.sqrt(r2)
        if r <= rng_max:
            s += _phi(r, kind, par, kr, kv)
            if s == math.inf:
                return s
    return s


@njit(cache=True)
def pairwise_chain(pts, n, bnd, uni, loc, disp, lo, hi, vol, kind, par, kr, kv, rng_max,
                   thin, phase, out_pts, out_n, acc):
    """Advance the chain over the steps of one chunk of random numbers.

    ``uni[s] = (move type, index, accept)``; ``loc[s]`` is the birth site and
    ``disp[s]`` the move displacement. A sample is recorded after step ``s``
    when ``(s + phase) % thin == thin - 1`` (``thin = 0`` records nothing).

    Returns ``(status, steps_done, n, n_recorded, n_coords)``; ``status == FULL``
    means the point buffer is exhausted and the caller must grow ``pts`` and
    resume from ``steps_done``.
    """
    d = pts.shape[1]
    cap = pts.shape[0]
    n_rec = 0
    n_coord = 0
    x = np.empty(d)
    for s in range(uni.shape[0]):
        kind_u = uni[s, 0]
        if kind_u < 1.0 / 3.0:
            # birth
            acc[0, 0] += 1
            if n >= cap:
                acc[0, 0] -= 1
                return FULL, s, n, n_rec, n_coord
            for k in range(d):
                x[k] = loc[s, k]
            h = _local_energy(x, pts, n, -1, bnd, kind, par, kr, kv, rng_max)
            if h < math.inf:
                ratio = vol * math.exp(-h) / (n + 1)
                if uni[s, 2] < ratio:
                    for k in range(d):
                        pts[n, k] = x[k]
                    n += 1
                    acc[0, 1] += 1
        elif kind_u < 2.0 / 3.0:
            # death
            acc[1, 0] += 1
            if n > 0:
                j = min(int(uni[s, 1] * n), n - 1)
                for k in range(d):
                    x[k] = pts[j, k]
                h = _local_energy(x, pts, n, j, bnd, kind, par, kr, kv, rng_max)
                ratio = n * math.exp(h) / vol
                if uni[s, 2] < ratio:
                    for k in range(d):
                        pts[j, k] = pts[n - 1, k]
                    n -= 1
                    acc[1, 1] += 1
        else:
            # move
            acc[2, 0] += 1
            if n > 0:
                j = min(int(uni[s, 1] * n), n - 1)
                inside = True
                for k in range(d):
                    x[k] = pts[j, k] + disp[s, k]
                    if x[k] < lo[k] or x[k] > hi[k]:
                        inside = False
                if inside:
                    h_new = _local_energy(x, pts, n, j, bnd, kind, par, kr, kv, rng_max)
                    if h_new < math.inf:
                        h_old = _local_energy(pts[j], pts, n, j, bnd, kind, par, kr, kv, rng_max)
                        if uni[s, 2] < math.exp(h_old - h_new):
                            for k in range(d):
                                pts[j, k] = x[k]
                            acc[2, 1] += 1
        if thin > 0 and (s + phase) % thin == thin - 1:
            out_n[n_rec] = n
            for i in range(n):
                for k in range(d):
                    out_pts[n_coord + i, k] = pts[i, k]
            n_coord += n
            n_rec += 1
    return DONE, uni.shape[0], n, n_rec, n_coord


@njit(cache=True)
def sturm_counts(diag, off2, lams, tiny):
    """Negative pivots of the LDL^T factorization of T - lambda for a symmetric tridiagonal T.

    ``off2`` holds the squared off-diagonal entries. Returns ``(counts,
    flagged)``; ``flagged[i]`` is set when a pivot fell below ``tiny`` in
    magnitude for ``lams[i]``.
    """
    m = lams.shape[0]
    n = diag.shape[0]
    counts = np.zeros(m, np.int64)
    flagged = np.zeros(m, np.bool_)
    for i in range(m):
        lam = lams[i]
        q = diag[0] - lam
        c = 0
        for k in range(n):
            if k:
                q = diag[k] - lam - off2[k - 1] / q
            if abs(q) < tiny:
                flagged[i] = True
                q = tiny
            if q < 0:
                c += 1
        counts[i] = c
    return counts, flagged
