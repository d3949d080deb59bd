"""Compiled per-trajectory evolution loops.

Each kernel advances a batch of density matrices through one constant-coupling
measurement window.  The batch axis is the trajectory index; every trajectory
consumes its own pre-drawn noise row, so results are independent of batching
and threading.  ``status[b]`` stays -1 while trajectory ``b`` is healthy and
records the global step at which its branch probabilities or trace became
unusable otherwise (``reason[b]`` = REASON_BAD_PROB).  Euler positivity
excursions are tracked, not fatal.

All kernels hermitize and renormalize in a single pass: the updated state is
(X + X^dag) / (2 Tr X), which is exactly Hermitian in floating point.
"""

import numpy as np
from numba import njit

REASON_BAD_PROB = 1
REASON_POSITIVITY = 2

#: Euler states are flagged when a diagonal entry drops below this.
POSITIVITY_FLOOR = -1e-6


@njit(inline="always")
def _trace_prod(r, a):
    # Re Tr(r @ a)
    d = r.shape[0]
    out = 0.0
    for i in range(d):
        for k in range(d):
            out += (r[i, k] * a[k, i]).real
    return out


@njit(inline="always")
def _sandwich(r, m, tmp, x):
    # x = m @ r @ m^dag; returns Re Tr x
    d = r.shape[0]
    for i in range(d):
        for k in range(d):
            acc = 0.0 + 0.0j
            for l in range(d):
                acc += m[i, l] * r[l, k]
            tmp[i, k] = acc
    tr = 0.0
    for i in range(d):
        for k in range(d):
            acc = 0.0 + 0.0j
            for l in range(d):
                acc += tmp[i, l] * np.conj(m[k, l])
            x[i, k] = acc
        tr += x[i, i].real
    return tr


@njit(inline="always")
def _hermitize_scaled(r, x, inv):
    d = r.shape[0]
    for i in range(d):
        r[i, i] = x[i, i].real * inv + 0.0j
        for k in range(i + 1, d):
            val = 0.5 * (x[i, k] + np.conj(x[k, i])) * inv
            r[i, k] = val
            r[k, i] = np.conj(val)


@njit(inline="always")
def _kraus_one_step(r, mp, mm, npl, nmn, uval, tmp, x):
    # returns False when branch probabilities are unusable
    pp = _trace_prod(r, npl)
    pm = _trace_prod(r, nmn)
    tot = pp + pm
    if not (tot > 0.0 and np.isfinite(tot)):
        return False
    m = mp if uval < pp / tot else mm
    tr = _sandwich(r, m, tmp, x)
    if not (tr > 0.0 and np.isfinite(tr)):
        return False
    _hermitize_scaled(r, x, 1.0 / tr)
    return True


@njit(cache=True, nogil=True)
def kraus_window(rho, mp, mm, npl, nmn, u, status, reason, g0, rec_stride, rec_out):
    """Advance every trajectory through ``u.shape[1]`` Kraus steps.

    When ``rec_stride > 0`` the state after global step g is stored whenever
    g is a multiple of ``rec_stride`` (g counts from 1 at the first step of
    the run; the window starts at global step ``g0``).
    """
    nb, d = rho.shape[0], rho.shape[1]
    n = u.shape[1]
    tmp = np.empty((d, d), np.complex128)
    x = np.empty((d, d), np.complex128)
    for b in range(nb):
        if status[b] >= 0:
            continue
        r = rho[b]
        rec = 0
        for j in range(n):
            if not _kraus_one_step(r, mp, mm, npl, nmn, u[b, j], tmp, x):
                status[b] = g0 + j
                reason[b] = REASON_BAD_PROB
                break
            if rec_stride > 0 and (g0 + j + 1) % rec_stride == 0:
                for i in range(d):
                    for k in range(d):
                        rec_out[b, rec, i, k] = r[i, k]
                rec += 1


@njit(cache=True, nogil=True)
def kraus_window_first_passage(
    rho, mp, mm, npl, nmn, u, projs, threshold, status, reason, g0, first_step, first_target
):
    """Record the first global step at which any target probability reaches
    ``threshold``; trajectories stop evolving once they have arrived."""
    nb, d = rho.shape[0], rho.shape[1]
    n = u.shape[1]
    nk = projs.shape[0]
    tmp = np.empty((d, d), np.complex128)
    x = np.empty((d, d), np.complex128)
    for b in range(nb):
        if status[b] >= 0 or first_step[b] >= 0:
            continue
        r = rho[b]
        for j in range(n):
            if not _kraus_one_step(r, mp, mm, npl, nmn, u[b, j], tmp, x):
                status[b] = g0 + j
                reason[b] = REASON_BAD_PROB
                break
            best = -1
            best_p = threshold
            for k in range(nk):
                p = _trace_prod(r, projs[k])
                if p >= best_p:
                    best_p = p
                    best = k
            if best >= 0:
                first_step[b] = g0 + j + 1
                first_target[b] = best
                break


@njit(cache=True, nogil=True)
def kraus_window_absorb(
    rho, mp, mm, npl, nmn, u, projs, lo, crossed, max_after, status, reason, g0
):
    """Track, per target projector, the largest probability seen after the
    probability first drops to ``lo`` or below."""
    nb, d = rho.shape[0], rho.shape[1]
    n = u.shape[1]
    nk = projs.shape[0]
    tmp = np.empty((d, d), np.complex128)
    x = np.empty((d, d), np.complex128)
    for b in range(nb):
        if status[b] >= 0:
            continue
        r = rho[b]
        for j in range(n):
            if not _kraus_one_step(r, mp, mm, npl, nmn, u[b, j], tmp, x):
                status[b] = g0 + j
                reason[b] = REASON_BAD_PROB
                break
            for k in range(nk):
                p = _trace_prod(r, projs[k])
                if crossed[b, k] != 0:
                    if p > max_after[b, k]:
                        max_after[b, k] = p
                elif p <= lo:
                    crossed[b, k] = 1
                    max_after[b, k] = p


@njit(cache=True, nogil=True)
def euler_window(rho, hmat, g_op, g_op2, amp, dt, w, status, reason, g0, rec_stride, rec_out, min_diag):
    """Euler-Maruyama steps for one window with channel ``amp * g_op``.

    ``w`` holds standard-normal draws (one per step); the Wiener increment is
    w * sqrt(dt).  Every step re-hermitizes and renormalizes.  Positivity is
    not repaired: ``min_diag[b]`` tracks the most negative diagonal entry
    seen so callers can surface excursions below POSITIVITY_FLOOR.
    """
    nb, d = rho.shape[0], rho.shape[1]
    n = w.shape[1]
    sqdt = np.sqrt(dt)
    a2 = amp * amp
    tmp = np.empty((d, d), np.complex128)
    x = np.empty((d, d), np.complex128)
    upd = np.empty((d, d), np.complex128)
    for b in range(nb):
        if status[b] >= 0:
            continue
        r = rho[b]
        rec = 0
        for j in range(n):
            dw = w[b, j] * sqdt
            # tmp = G @ r, x = r @ G
            for i in range(d):
                for k in range(d):
                    accl = 0.0 + 0.0j
                    accr = 0.0 + 0.0j
                    for l in range(d):
                        accl += g_op[i, l] * r[l, k]
                        accr += r[i, l] * g_op[l, k]
                    tmp[i, k] = accl
                    x[i, k] = accr
            mean_g = 0.0
            for i in range(d):
                mean_g += tmp[i, i].real
            for i in range(d):
                for k in range(d):
                    # drift: amp^2 (G r G - (G^2 r + r G^2)/2) - i[H, r]
                    acc = 0.0 + 0.0j
                    for l in range(d):
                        acc += (
                            a2 * tmp[i, l] * g_op[l, k]
                            - 0.5 * a2 * (g_op2[i, l] * r[l, k] + r[i, l] * g_op2[l, k])
                            - 1j * (hmat[i, l] * r[l, k] - r[i, l] * hmat[l, k])
                        )
                    noise = amp * (x[i, k] + tmp[i, k] - 2.0 * mean_g * r[i, k])
                    upd[i, k] = r[i, k] + acc * dt + noise * dw
            tr = 0.0
            for i in range(d):
                tr += upd[i, i].real
            if not (tr > 0.0 and np.isfinite(tr)):
                status[b] = g0 + j
                reason[b] = REASON_BAD_PROB
                break
            inv = 1.0 / tr
            for i in range(d):
                diag = upd[i, i].real * inv
                if diag < min_diag[b]:
                    min_diag[b] = diag
                r[i, i] = diag + 0.0j
                for k in range(i + 1, d):
                    val = 0.5 * (upd[i, k] + np.conj(upd[k, i])) * inv
                    r[i, k] = val
                    r[k, i] = np.conj(val)
            if rec_stride > 0 and (g0 + j + 1) % rec_stride == 0:
                for i in range(d):
                    for k in range(d):
                        rec_out[b, rec, i, k] = r[i, k]
                rec += 1


@njit(cache=True, nogil=True)
def window_end_probs(rho, projs, out):
    """out[b, k] = Re Tr(rho[b] projs[k]) for a batch of states."""
    nb = rho.shape[0]
    nk = projs.shape[0]
    for b in range(nb):
        for k in range(nk):
            out[b, k] = _trace_prod(rho[b], projs[k])
