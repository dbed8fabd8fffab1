"""Hot loops with a numba path and a pure-numpy path.

The numba versions are compiled lazily on first use. Setting the environment
variable ``LOSCHMIDT_DISABLE_NUMBA=1`` (or running without numba installed)
selects the numpy versions instead. Both paths are always importable so the
benchmark and the tests can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

_RESCALE = 1e250


# ---------------------------------------------------------------------------
# Bessel backward recurrences (Miller)


def _miller_j_loop(n_max, x, start):
    # x > 0. Backward recurrence from `start`, normalized with
    # J_0 + 2 sum J_2k = 1.
    out = np.zeros(n_max + 1)
    f_next = 0.0
    f = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        f_prev = (2.0 * k / x) * f - f_next
        f_next = f
        f = f_prev
        # f now holds order k-1
        if k - 1 <= n_max:
            out[k - 1] = f
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * f
        if abs(f) > _RESCALE:
            f *= 1.0 / _RESCALE
            f_next *= 1.0 / _RESCALE
            norm *= 1.0 / _RESCALE
            for j in range(k - 1, n_max + 1):
                out[j] *= 1.0 / _RESCALE
    norm += f
    for j in range(n_max + 1):
        out[j] /= norm
    return out


def _miller_i_loop(n_max, x, start):
    # x > 0. Returns exp(-x) I_k(x), normalized with I_0 + 2 sum I_k = e^x.
    out = np.zeros(n_max + 1)
    f_next = 0.0
    f = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        f_prev = (2.0 * k / x) * f + f_next
        f_next = f
        f = f_prev
        if k - 1 <= n_max:
            out[k - 1] = f
        if k - 1 > 0:
            norm += 2.0 * f
        if f > _RESCALE:
            f *= 1.0 / _RESCALE
            f_next *= 1.0 / _RESCALE
            norm *= 1.0 / _RESCALE
            for j in range(k - 1, n_max + 1):
                out[j] *= 1.0 / _RESCALE
    norm += f
    for j in range(n_max + 1):
        out[j] /= norm
    return out


# ---------------------------------------------------------------------------
# LU log-determinant with partial pivoting


def _lu_logdet_loop(a):
    """Return (log|det|, arg det, is_zero) of a complex square matrix."""
    m = a.copy()
    n = m.shape[0]
    log_mag = 0.0
    phase = 0.0
    for k in range(n):
        p = k
        best = abs(m[k, k])
        for i in range(k + 1, n):
            v = abs(m[i, k])
            if v > best:
                best = v
                p = i
        if best == 0.0:
            return -np.inf, 0.0, True
        if p != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[p, j]
                m[p, j] = tmp
            phase += np.pi
        piv = m[k, k]
        log_mag += np.log(best)
        phase += np.arctan2(piv.imag, piv.real)
        for i in range(k + 1, n):
            factor = m[i, k] / piv
            if factor != 0:
                for j in range(k + 1, n):
                    m[i, j] -= factor * m[k, j]
    return log_mag, phase, False


def _lu_logdet_numpy(a):
    m = np.array(a, dtype=np.complex128, copy=True)
    n = m.shape[0]
    log_mag = 0.0
    phase = 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        best = abs(m[p, k])
        if best == 0.0:
            return -np.inf, 0.0, True
        if p != k:
            m[[k, p]] = m[[p, k]]
            phase += np.pi
        piv = m[k, k]
        log_mag += np.log(best)
        phase += np.angle(piv)
        if k + 1 < n:
            factors = m[k + 1:, k] / piv
            m[k + 1:, k + 1:] -= np.outer(factors, m[k, k + 1:])
    return log_mag, phase, False


# ---------------------------------------------------------------------------
# Tensor-product eigenvalue sums for N <= 3


def _brute_sum_loop(phi, weight, n, insertion, abc):
    """Sum of |Vandermonde|^2 * prod weight over a tensor grid.

    ``phi`` holds the angles, ``weight`` the one-body weight (already including
    the quadrature step). For ``abc`` the Vandermonde uses 2cos(phi); otherwise
    the unit-circle points exp(i phi). ``insertion`` p >= 0 multiplies by the
    elementary symmetric polynomial e_p of the eigenvalues (PBC only); p < 0
    means no insertion.
    """
    g = phi.shape[0]
    z = np.empty(g, dtype=np.complex128)
    for a in range(g):
        z[a] = complex(np.cos(phi[a]), np.sin(phi[a]))
    # squared distances between grid points
    dist = np.empty((g, g))
    for a in range(g):
        for b in range(g):
            if abc:
                d = 2.0 * (z[a].real - z[b].real)
                dist[a, b] = d * d
            else:
                d = z[a] - z[b]
                dist[a, b] = d.real * d.real + d.imag * d.imag
    total = 0.0 + 0.0j
    if n == 1:
        for a in range(g):
            total += weight[a] * (z[a] if insertion == 1 else 1.0)
        return total
    if n == 2:
        for a in range(g):
            for b in range(g):
                ins = 1.0 + 0.0j
                if insertion == 1:
                    ins = z[a] + z[b]
                elif insertion == 2:
                    ins = z[a] * z[b]
                total += dist[a, b] * weight[a] * weight[b] * ins
        return total
    for a in range(g):
        for b in range(g):
            wab = weight[a] * weight[b] * dist[a, b]
            # e_p is affine in the third eigenvalue: e_p = lead + slope * z_c
            s0 = 0.0 + 0.0j
            s1 = 0.0 + 0.0j
            for c in range(g):
                t = dist[a, c] * dist[b, c] * weight[c]
                s0 += t
                s1 += t * z[c]
            if insertion == 1:
                inner = (z[a] + z[b]) * s0 + s1
            elif insertion == 2:
                inner = z[a] * z[b] * s0 + (z[a] + z[b]) * s1
            elif insertion == 3:
                inner = z[a] * z[b] * s1
            else:
                inner = s0
            total += wab * inner
    return total


def _brute_sum_numpy(phi, weight, n, insertion, abc):
    z = np.exp(1j * phi)
    x = 2.0 * np.cos(phi)
    pts = x if abc else z
    if n == 1:
        ins = z if insertion == 1 else 1.0
        return complex(np.sum(weight * ins))
    if n == 2:
        van = np.abs(pts[:, None] - pts[None, :]) ** 2
        ins = 1.0
        if insertion == 1:
            ins = z[:, None] + z[None, :]
        elif insertion == 2:
            ins = z[:, None] * z[None, :]
        return complex(np.sum(van * weight[:, None] * weight[None, :] * ins))
    # n == 3: loop over the first eigenvalue, broadcast the other two
    vbc = np.abs(pts[:, None] - pts[None, :]) ** 2
    wbc = weight[:, None] * weight[None, :]
    total = 0.0 + 0.0j
    for a in range(phi.shape[0]):
        van = vbc * (np.abs(pts[a] - pts) ** 2)[:, None] * (np.abs(pts[a] - pts) ** 2)[None, :]
        ins = 1.0
        if insertion == 1:
            ins = z[a] + z[:, None] + z[None, :]
        elif insertion == 2:
            ins = z[a] * (z[:, None] + z[None, :]) + z[:, None] * z[None, :]
        elif insertion == 3:
            ins = z[a] * z[:, None] * z[None, :]
        total += weight[a] * np.sum(van * wbc * ins)
    return total


def _miller_j_numpy(n_max, x, start):
    return _miller_j_loop(n_max, x, start)


def _miller_i_numpy(n_max, x, start):
    return _miller_i_loop(n_max, x, start)


NUMPY_KERNELS = {
    "miller_j": _miller_j_numpy,
    "miller_i": _miller_i_numpy,
    "lu_logdet": _lu_logdet_numpy,
    "brute_sum": _brute_sum_numpy,
}

if nb is not None:
    _jit = nb.njit(cache=True, nogil=True)
    NUMBA_KERNELS = {
        "miller_j": _jit(_miller_j_loop),
        "miller_i": _jit(_miller_i_loop),
        "lu_logdet": _jit(_lu_logdet_loop),
        "brute_sum": _jit(_brute_sum_loop),
    }
else:  # pragma: no cover
    NUMBA_KERNELS = None


def numba_enabled() -> bool:
    flag = os.environ.get("LOSCHMIDT_DISABLE_NUMBA", "").strip().lower()
    return NUMBA_KERNELS is not None and flag not in ("1", "true", "yes")


ACTIVE = NUMBA_KERNELS if numba_enabled() else NUMPY_KERNELS
