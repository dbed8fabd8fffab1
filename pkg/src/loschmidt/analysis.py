"""Diagnostics tying the exact amplitudes to the planar predictions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from .echo import (
    ABC,
    PBC,
    ChainSpec,
    ZeroProximityError,
    amplitude_matrix,
    log_amplitude,
    log_amplitude_derivatives,
)
from .numerics import (
    IMAGINARY_TIME,
    REAL_TIME,
    ExponentialFit,
    TimeArgument,
    find_root_bracketed,
    fit_exponential,
)
from .planar import critical_time

ZERO_ENVELOPE_DIP = -30.0  # scan trigger, relative to the trailing envelope
ZERO_CLASSIFY_DIP = -25.0  # refined classification threshold
QSL_REFINEMENT = 1e-14
ERROR_FLOOR = 1e-15


class NoZeroInWindow(ValueError):
    pass


@dataclass(frozen=True)
class QslRecord:
    n_flipped: int
    tau_qsl: float
    t_zero: float
    refinement_width: float
    dip: float  # log|G(t_zero)| minus the trailing envelope


def _sites(n: int, ell) -> int:
    L = Fraction(ell).limit_denominator(10**6) * n
    if L.denominator != 1:
        raise ValueError(f"L = ell*N = {float(L)} is not an integer")
    return int(L)


def error_E(n: int, ell, x: float, time_kind: str = REAL_TIME, boundary: str = PBC) -> float:
    """ln of the finite-L echo over the infinite-L echo at t = N x (or beta = N x)."""
    finite = ChainSpec(n, _sites(n, ell), boundary)
    infinite = ChainSpec(n, None, boundary)
    value = n * x
    ref = log_amplitude(infinite, time_kind, value)
    if ref.is_zero:
        raise ZeroProximityError(f"reference echo vanishes at N={n}, x={x}")
    if x == 0:
        return 0.0
    return 2.0 * (log_amplitude(finite, time_kind, value).log_magnitude - ref.log_magnitude)


def finite_free_energy(n: int, sites: int | None, tau: float, boundary: str = PBC) -> float:
    amp = log_amplitude(ChainSpec(n, sites, boundary), REAL_TIME, n * tau)
    return -amp.log_magnitude / n**2


def first_phase_deviation(n: int, sites: int, tau: float, digits: int = 40) -> float:
    """f_{N,L}(tau) - tau^2 for a finite PBC chain, evaluated in extended precision.

    Deep in the first phase the deviation falls far below the rounding error
    of a double-precision f (about 1e-24 at N=10, L=30, tau=0.05), so its sign
    can only be read off a higher-precision determinant.
    """
    if sites < n:
        raise ValueError("need L >= N")
    with mpmath.workdps(digits):
        t = mpmath.mpf(n) * mpmath.mpf(tau)
        nodes = [2 * mpmath.pi * s / sites for s in range(sites)]
        phases = [-2 * t * mpmath.cos(x) for x in nodes]
        coeff = {
            k: mpmath.fsum(mpmath.expj(ph + k * x) for ph, x in zip(phases, nodes)) / sites
            for k in range(-n + 1, n)
        }
        m = mpmath.matrix(n, n)
        for a in range(n):
            for b in range(n):
                m[a, b] = coeff[a - b]
        dev = -mpmath.log(abs(mpmath.det(m))) / n**2 - mpmath.mpf(tau) ** 2
        return float(dev)


def error_R(n: int, ell, tau: float) -> float:
    """1 - tau^2 / f_{N,L}(tau) for PBC chains in the first phase."""
    tc = critical_time()
    if not 0.05 <= tau <= tc - 0.02:
        raise ValueError(f"tau must lie in [0.05, tau_cr - 0.02], got {tau}")
    f = finite_free_energy(n, _sites(n, ell), tau)
    return 1.0 - tau * tau / f


def decay_rate_vs_ell(n: int, tau: float, ells: Sequence, boundary: str = PBC) -> ExponentialFit:
    """Exponential fit of |E_N| against L - N."""
    xs, ys = [], []
    for ell in ells:
        if ell < 2:
            raise ValueError("decay fits use ell >= 2")
        L = _sites(n, ell)
        xs.append(L - n)
        ys.append(max(abs(error_E(n, ell, tau, REAL_TIME, boundary)), ERROR_FLOOR))
    return fit_exponential(xs, ys)


# ---------------------------------------------------------------------------
# quantum speed limit


def qsl_time(n: int) -> QslRecord:
    """First zero of the infinite-chain PBC amplitude (odd N; even N has none).

    The scan walks t in steps of 0.01 N. A zero is bracketed either by a phase
    flip between neighbouring samples (the amplitude is real up to a constant
    phase, so a flip is a sign change) or by a dip of log|G| 30 below its
    trailing envelope. A dip only counts as a zero when the refined minimum
    also sits 25 below both scan neighbours: |G| itself falls like exp(-t^2),
    so the trailing envelope alone flags plain decay at larger N.
    """
    if n < 1:
        raise ValueError("N must be positive")
    spec = ChainSpec(n)
    step = 0.01 * n
    window = 20  # 0.2 N in t
    logs = [0.0]
    phases = [0.0]
    k = 0
    while k * step < 2 * n:
        k += 1
        t = k * step
        a = log_amplitude(spec, REAL_TIME, t)
        if a.is_zero:
            return QslRecord(n, t / n, t, 0.0, -math.inf)
        if math.cos(a.phase - phases[-1]) < 0:
            return _refine_sign_change(spec, t - step, t, logs[-1], phases[-1], max(logs[-1], a.log_magnitude))
        if a.log_magnitude < max(logs[-window:]) + ZERO_ENVELOPE_DIP:
            rec = _refine_dip(spec, t - step, t + step)
            if rec is not None:
                return rec
        logs.append(a.log_magnitude)
        phases.append(a.phase)
    raise NoZeroInWindow(f"no zero of the N={n} amplitude for t <= {2 * n}")


def _refine_sign_change(spec, lo, hi, ref_log, ref_phase, local) -> QslRecord:
    def signed(t):
        a = log_amplitude(spec, REAL_TIME, t)
        if a.is_zero:
            return 0.0
        return math.exp(a.log_magnitude - ref_log) * math.cos(a.phase - ref_phase)

    t0 = find_root_bracketed(signed, lo, hi, QSL_REFINEMENT)
    dip = log_amplitude(spec, REAL_TIME, t0).log_magnitude - local
    n = spec.n_flipped
    return QslRecord(n, t0 / n, t0, QSL_REFINEMENT, dip)


def _refine_dip(spec, lo, hi) -> QslRecord | None:
    res = minimize_scalar(
        lambda t: log_amplitude(spec, REAL_TIME, t).log_magnitude,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": QSL_REFINEMENT},
    )
    local = max(log_amplitude(spec, REAL_TIME, x).log_magnitude for x in (lo, hi))
    dip = float(res.fun) - local
    if dip >= ZERO_CLASSIFY_DIP:
        return None
    n = spec.n_flipped
    return QslRecord(n, float(res.x) / n, float(res.x), QSL_REFINEMENT, dip)


def qsl_sequence(k_max: int) -> list[QslRecord]:
    """QSL records for N = 3, 5, ..., 2 k_max + 1."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return [qsl_time(2 * k + 1) for k in range(1, k_max + 1)]


@dataclass(frozen=True)
class QslSummary:
    minimum: float
    last_step_sign: int
    first_gap: float
    last_gap: float


def qsl_summary(records: Sequence[QslRecord]) -> QslSummary:
    taus = [r.tau_qsl for r in records]
    tc = critical_time()
    step = taus[-1] - taus[-2] if len(taus) > 1 else 0.0
    return QslSummary(min(taus), int(np.sign(step)), taus[0] - tc, taus[-1] - tc)


# ---------------------------------------------------------------------------
# identities


def toda_residual(n: int, t: float) -> float:
    """Relative residual of G_{N+1}^2 d^2/dt^2 ln G_{N+1} = -4 G_N G_{N+2} (ABC chains)."""
    if t <= 0:
        raise ValueError("t must be positive")
    mid = ChainSpec(n + 1, None, ABC)
    d2 = log_amplitude_derivatives(mid, TimeArgument.real(t), 2)[1]
    g_mid = log_amplitude(mid, REAL_TIME, t)
    g_lo = log_amplitude(ChainSpec(n, None, ABC), REAL_TIME, t)
    g_hi = log_amplitude(ChainSpec(n + 2, None, ABC), REAL_TIME, t)
    # divide both sides by G_{N+1}^2 to stay in range
    ratio = (g_lo * g_hi / (g_mid * g_mid)).to_complex()
    rhs = -4.0 * ratio
    return abs(d2 - rhs) / (abs(d2) + abs(rhs))


def _jacobi_first_moment(n: int, t: float) -> complex:
    """d/dt ln G = tr(M^{-1} M') for the infinite PBC chain."""
    spec = ChainSpec(n)
    m = amplitude_matrix(spec, t)
    # with J_k' = (J_{k-1} - J_{k+1})/2 the i^{b-a} J_{a-b}(-2t) entries obey
    # M'_{ab} = i (M_{a+1,b} + M_{a-1,b})
    big = amplitude_matrix(ChainSpec(n + 2), t)
    # rows shifted by +-1 of the (n+2)-sized matrix, columns 1..n
    up = big[2:, 1:-1]
    down = big[:-2, 1:-1]
    dm = 1j * (up + down)
    return complex(np.trace(np.linalg.solve(m, dm)))


def factorization_check(n: int, tau: float) -> float:
    """|d^2 f/d tau^2 from f itself minus the same from the Jacobi first moment|."""
    if n % 2:
        raise ValueError("factorization_check is defined for even N")
    if not 0 <= tau < critical_time():
        raise ValueError("tau must lie in the first phase")
    t = n * tau
    h = max(1e-3, 1e-3 * tau)

    def f(x):
        return -log_amplitude(ChainSpec(n), REAL_TIME, n * x).log_magnitude / n**2

    def second(hh):
        return (f(tau + hh) - 2 * f(tau) + f(tau - hh)) / hh**2

    route_a = (4 * second(h / 2) - second(h)) / 3

    ht = n * h

    def first_diff(hh):
        return (_jacobi_first_moment(n, t + hh) - _jacobi_first_moment(n, t - hh)) / (2 * hh)

    d2_log = (4 * first_diff(ht / 2) - first_diff(ht)) / 3
    # f = -Re ln G / N^2 with t = N tau, so d^2 f/d tau^2 = -Re d^2 ln G/dt^2
    route_b = -d2_log.real
    return abs(route_a - route_b)


def second_tau_derivative(n: int, tau: float) -> float:
    """d^2 f/d tau^2 of the exact infinite-chain PBC free energy."""
    d2 = log_amplitude_derivatives(ChainSpec(n), TimeArgument.real(n * tau), 2)[1]
    return -d2.real
