"""Exact Loschmidt amplitudes of the XY chain from Toeplitz-type determinants.

PBC chains map to a unitary ensemble with one-body weight exp(-2it cos theta)
on the circle; ABC chains to a symplectic one with weight
exp(-4it cos theta) sin^2 theta on [0, pi]. Infinite chains use Bessel
closed forms, finite chains the exact L-point sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .numerics import (
    IMAGINARY_TIME,
    REAL_TIME,
    LogPolarAmplitude,
    TimeArgument,
    bessel_j_row,
    bessel_j_signed,
    circle_points,
    log_det,
    polynomial_coefficients_from_circle,
    symbol_coefficients,
)

PBC = "pbc"
ABC = "abc"

# relative dip of log|G| (against neighbours one scan step away) that marks a
# numerical zero of the amplitude
ZERO_DIP = -25.0


class InvalidSpecError(ValueError):
    pass


class ZeroProximityError(ValueError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    """N flipped spins on a chain of L sites (``sites=None`` for L = infinity)."""

    n_flipped: int
    sites: int | None = None
    boundary: str = PBC

    def __post_init__(self):
        if int(self.n_flipped) != self.n_flipped or self.n_flipped < 1:
            raise InvalidSpecError(f"N must be a positive integer, got {self.n_flipped!r}")
        if self.boundary not in (PBC, ABC):
            raise InvalidSpecError(f"boundary must be 'pbc' or 'abc', got {self.boundary!r}")
        if self.sites is not None:
            if int(self.sites) != self.sites or self.sites < self.n_flipped:
                raise InvalidSpecError(f"finite L must be an integer >= N={self.n_flipped}, got {self.sites!r}")

    @property
    def ell(self) -> Fraction | None:
        return None if self.sites is None else Fraction(self.sites, self.n_flipped)

    def with_n(self, n: int) -> "ChainSpec":
        return ChainSpec(n, self.sites, self.boundary)


@dataclass(frozen=True)
class AmplitudeResult:
    amplitude: LogPolarAmplitude
    echo_log: float
    free_energy: float
    spec: ChainSpec
    time: TimeArgument


def _scale(boundary: str) -> float:
    return 2.0 if boundary == PBC else 4.0


def amplitude_matrix(spec: ChainSpec, value: float) -> np.ndarray:
    """The N x N real-time matrix whose determinant is the amplitude.

    ``value`` is the signed real time.
    """
    n = spec.n_flipped
    if spec.sites is None:
        if spec.boundary == PBC:
            a = np.arange(n)
            diff = a[:, None] - a[None, :]
            row = bessel_j_row(n, -2.0 * value)
            return (1j ** ((-diff) % 4)) * bessel_j_signed(row, diff)
        a = np.arange(1, n + 1)
        diff = a[:, None] - a[None, :]
        tot = a[:, None] + a[None, :]
        row = bessel_j_row(2 * n, -4.0 * value)
        return (1j ** ((-diff) % 4)) * bessel_j_signed(row, diff) - (1j ** ((-tot) % 4)) * row.values[tot]
    if spec.boundary == PBC:
        c = symbol_coefficients(n, REAL_TIME, value, spec.sites)
        a = np.arange(n)
        return c[(a[:, None] - a[None, :]) + n]
    theta, w = _sine_grid(spec.sites)
    weight = w * np.exp(-4j * value * np.cos(theta))
    s = np.sin(np.outer(np.arange(1, n + 1), theta))
    return (s * weight[None, :]) @ s.T


def _sine_grid(sites: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes pi s/(L+1), s = 1..L, orthonormal for the sine modes 1..L
    theta = np.pi * np.arange(1, sites + 1) / (sites + 1)
    return theta, np.full(sites, 2.0 / (sites + 1))


def _continuum_grid(spec: ChainSpec, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # Trapezoid nodes fine enough that the discrete measure reproduces the
    # continuum Gram matrix to roundoff: aliasing is controlled by
    # I_m(scale*beta) with m beyond the polynomial degree.
    n = spec.n_flipped
    x = _scale(spec.boundary) * abs(beta)
    m = 2 * n + 64 + int(math.ceil(4 * x))
    if spec.boundary == PBC:
        return _circle_grid(m)
    theta = np.pi * np.arange(1, m) / m
    return theta, np.full(m - 1, 2.0 / m)


def _circle_grid(m: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes 2 pi (s-1)/m, s = 1..m
    return 2.0 * np.pi * np.arange(m) / m, np.full(m, 1.0 / m)


def _gram_log_det(spec: ChainSpec, beta: float) -> float:
    """log det of the imaginary-time Gram matrix via orthogonal polynomials.

    The moment matrix of a positive weight is exponentially ill-conditioned in
    beta, so instead of factoring it we build the orthonormal polynomials with
    Arnoldi (PBC, multiplication by z) or Lanczos (ABC, multiplication by
    cos theta) on the discrete measure, with full reorthogonalization. The
    determinant is the product of the monic norms h_k.
    """
    n = spec.n_flipped
    x = _scale(spec.boundary) * beta
    if spec.sites is None:
        theta, w = _continuum_grid(spec, beta)
    elif spec.boundary == PBC:
        theta, w = _circle_grid(spec.sites)
    else:
        theta, w = _sine_grid(spec.sites)
    log_w = np.log(w) - x * np.cos(theta)
    if spec.boundary == ABC:
        log_w = log_w + 2 * np.log(np.sin(theta))
        mult = np.cos(theta).astype(complex)
        # sin(a theta) = sin(theta) U_{a-1}(cos theta), leading coefficient 2^(a-1)
        offset = math.log(4.0) * n * (n - 1) / 2
    else:
        mult = np.exp(1j * theta)
        offset = 0.0
    shift = float(np.max(log_w))
    v = np.exp(0.5 * (log_w - shift)).astype(complex)
    norm = np.linalg.norm(v)
    total = 2 * math.log(norm) + shift
    log_h = total
    q = np.zeros((n, v.size), dtype=complex)
    q[0] = v / norm
    for k in range(1, n):
        r = mult * q[k - 1]
        for _ in range(2):
            r = r - q[:k].T @ (q[:k].conj() @ r)
        rn = np.linalg.norm(r)
        if rn == 0.0:
            return -math.inf
        log_h += 2 * math.log(rn)
        total += log_h
        q[k] = r / rn
    return total + offset


def log_amplitude(spec: ChainSpec, kind: str, value: float) -> LogPolarAmplitude:
    """Amplitude at a signed time value (real t or imaginary beta)."""
    if kind == REAL_TIME:
        return log_det(amplitude_matrix(spec, value))
    if kind != IMAGINARY_TIME:
        raise ValueError(f"unknown time kind {kind!r}")
    return LogPolarAmplitude(_gram_log_det(spec, value), 0.0)


def _result(spec: ChainSpec, time: TimeArgument, amp: LogPolarAmplitude) -> AmplitudeResult:
    n2 = spec.n_flipped ** 2
    echo_log = 2.0 * amp.log_magnitude
    if time.kind == REAL_TIME:
        fe = math.inf if amp.is_zero else -echo_log / (2 * n2)
    else:
        fe = amp.log_magnitude / n2
    if fe == 0.0:
        fe = 0.0  # drop negative zero
    return AmplitudeResult(amp, echo_log, fe, spec, time)


def amplitude(spec: ChainSpec, time: TimeArgument) -> AmplitudeResult:
    return _result(spec, time, log_amplitude(spec, time.kind, time.value))


def thermal_bessel_log_det(spec: ChainSpec, beta: float) -> LogPolarAmplitude:
    """Imaginary-time amplitude from the modified-Bessel Toeplitz(+Hankel) matrix.

    Only well conditioned for small beta; kept as a cross-check of the
    orthogonal-polynomial route used by ``amplitude``.
    """
    if spec.sites is not None:
        raise InvalidSpecError("the modified-Bessel form is the infinite-chain one")
    n = spec.n_flipped
    if spec.boundary == PBC:
        c = symbol_coefficients(n, IMAGINARY_TIME, beta, None, 2.0)
        a = np.arange(n)
        return log_det(c[(a[:, None] - a[None, :]) + n])
    c = symbol_coefficients(2 * n + 1, IMAGINARY_TIME, beta, None, 4.0)
    a = np.arange(1, n + 1)
    k0 = 2 * n + 1
    return log_det(c[(a[:, None] - a[None, :]) + k0] - c[(a[:, None] + a[None, :]) + k0])


def brute_force_amplitude(spec: ChainSpec, time: TimeArgument, grid: int = 512, insertion: int | None = None) -> LogPolarAmplitude:
    """N-fold eigenvalue integral by tensor-product trapezoid sums (N <= 3).

    ``insertion=p`` inserts the elementary symmetric polynomial e_p of the
    eigenvalues (PBC only), giving <e_p(U)> times the amplitude.
    """
    n = spec.n_flipped
    if n > 3:
        raise InvalidSpecError("brute-force integration is limited to N <= 3")
    if grid < 256:
        raise ValueError("grid must be >= 256")
    if spec.sites is not None:
        raise InvalidSpecError("brute-force integration is for the infinite chain")
    if insertion is not None and (spec.boundary != PBC or not 0 <= insertion <= n):
        raise ValueError("insertion needs PBC and 0 <= p <= N")
    x = _scale(spec.boundary) * time.value
    if spec.boundary == PBC:
        phi = 2 * np.pi * np.arange(grid) / grid
        one_body = np.full(grid, 1.0 / grid, dtype=complex)
    else:
        # endpoints carry sin^2 = 0, so interior nodes give the full trapezoid sum
        phi = np.pi * np.arange(1, grid) / grid
        one_body = (2.0 / np.pi) * np.sin(phi) ** 2 * (np.pi / grid) + 0j
    if time.kind == REAL_TIME:
        one_body = one_body * np.exp(-1j * x * np.cos(phi))
    else:
        one_body = one_body * np.exp(-x * np.cos(phi))
    p = -1 if insertion is None else int(insertion)
    total = _kernels.ACTIVE["brute_sum"](phi, one_body, n, p, spec.boundary == ABC)
    return LogPolarAmplitude.from_complex(total / math.factorial(n))


@dataclass(frozen=True)
class SweepRow:
    tau: float
    t: float
    log_echo: float
    f: float
    phase: float
    is_zero: bool


def _numerical_zero(spec: ChainSpec, t: float, amp: LogPolarAmplitude) -> bool:
    """Whether |G(t)| is a numerical zero relative to its neighbourhood."""
    if amp.is_zero:
        return True
    if t == 0.0:
        return False
    step = 0.01 * spec.n_flipped
    lo = log_amplitude(spec, REAL_TIME, t - step).log_magnitude
    hi = log_amplitude(spec, REAL_TIME, t + step).log_magnitude
    return amp.log_magnitude - max(lo, hi) < ZERO_DIP


def sweep_row(spec: ChainSpec, tau: float) -> SweepRow:
    t = spec.n_flipped * tau
    amp = log_amplitude(spec, REAL_TIME, t)
    if _numerical_zero(spec, t, amp):
        return SweepRow(tau, t, -math.inf, math.inf, 0.0, True)
    res = _result(spec, TimeArgument(REAL_TIME, t, tau), amp)
    return SweepRow(tau, t, res.echo_log, res.free_energy, amp.phase, False)


def dynamical_free_energy_sweep(spec: ChainSpec, taus: Sequence[float]) -> list[SweepRow]:
    taus = [float(x) for x in taus]
    if any(x < 0 for x in taus) or any(b < a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be nonnegative and ascending")
    return [sweep_row(spec, x) for x in taus]


def impurity_generating(n: int, t: float, w: complex) -> LogPolarAmplitude:
    """<det(1 + wU)> times the amplitude, for the infinite PBC chain."""
    if n < 2:
        raise InvalidSpecError("impurity amplitudes need N >= 2")
    c = symbol_coefficients(n + 1, REAL_TIME, t, None)
    a = np.arange(n)
    diff = a[:, None] - a[None, :] + (n + 1)
    # multiplying the weight by (1 + w e^{i theta}) shifts the moments by one
    return log_det(c[diff] + w * c[diff + 1])


def impurity_ratio(n: int, t: float, p: int) -> complex:
    """<e_p(U)>: the w^p coefficient of <det(1 + wU)>."""
    if not 0 <= p <= n:
        raise ValueError(f"p must lie in 0..{n}, got {p!r}")
    if p == 0:
        return 1.0 + 0.0j
    base = log_amplitude(ChainSpec(n), REAL_TIME, t)
    if base.is_zero:
        raise ZeroProximityError(f"amplitude vanishes at N={n}, t={t}")
    vals = [(impurity_generating(n, t, w) / base).to_complex() for w in circle_points(n + 1)]
    return complex(polynomial_coefficients_from_circle(vals, n)[p])


def _unwrapped_logs(spec: ChainSpec, kind: str, points: Iterable[float], centre: LogPolarAmplitude) -> np.ndarray:
    out = []
    for x in points:
        a = log_amplitude(spec, kind, x)
        if a.is_zero:
            raise ZeroProximityError(f"amplitude vanishes at {kind} time {x}")
        dphi = math.remainder(a.phase - centre.phase, 2 * math.pi)
        out.append(complex(a.log_magnitude, centre.phase + dphi))
    return np.array(out)


def _check_smooth(spec: ChainSpec, kind: str, x: float, h: float) -> LogPolarAmplitude:
    centre = log_amplitude(spec, kind, x)
    if centre.is_zero:
        raise ZeroProximityError(f"amplitude vanishes at {kind} time {x}")
    for y in (x - 10 * h, x + 10 * h):
        a = log_amplitude(spec, kind, y)
        if a.is_zero or abs(math.remainder(a.phase - centre.phase, 2 * math.pi)) > math.pi / 2:
            raise ZeroProximityError(f"N={spec.n_flipped}: {kind} time {x} is within {10 * h:g} of an amplitude zero")
    return centre


def _stencil(spec: ChainSpec, kind: str, x: float, h: float, order: int, centre: LogPolarAmplitude) -> complex:
    g = _unwrapped_logs(spec, kind, [x - 2 * h, x - h, x, x + h, x + 2 * h], centre)
    if order == 1:
        return (g[3] - g[1]) / (2 * h)
    if order == 2:
        return (g[3] - 2 * g[2] + g[1]) / h ** 2
    return (g[4] - 2 * g[3] + 2 * g[1] - g[0]) / (2 * h ** 3)


def log_amplitude_derivatives(spec: ChainSpec, time: TimeArgument, order: int) -> list[complex]:
    """First ``order`` derivatives of ln G with respect to t (or beta).

    Central differences with step max(1e-4, 1e-3 x), one Richardson step.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = time.value
    h = max(1e-4, 1e-3 * x)
    centre = _check_smooth(spec, time.kind, x, h)
    out = []
    for k in range(1, order + 1):
        coarse = _stencil(spec, time.kind, x, h, k, centre)
        fine = _stencil(spec, time.kind, x, h / 2, k, centre)
        out.append((4 * fine - coarse) / 3)
    return out
