"""Special functions, log-polar determinants and small numerical utilities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _kernels

TWO_PI = 2.0 * math.pi


def reduce_phase(phase: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(float(phase), TWO_PI)
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class LogPolarAmplitude:
    """Complex number stored as (log|z|, arg z).

    ``log_magnitude = -inf`` encodes an exact zero; the phase is then 0.
    """

    log_magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        lm = float(self.log_magnitude)
        if math.isnan(lm) or lm == math.inf:
            raise ValueError(f"invalid log-magnitude {self.log_magnitude!r}")
        object.__setattr__(self, "log_magnitude", lm)
        object.__setattr__(self, "phase", 0.0 if lm == -math.inf else reduce_phase(self.phase))

    @classmethod
    def from_complex(cls, z: complex) -> "LogPolarAmplitude":
        z = complex(z)
        if z == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(z)), math.atan2(z.imag, z.real))

    @property
    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return math.exp(self.log_magnitude) * complex(math.cos(self.phase), math.sin(self.phase))

    def log(self) -> complex:
        """Principal complex logarithm."""
        return complex(self.log_magnitude, self.phase)

    def conjugate(self) -> "LogPolarAmplitude":
        return LogPolarAmplitude(self.log_magnitude, -self.phase)

    def __mul__(self, other: "LogPolarAmplitude") -> "LogPolarAmplitude":
        return LogPolarAmplitude(self.log_magnitude + other.log_magnitude, self.phase + other.phase)

    def __truediv__(self, other: "LogPolarAmplitude") -> "LogPolarAmplitude":
        if other.is_zero:
            raise ZeroDivisionError("division by an exact-zero amplitude")
        return LogPolarAmplitude(self.log_magnitude - other.log_magnitude, self.phase - other.phase)


@dataclass(frozen=True)
class BesselRow:
    """Bessel values of orders 0..n_max at one argument.

    The true values are ``values * exp(log_scale)``; ``log_scale`` is nonzero
    only for large modified-Bessel arguments.
    """

    argument: float
    n_max: int
    values: np.ndarray
    log_scale: float = 0.0

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])


def _check_order(n_max: int) -> int:
    n = int(n_max)
    if n != n_max or n < 0:
        raise ValueError(f"n_max must be a nonnegative integer, got {n_max!r}")
    return n


def miller_start(n_max: int, x: float) -> int:
    """Starting order for the backward recurrence.

    The start has to clear both n_max and the turning point k ~ |x|; the
    cube-root margin covers the transition region around k = |x|.
    """
    ax = abs(x)
    return max(n_max, math.ceil(ax)) + 20 + math.ceil(6 * ax ** (1 / 3))


def bessel_j_row(n_max: int, x: float) -> BesselRow:
    """J_0(x)..J_{n_max}(x) by normalized backward recurrence."""
    n = _check_order(n_max)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Bessel argument must be finite, got {x!r}")
    if x == 0.0:
        vals = np.zeros(n + 1)
        vals[0] = 1.0
        return BesselRow(x, n, vals)
    ax = abs(x)
    vals = np.asarray(_kernels.ACTIVE["miller_j"](n, ax, miller_start(n, ax)))
    if x < 0:
        vals = vals * np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
    return BesselRow(x, n, vals)


def modified_bessel_i_row(n_max: int, x: float) -> BesselRow:
    """I_0(x)..I_{n_max}(x); above x = 200 the row is returned scaled by exp(-x)."""
    n = _check_order(n_max)
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"modified Bessel argument must be finite and >= 0, got {x!r}")
    if x == 0.0:
        vals = np.zeros(n + 1)
        vals[0] = 1.0
        return BesselRow(x, n, vals)
    scaled = np.asarray(_kernels.ACTIVE["miller_i"](n, x, miller_start(n, x)))
    if x > 200.0:
        return BesselRow(x, n, scaled, log_scale=x)
    return BesselRow(x, n, scaled * math.exp(x))


def bessel_j_signed(row: BesselRow, k: np.ndarray) -> np.ndarray:
    """J_k for possibly negative integer orders k taken from a J row."""
    k = np.asarray(k)
    ak = np.abs(k)
    vals = row.values[ak]
    return np.where((k < 0) & (ak % 2 == 1), -vals, vals)


def log_det(matrix) -> LogPolarAmplitude:
    """Determinant of a square complex matrix in log-polar form (LU, partial pivoting)."""
    a = np.asarray(matrix, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"log_det needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.shape[0] == 0:
        return LogPolarAmplitude(0.0, 0.0)
    log_mag, phase, zero = _kernels.ACTIVE["lu_logdet"](np.ascontiguousarray(a))
    if zero:
        return LogPolarAmplitude(-math.inf, 0.0)
    return LogPolarAmplitude(float(log_mag), float(phase))


class InvalidBracketError(ValueError):
    pass


def find_root_bracketed(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of f inside [lo, hi] to abscissa width ``tol`` (Brent)."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if not (np.sign(flo) * np.sign(fhi) < 0):
        raise InvalidBracketError(f"no sign change on [{lo}, {hi}]: f={flo!r}, {fhi!r}")
    return float(brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def polynomial_coefficients_from_circle(evaluations: Sequence[complex], degree: int, radius: float = 1.0) -> np.ndarray:
    """Coefficients c_0..c_degree of a polynomial sampled at r * exp(2 pi i j / m)."""
    ev = np.asarray(evaluations, dtype=np.complex128)
    m = ev.shape[0]
    if degree != m - 1:
        raise ValueError(f"expected {degree + 1} evaluations for degree {degree}, got {m}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    coeffs = np.fft.fft(ev) / m
    # fft uses exp(-2 pi i jk/m), which pairs with samples at exp(+2 pi i j/m)
    return coeffs / radius ** np.arange(m)


def circle_points(m: int, radius: float = 1.0) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(m) / m)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    intercept: float
    r_squared: float


def fit_exponential(xs: Sequence[float], ys: Sequence[float]) -> ExponentialFit:
    """Least-squares fit of ln y = intercept - rate * x."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need at least 3 (x, y) pairs of equal length")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("ys must be finite and positive")
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    # a perfectly flat series is fitted exactly
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    rate = -float(slope)
    if abs(rate) < 1e-13 * max(1.0, abs(intercept)):
        rate = 0.0
    return ExponentialFit(rate, float(intercept), r2)


REAL_TIME = "real"
IMAGINARY_TIME = "imaginary"


@dataclass(frozen=True)
class TimeArgument:
    """Real time t or imaginary time beta, optionally with its scaled form x/N."""

    kind: str
    value: float
    scaled: float | None = None

    def __post_init__(self):
        if self.kind not in (REAL_TIME, IMAGINARY_TIME):
            raise ValueError(f"unknown time kind {self.kind!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"time value must be finite and >= 0, got {self.value!r}")
        if self.scaled is not None and (not math.isfinite(self.scaled) or self.scaled < 0):
            raise ValueError(f"scaled time must be finite and >= 0, got {self.scaled!r}")

    @classmethod
    def real(cls, t: float) -> "TimeArgument":
        return cls(REAL_TIME, float(t))

    @classmethod
    def imaginary(cls, beta: float) -> "TimeArgument":
        return cls(IMAGINARY_TIME, float(beta))

    @classmethod
    def from_scaled(cls, kind: str, x: float, n: int) -> "TimeArgument":
        return cls(kind, n * float(x), float(x))


def symbol_coefficients(k_max: int, kind: str, value: float, sites: int | None, factor: float = 2.0) -> np.ndarray:
    """Fourier coefficients c_k, k = -k_max..k_max, of exp(-w cos theta).

    ``w = i*factor*t`` in real time and ``w = factor*beta`` in imaginary time;
    ``value`` may be negative here (used for conjugation and difference
    stencils). ``sites=None`` means the continuum integral, otherwise the
    L-point average over theta_s = 2 pi (s-1)/L.
    """
    ks = np.arange(-k_max, k_max + 1)
    if sites is None:
        if kind == REAL_TIME:
            row = bessel_j_row(k_max, -factor * value)
            # (1/2pi) int exp(-i x cos) exp(ik theta) = i^k J_k(-x)
            return (1j ** (ks % 4)) * bessel_j_signed(row, ks)
        beta = factor * value
        row = modified_bessel_i_row(k_max, abs(beta))
        if row.log_scale:
            raise OverflowError("imaginary-time coefficients overflow; use the orthogonal-polynomial route")
        vals = row.values[np.abs(ks)]
        # exp(-b cos) has coefficients (-1)^k I_k(b)
        return vals * np.where((ks % 2 == 0) | (beta < 0), 1.0, -1.0)
    L = int(sites)
    theta = TWO_PI * np.arange(L) / L
    if kind == REAL_TIME:
        weight = np.exp(-1j * factor * value * np.cos(theta))
    else:
        weight = np.exp(-factor * value * np.cos(theta))
    return (weight[None, :] * np.exp(1j * np.outer(ks, theta))).mean(axis=1)


def fourier_coefficient(k: int, time: TimeArgument, site_count: int | None) -> complex:
    """Coefficient of the chain symbol exp(-w cos theta) with w = 2it or 2 beta."""
    k = int(k)
    if site_count is not None and site_count < 2:
        raise ValueError("finite site count must be >= 2")
    c = symbol_coefficients(abs(k), time.kind, time.value, site_count)
    return complex(c[k + abs(k)])
