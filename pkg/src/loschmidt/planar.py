"""Large-N (planar) closed forms: densities, support contours, critical times.

PBC contours are traced in polar form z = r(phi) e^{i phi}. ABC contours use
z = sin(zeta), zeta = u + i v(u); in that chart the level condition is
v = 2 tau cos(u) cosh(v) and the density becomes (1 + 2i tau sin zeta)/pi per
unit d(zeta).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import find_root_bracketed

PBC = "pbc"
ABC = "abc"

PBC_PHASE1 = "PBC_phase1"
ABC_PHASE1 = "ABC_phase1"
GWW_ONECUT = "GWW_onecut"
GWW_TWOCUT = "GWW_twocut"
GWW_ABC_ONECUT = "GWW_ABC_onecut"
GWW_ABC_SOFTEDGE = "GWW_ABC_softedge"
ABC_PHASE2_NEARCRITICAL = "ABC_phase2_nearcritical"

FAMILIES = (PBC_PHASE1, ABC_PHASE1, GWW_ONECUT, GWW_TWOCUT, GWW_ABC_ONECUT, GWW_ABC_SOFTEDGE, ABC_PHASE2_NEARCRITICAL)

NEWTON_TOL = 1e-13


class SupportError(ValueError):
    pass


# ---------------------------------------------------------------------------
# critical time


def critical_equation(tau: float) -> float:
    s = math.sqrt(1 + 4 * tau * tau)
    return s - math.log((1 + s) / (2 * tau))


def critical_time() -> float:
    return find_root_bracketed(critical_equation, 0.05, 1.0, 1e-15)


def z_plus(tau: float) -> complex:
    return 1j * (1 + math.sqrt(1 + 4 * tau * tau)) / (2 * tau)


def z_minus(tau: float) -> complex:
    return 1j * (1 - math.sqrt(1 + 4 * tau * tau)) / (2 * tau)


def z_zero_abc(tau: float) -> complex:
    return 1j / (2 * tau)


def pbc_level(z: complex, tau: float) -> float:
    """Im{-i log z + tau (z - 1/z)}; its zero set contains the PBC support."""
    return -math.log(abs(z)) + tau * (z - 1 / z).imag


def abc_level(z: complex, tau: float) -> float:
    """Re[log(-iz + sqrt(1-z^2)) - 2 tau sqrt(1-z^2)] with principal branches."""
    root = cmath.sqrt(1 - z * z)
    return (cmath.log(-1j * z + root) - 2 * tau * root).real


def critical_time_via_contour() -> float:
    """First tau at which the zero z_+ of the PBC density lands on its level set."""
    return find_root_bracketed(lambda tau: pbc_level(z_plus(tau), tau), 0.1, 0.6, 1e-15)


@dataclass(frozen=True)
class CriticalData:
    tau_cr: float
    ell_star: float
    z0_imag: float

    @staticmethod
    def tau_star(ell: float) -> float:
        return finite_size_critical(ell)[0]

    @staticmethod
    def gamma_star(ell: float) -> float:
        return finite_size_critical(ell)[1]


def critical_data() -> CriticalData:
    tc = critical_time()
    return CriticalData(tc, math.sqrt(1 + 4 * tc * tc), z_zero_abc(tc).imag)


def finite_size_critical(ell: float) -> tuple[float, float]:
    """(tau_star, gamma_star) for a chain with L = ell * N."""
    if not ell >= 1:
        raise ValueError(f"ell must be >= 1, got {ell!r}")
    return math.sqrt(ell * ell - 1) / 2, (ell - 1) / 2


def ell_star() -> float:
    tc = critical_time()
    return math.sqrt(1 + 4 * tc * tc)


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class PlanarDensity:
    family: str
    parameter: float
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown density family {self.family!r}")
        g = self.parameter
        if self.family in (GWW_ONECUT, GWW_ABC_ONECUT) and not 0 <= g <= 0.5:
            raise ValueError(f"{self.family} needs 0 <= gamma <= 1/2, got {g}")
        if self.family in (GWW_TWOCUT, GWW_ABC_SOFTEDGE) and not g > 0.5:
            raise ValueError(f"{self.family} needs gamma > 1/2, got {g}")

    @property
    def theta0(self) -> float:
        return 2 * math.asin(math.sqrt(1 / (2 * self.parameter)))

    @property
    def soft_edge(self) -> float:
        return (self.parameter - 1) / self.parameter

    @property
    def support(self) -> tuple[float, float] | None:
        """Real support interval (angle or x) of the real families."""
        f = self.family
        if f == GWW_ONECUT:
            return (-math.pi, math.pi)
        if f == GWW_TWOCUT:
            return (-self.theta0, self.theta0)
        if f == GWW_ABC_ONECUT:
            return (-1.0, 1.0)
        if f == GWW_ABC_SOFTEDGE:
            return (self.soft_edge, 1.0)
        return None


def near_critical_density(tau: float) -> PlanarDensity:
    a, b, _, _ = second_phase_near_critical(tau)
    return PlanarDensity(ABC_PHASE2_NEARCRITICAL, tau, {"A": a, "B": b})


def density_value(d: PlanarDensity, point: complex) -> complex:
    f, p = d.family, d.parameter
    sup = d.support
    if sup is not None:
        x = complex(point)
        if abs(x.imag) > 0 or not sup[0] - 1e-14 <= x.real <= sup[1] + 1e-14:
            raise SupportError(f"{point!r} lies outside the support {sup} of {f}")
        x = x.real
        if f == GWW_ONECUT:
            return complex((1 + 2 * p * math.cos(x)) / (2 * math.pi))
        if f == GWW_TWOCUT:
            inner = max(1 / (2 * p) - math.sin(x / 2) ** 2, 0.0)
            return complex(2 * p / math.pi * math.cos(x / 2) * math.sqrt(inner))
        if f == GWW_ABC_ONECUT:
            return complex((1 + 2 * p * x) / (math.pi * math.sqrt(1 - x * x)))
        a = d.soft_edge
        return complex(2 * p / math.pi * math.sqrt(max(x - a, 0.0) / (1 - x)))
    z = complex(point)
    if f == PBC_PHASE1:
        if z == 0:
            raise SupportError("the PBC density is singular at the origin")
        return (1 + 1j * p * (z + 1 / z)) / (2 * math.pi)
    if z * z == 1:
        raise SupportError("the ABC densities are singular at the hard edges")
    if f == ABC_PHASE1:
        return (1 + 2j * p * z) / (math.pi * cmath.sqrt(1 - z * z))
    a, b = d.extras["A"], d.extras["B"]
    return 1j * 2 * p / math.pi * cmath.sqrt((a - z) * (z - b) / (1 - z * z))


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class ContourPolyline:
    """Sampled support curve with quadrature data for line integrals.

    ``dz`` holds dz/ds at each point for the chart parameter s (polar angle for
    PBC, real part of zeta for ABC) and ``weights`` the quadrature weights in s.
    ``level_residuals`` are the defining level function evaluated at the points.
    """

    tau: float
    boundary: str
    points: np.ndarray
    closed: bool
    level_residuals: np.ndarray
    dz: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class PinchedContour:
    tau: float
    boundary: str
    last_point: complex
    distance_to_zero: float
    status: str = "pinched"


class ContinuationFailure(RuntimeError):
    pass


def _newton_1d(g, dg, x0: float, ok) -> float:
    x = x0
    for _ in range(50):
        gx = g(x)
        d = dg(x)
        if d == 0 or not math.isfinite(d):
            break
        step = gx / d
        x -= step
        if not math.isfinite(x) or not ok(x):
            break
        if abs(step) < NEWTON_TOL * max(1.0, abs(x)) and abs(g(x)) < 1e-14:
            return x
    raise ContinuationFailure("corrector did not converge")


def _pbc_radius(phi: float, tau: float, guess: float) -> float:
    # inner branch of -ln r + tau sin(phi)(r + 1/r) = 0, where d/dr < 0
    s = math.sin(phi)
    g = lambda r: -math.log(r) + tau * s * (r + 1 / r)
    dg = lambda r: -1 / r + tau * s * (1 - 1 / (r * r))
    return _newton_1d(g, dg, guess, lambda r: r > 0 and dg(r) < 0)


def _pbc_slope(r: float, phi: float, tau: float) -> float:
    s, c = math.sin(phi), math.cos(phi)
    h_r = -1 / r + tau * s * (1 - 1 / (r * r))
    h_phi = tau * c * (r + 1 / r)
    return -h_phi / h_r


def _abc_height(u: float, tau: float, guess: float) -> float:
    c = math.cos(u)
    g = lambda v: v - 2 * tau * c * math.cosh(v)
    dg = lambda v: 1 - 2 * tau * c * math.sinh(v)
    return _newton_1d(g, dg, guess, lambda v: dg(v) > 0)


def _abc_slope(v: float, u: float, tau: float) -> float:
    g_u = 2 * tau * math.sin(u) * math.cosh(v)
    g_v = 1 - 2 * tau * math.cos(u) * math.sinh(v)
    return -g_u / g_v


def trace_contour(boundary: str, tau: float, n_points: int) -> ContourPolyline | PinchedContour:
    """Continuation of the support curve from the seeds z = +1 and z = -1.

    Each step predicts with the chart tangent and corrects with a 1-D Newton
    solve of the level function along the chart's transverse direction.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if n_points < 8:
        raise ValueError("n_points must be >= 8")
    if boundary == PBC:
        return _trace_pbc(tau, n_points)
    if boundary == ABC:
        return _trace_abc(tau, n_points)
    raise ValueError(f"unknown boundary {boundary!r}")


def _trace_pbc(tau: float, n: int) -> ContourPolyline | PinchedContour:
    phis = 2 * math.pi * np.arange(n) / n
    radii = np.empty(n)
    slopes = np.empty(n)
    r = 1.0  # seed z = +1
    prev_phi, prev_slope = 0.0, _pbc_slope(1.0, 0.0, tau)
    for j, phi in enumerate(phis):
        guess = r + prev_slope * (phi - prev_phi)
        try:
            r = _pbc_radius(phi, tau, guess if guess > 0 else r)
        except ContinuationFailure:
            last = r * cmath.exp(1j * prev_phi)
            return PinchedContour(tau, PBC, last, abs(last - z_plus(tau)) if tau > 0 else math.inf)
        if phi == math.pi and abs(r - 1) > 1e-9:
            raise ContinuationFailure("trace missed the seed z = -1")
        radii[j] = r
        slopes[j] = _pbc_slope(r, phi, tau)
        prev_phi, prev_slope = phi, slopes[j]
    e = np.exp(1j * phis)
    pts = radii * e
    dz = (slopes + 1j * radii) * e
    res = np.array([pbc_level(z, tau) for z in pts])
    return ContourPolyline(tau, PBC, pts, True, res, dz, np.full(n, 2 * math.pi / n))


def _abc_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n - 2)
    u = np.concatenate(([-1.0], x, [1.0])) * (math.pi / 2)
    weights = np.concatenate(([0.0], w, [0.0])) * (math.pi / 2)
    return u, weights


def _trace_abc(tau: float, n: int) -> ContourPolyline | PinchedContour:
    us, weights = _abc_nodes(n)
    vs = np.empty(n)
    slopes = np.empty(n)
    v = 0.0  # seed z = -1 at u = -pi/2
    prev_u, prev_slope = us[0], _abc_slope(0.0, us[0], tau)
    for j, u in enumerate(us):
        try:
            v = _abc_height(u, tau, v + prev_slope * (u - prev_u))
        except ContinuationFailure:
            last = cmath.sin(complex(prev_u, v))
            return PinchedContour(tau, ABC, last, abs(last - z_zero_abc(tau)) if tau > 0 else math.inf)
        vs[j] = v
        slopes[j] = _abc_slope(v, u, tau)
        prev_u, prev_slope = u, slopes[j]
    vs[0] = vs[-1] = 0.0  # exact seeds z = -1, +1
    zeta = us + 1j * vs
    pts = np.sin(zeta)
    dz = np.cos(zeta) * (1 + 1j * slopes)
    res = np.array([abc_level(z, tau) for z in pts])
    return ContourPolyline(tau, ABC, pts, False, res, dz, weights)


def _density_times_dz(c: ContourPolyline, d: PlanarDensity) -> np.ndarray:
    if c.boundary == PBC:
        return np.array([density_value(d, z) for z in c.points]) * c.dz / (1j * c.points)
    # in the zeta chart rho dz = (1 + 2i tau sin zeta)/pi dzeta, finite at the edges
    if d.family != ABC_PHASE1:
        raise ValueError("ABC contours carry the first-phase ABC density")
    zeta_slope = c.dz[1:-1] / np.sqrt(1 - c.points[1:-1] ** 2 + 0j)
    inner = (1 + 2j * d.parameter * c.points[1:-1]) / math.pi * zeta_slope
    return np.concatenate(([0.0], inner, [0.0]))


def contour_normalization(c: ContourPolyline, d: PlanarDensity, cumulative: bool = False):
    """Line integral of the density along the traced support.

    Returns the real total; with ``cumulative=True`` also the running sums.
    """
    expected = PBC_PHASE1 if c.boundary == PBC else ABC_PHASE1
    if d.family != expected or abs(d.parameter - c.tau) > 1e-15:
        raise ValueError("density family/parameter does not match the contour")
    terms = c.weights * _density_times_dz(c, d)
    total = complex(np.sum(terms))
    if abs(total.imag) >= 1e-8:
        raise ValueError(f"density integral is not real along the contour: {total}")
    if cumulative:
        return total.real, np.cumsum(terms.real)
    return total.real


def resolvent_check(tau: float, test_point: complex, inside: bool, n_points: int = 1024) -> complex:
    """Deviation of the contour integral of the resolvent kernel from its closed form."""
    z = complex(test_point)
    c = trace_contour(PBC, tau, n_points)
    if isinstance(c, PinchedContour):
        raise ValueError(f"tau={tau} is beyond the first phase")
    if np.min(np.abs(c.points - z)) < 0.05:
        raise ValueError("test point is within 0.05 of the contour")
    u = c.points
    integrand = (1 + 1j * tau * (u + 1 / u)) * (z + u) / (z - u) / (2 * math.pi * u)
    value = complex(np.sum(c.weights * integrand * c.dz))
    expected = (-1j + 2 * tau * z) if inside else (1j - 2 * tau / z)
    return value - expected


# ---------------------------------------------------------------------------
# free energies


def planar_free_energy(boundary: str, time_kind: str, x: float) -> tuple[float, float]:
    """Closed-form (value, derivative) of the planar free energy."""
    if x < 0:
        raise ValueError("argument must be >= 0")
    mult = 1.0 if boundary == PBC else 2.0
    if boundary not in (PBC, ABC):
        raise ValueError(f"unknown boundary {boundary!r}")
    if time_kind == "real":
        if x >= critical_time():
            raise ValueError("real-time closed form holds only for tau < tau_cr")
        return mult * x * x, mult * 2 * x
    if time_kind != "imaginary":
        raise ValueError(f"unknown time kind {time_kind!r}")
    if x <= 0.5:
        return mult * x * x, mult * 2 * x
    # integrate 2 - 1/(2g) from 1/2, continuing 1/4 at g = 1/2
    value = 0.25 + 2 * (x - 0.5) - 0.5 * math.log(2 * x)
    return mult * value, mult * (2 - 1 / (2 * x))


def second_phase_near_critical(tau: float, boundary: str = ABC) -> tuple[complex, complex, float, float]:
    """Endpoints A, B and f'(tau) just past the critical time.

    Returns (A, B, f_prime, f_second_limit); PBC halves the free-energy values.
    """
    tc = critical_time()
    if not tc <= tau <= 1.5 * tc:
        raise ValueError(f"tau must lie in [tau_cr, 1.5 tau_cr], got {tau}")
    delta = 1 - tc / tau
    a = 1j / (2 * tau) - delta
    b = 1j / (2 * tau) + delta
    fp = 4 * tau - 8 * delta * delta * (1 + 4 * tc * tc) ** -1.5
    limit = 4.0
    if boundary == PBC:
        fp, limit = fp / 2, limit / 2
    return a, b, fp, limit
