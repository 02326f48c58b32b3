"""Radial eigenfunctions f(x) = x^alpha (1-x)^gamma F(-n, n+1+2alpha+2gamma; 1+2alpha; x).

Under the sphere's area element, rho drho / (1 + (rho/2a)^2)^2 = 2a^2 dx, so
normalization and overlaps use the uniform weight 2a^2 on 0 < x < 1 (the
angular factor e^{im phi}/sqrt(2 pi) integrates to one separately).

Profiles are evaluated as log|f| plus a sign: x^alpha underflows long before
alpha ~ 10^3, which is routine for strong fields on large spheres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .model import (
    DegenerateFrequencyError,
    Geometry,
    ModelError,
    ModelParams,
    QuantumNumbers,
    derive_state_quantities,
    rho_to_x,
    theta_to_x,
)

_GL_ORDER = 20
_QUAD_RTOL = 1e-13
_MAX_PANELS = 20_000


def hypergeom_coeffs(n: int, b: float, c: float) -> np.ndarray:
    """Series coefficients of F(-n, b; c; x), k = 0..n, by the term ratio.

    The ratio for k = n carries the factor (-n + n) and vanishes, which is
    what makes the series a polynomial.
    """
    if n < 0:
        raise ModelError("n must be >= 0")
    for k in range(n):
        if c + k == 0:
            raise ModelError(f"c' = {c} hits a pole of the truncated series")
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    for k in range(n):
        coeffs[k + 1] = coeffs[k] * (k - n) * (b + k) / ((c + k) * (k + 1))
    return coeffs


def next_coefficient(n: int, b: float, c: float) -> float:
    """The (n+1)-th coefficient produced by the recurrence (exactly zero)."""
    last = hypergeom_coeffs(n, b, c)[-1]
    return last * (n - n) * (b + n) / ((c + n) * (n + 1))


def _horner(coeffs, x):
    result = np.full(np.shape(x), coeffs[-1], dtype=float)
    for coeff in coeffs[-2::-1]:
        result = result * x + coeff
    return result


def hypergeom_poly(n: int, b: float, c: float, x):
    """Evaluate the terminating series F(-n, b; c; x)."""
    result = _horner(hypergeom_coeffs(n, b, c), np.asarray(x, dtype=float))
    return result if result.ndim else float(result)


@dataclass(frozen=True)
class RadialProfile:
    qn: QuantumNumbers
    alpha: float
    gamma: float
    poly_coeffs: tuple
    a: float
    log_norm: float = 0.0

    @property
    def norm(self) -> float:
        return math.exp(self.log_norm)

    @property
    def hypergeom_args(self):
        n = self.qn.n
        return -n, n + 1 + 2 * self.alpha + 2 * self.gamma, 1 + 2 * self.alpha

    @property
    def reflected_coeffs(self) -> tuple:
        """Prefactor and coefficients of the same polynomial as a series in 1 - x.

        F(-n, b; c; x) = [(c-b)_n / (c)_n] F(-n, b; b-c-n+1; 1-x); here
        c - b = -n - 2 gamma and b - c - n + 1 = 1 + 2 gamma.
        """
        n = self.qn.n
        _, b, c = self.hypergeom_args
        prefactor = 1.0
        for k in range(n):
            prefactor *= (c - b + k) / (c + k)
        return prefactor, tuple(hypergeom_coeffs(n, b, 1 + 2 * self.gamma))

    def polynomial(self, x):
        """F at x: power series in x below 1/2 and in 1 - x above.

        Near x = 1 the x-series cancels catastrophically once alpha is large.
        """
        x = np.asarray(x, dtype=float)
        prefactor, reflected = self.reflected_coeffs
        return np.where(x <= 0.5, _horner(self.poly_coeffs, x),
                        prefactor * _horner(reflected, 1.0 - x))

    def log_abs(self, x):
        """(log|f(x)|, sign f(x)) including the normalization constant."""
        x = np.asarray(x, dtype=float)
        poly = self.polynomial(x)
        with np.errstate(divide="ignore"):
            log_f = np.log(np.abs(poly)) + self.log_norm
            if self.alpha:
                log_f = log_f + self.alpha * np.log(x)
            if self.gamma:
                log_f = log_f + self.gamma * np.log1p(-x)
        return log_f, np.sign(poly)

    def __call__(self, x):
        log_f, sign = self.log_abs(x)
        return sign * np.exp(log_f)

    def density(self, x):
        """2a^2 |f|^2 per unit x."""
        log_f, _ = self.log_abs(x)
        return 2.0 * self.a**2 * np.exp(2.0 * log_f)


def radial_profile(params: ModelParams, qn: QuantumNumbers, normalized: bool = True) -> RadialProfile:
    if params.geometry.flat_limit:
        raise ModelError("radial profiles need a finite sphere radius")
    d = derive_state_quantities(params, qn)
    if d.omega_m == 0.0:
        raise DegenerateFrequencyError(f"omega_m = 0 for m={qn.m}")
    alpha = params.a**2 * d.omega_m
    gamma = 0.5 * d.M
    n = qn.n
    coeffs = hypergeom_coeffs(n, n + 1 + 2 * alpha + 2 * gamma, 1 + 2 * alpha)
    profile = RadialProfile(qn, alpha, gamma, tuple(coeffs), params.a)
    if normalized:
        profile = replace(profile, log_norm=log_normalization(profile))
    return profile


# -- quadrature ------------------------------------------------------------

@lru_cache(maxsize=4)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _gl(func, lo: float, hi: float) -> float:
    nodes, weights = _gauss_legendre(_GL_ORDER)
    half = 0.5 * (hi - lo)
    return half * float(np.dot(weights, func(lo + half * (nodes + 1.0))))


def _adaptive(func, pieces, rtol: float) -> float:
    """Bisect panels until each halving changes the total by <= rtol * scale."""
    scale = sum(abs(w) for _, _, w in pieces) or 1.0
    stack = list(pieces)
    total = 0.0
    panels = 0
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl(func, lo, mid), _gl(func, mid, hi)
        panels += 1
        done = abs(left + right - whole) <= rtol * scale
        if done or panels > _MAX_PANELS or mid in (lo, hi):
            total += left + right
        else:
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))
    return total


def _scan_points(profile: RadialProfile) -> np.ndarray:
    """Uniform grid plus geometric clusters at both ends and at the n = 0 peak."""
    uniform = np.linspace(0.0, 1.0, 4001)[1:-1]
    tail = np.logspace(-16, -0.5, 400)
    peak = profile.alpha / (profile.alpha + profile.gamma) if profile.alpha + profile.gamma > 0 else 0.5
    around = peak + np.concatenate([-np.logspace(-9, 0, 200), np.logspace(-9, 0, 200)])
    pts = np.concatenate([uniform, tail, 1.0 - tail, around])
    return np.unique(pts[(pts > 0.0) & (pts < 1.0)])


def integrate_unit(func, breakpoints=(), rtol: float = _QUAD_RTOL) -> float:
    """Adaptive composite Gauss-Legendre on (0, 1) with optional breakpoints."""
    edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(breakpoints, dtype=float)]))
    pieces = [(lo, hi, _gl(func, lo, hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
    return _adaptive(func, pieces, rtol)


def _support_breakpoints(log_density, pts) -> tuple:
    """Peak location and the band where the scaled density exceeds 1e-40."""
    values = log_density(pts)
    top = float(np.max(values))
    keep = pts[values - top > math.log(1e-40)]
    lo, hi = float(keep.min()), float(keep.max())
    peak = float(pts[np.argmax(values)])
    band = np.linspace(lo, hi, 17)
    return top, np.concatenate([band, [peak]])


def log_normalization(profile: RadialProfile) -> float:
    """log c with 2a^2 integral_0^1 (c f)^2 dx = 1, f as currently scaled."""
    bare = profile
    if bare.alpha <= -0.5 or bare.gamma <= -0.5:
        raise ModelError("profile is not normalizable (endpoint exponent <= -1/2)")

    def log_density(x):
        return 2.0 * bare.log_abs(x)[0]

    top, breaks = _support_breakpoints(log_density, _scan_points(bare))
    integral = integrate_unit(lambda x: np.exp(log_density(x) - top), breaks)
    if not (math.isfinite(integral) and integral > 0):
        raise ModelError("profile is not normalizable")
    return -0.5 * (math.log(2.0 * bare.a**2) + top + math.log(integral))


def normalize(profile: RadialProfile, geometry: Geometry = None) -> float:
    """Normalization constant of ``profile`` under the 2a^2 dx measure.

    ``geometry`` overrides the radius stored in the profile.
    """
    if geometry is not None:
        profile = replace(profile, a=geometry.a)
    return math.exp(log_normalization(profile))


def total_probability(profile: RadialProfile) -> float:
    """2a^2 integral f^2 dx for a (normalized) profile."""
    pts = _scan_points(profile)
    _, breaks = _support_breakpoints(lambda x: 2.0 * profile.log_abs(x)[0], pts)
    return integrate_unit(profile.density, breaks)


def overlap(params: ModelParams, qn1: QuantumNumbers, qn2: QuantumNumbers) -> float:
    """2a^2 integral f1 f2 dx for normalized profiles with the same m."""
    if qn1.m != qn2.m:
        raise ModelError("overlap is defined only for equal m (different m are orthogonal)")
    first, second = sorted([qn1, qn2], key=lambda q: q.n)
    p1, p2 = radial_profile(params, first), radial_profile(params, second)
    pts = _scan_points(p1)
    _, b1 = _support_breakpoints(lambda x: 2.0 * p1.log_abs(x)[0], pts)
    _, b2 = _support_breakpoints(lambda x: 2.0 * p2.log_abs(x)[0], pts)
    breaks = np.concatenate([b1, b2, _nodes_estimate(p1), _nodes_estimate(p2)])
    return 2.0 * params.a**2 * integrate_unit(lambda x: p1(x) * p2(x), breaks)


def _nodes_estimate(profile: RadialProfile) -> np.ndarray:
    roots = np.roots(profile.poly_coeffs[::-1]) if profile.qn.n > 0 else np.array([])
    roots = roots[np.abs(roots.imag) < 1e-9].real
    return roots[(roots > 0) & (roots < 1)]


def node_count(profile: RadialProfile, samples: int = 10_000) -> int:
    """Strict sign alternations of f on a sample grid in (0, 1)."""
    x = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    x = np.unique(np.concatenate([x, _scan_points(profile)]))
    sign = np.sign(profile.polynomial(x))
    sign = sign[sign != 0]
    return int(np.count_nonzero(sign[1:] != sign[:-1]))


def density_samples(params: ModelParams, qn: QuantumNumbers, coordinate: str, grid) -> np.ndarray:
    """Probability density per unit of ``coordinate`` at the grid points.

    Returns an (N, 2) array of (coordinate, density).  The Jacobians are
    2a^2 for x, a^2 sin(theta) for theta and rho/(1 + (rho/2a)^2)^2 for rho.
    """
    profile = radial_profile(params, qn)
    g = np.asarray(grid, dtype=float)
    geom = params.geometry
    if coordinate == "x":
        if np.any((g <= 0) | (g >= 1)):
            raise ModelError("x grid must lie in (0, 1)")
        dens = profile.density(g)
    elif coordinate == "theta":
        if np.any((g <= 0) | (g >= math.pi)):
            raise ModelError("theta grid must lie in (0, pi)")
        x = theta_to_x(g)
        dens = np.exp(2.0 * profile.log_abs(x)[0]) * params.a**2 * np.sin(g)
    elif coordinate == "rho":
        if np.any(g <= 0) or np.any(~np.isfinite(g)):
            raise ModelError("rho grid must be positive and finite")
        x = rho_to_x(g, geom)
        dens = np.exp(2.0 * profile.log_abs(x)[0]) * g * x**2
    else:
        raise ModelError(f"unknown coordinate {coordinate!r}")
    return np.column_stack([g, dens])
