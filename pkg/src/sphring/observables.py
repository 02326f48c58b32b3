"""Per-state magnetic moment and persistent current.

Moments are in effective magnetons (1 unit = 1/2 natural); currents in natural
units, I = -c dE/dPhi_AB with Phi_AB = 2 pi nu.
"""
from __future__ import annotations

import math

from .model import (
    MAGNETON,
    DegenerateFrequencyError,
    ModelParams,
    QuantumNumbers,
    derive_state_quantities,
)


def _curvature_shift(params: ModelParams, u: float) -> float:
    if params.geometry.flat_limit:
        return 0.0
    return u / (2.0 * params.a**2)


def state_moment(params: ModelParams, qn: QuantumNumbers) -> float:
    """-dE/dB of state (n, m) in effective magnetons.

    -[(2n + M + 1)(omega_c + (m+nu)/2a^2)/omega_m + 2 c (m+nu)], c the
    convention coefficient of omega_c (m+nu) in the energy.
    """
    d = derive_state_quantities(params, qn)
    if d.omega_m == 0.0:
        raise DegenerateFrequencyError(f"omega_m = 0 for m={qn.m}")
    u = qn.m + params.fields.nu
    slope = (d.omega_c + _curvature_shift(params, u)) / d.omega_m
    return -((2 * qn.n + d.M + 1.0) * slope + 2.0 * params.c_omega * u)


def _loop_factor(params: ModelParams, rho_m: float) -> float:
    if params.geometry.flat_limit:
        return 1.0
    return 1.0 + (rho_m / (2.0 * params.a)) ** 2


def _effective_radius(params: ModelParams, qn: QuantumNumbers):
    d = derive_state_quantities(params, qn)
    if d.omega_m == 0.0:
        raise DegenerateFrequencyError(f"omega_m = 0 for m={qn.m}")
    if d.M == 0.0:
        raise DegenerateFrequencyError(f"M = 0 for m={qn.m}: effective radius vanishes")
    return d, d.require_rho_m()


def state_current(params: ModelParams, qn: QuantumNumbers, fallback: bool = False) -> float:
    """Persistent current from the moment and the field-penetration term.

    I = (c / pi rho_m^2) {Mom [1 + (rho_m/2a)^2] + mu_B* (omega_c/omega_m)(2n+1)}.
    With ``fallback`` a state with M = 0 gets the numerical Byers-Yang value
    instead of an error.
    """
    try:
        d, rho_m = _effective_radius(params, qn)
    except DegenerateFrequencyError:
        if not fallback:
            raise
        return byers_yang_current(params, qn)
    moment = MAGNETON * state_moment(params, qn)
    diamagnetic = MAGNETON * d.omega_c / d.omega_m * (2 * qn.n + 1)
    return (moment * _loop_factor(params, rho_m) + diamagnetic) / (math.pi * rho_m**2)


def moment_from_current(params: ModelParams, qn: QuantumNumbers, current: float) -> float:
    """Invert :func:`state_current`: current-loop dipole minus the diamagnetic shift.

    Mom = [pi rho_m^2 I / c - mu_B* (omega_c/omega_m)(2n+1)] / [1 + (rho_m/2a)^2],
    the exact inverse; the loop factor divides both terms.
    """
    d, rho_m = _effective_radius(params, qn)
    loop = math.pi * rho_m**2 * current
    diamagnetic = MAGNETON * d.omega_c / d.omega_m * (2 * qn.n + 1)
    return (loop - diamagnetic) / (MAGNETON * _loop_factor(params, rho_m))


def byers_yang_current(params: ModelParams, qn: QuantumNumbers) -> float:
    """-dE/dPhi_AB by Richardson-extrapolated central differences."""
    from .oracle import diff_energy
    from .spectrum import eval_energy

    value, _ = diff_energy(eval_energy, "flux", params, qn)
    return -value
