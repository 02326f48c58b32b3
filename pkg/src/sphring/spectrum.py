"""Closed-form energies, the radial-number bound and state enumeration."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

from .model import (
    ModelError,
    ModelParams,
    QuantumNumbers,
    derive_state_quantities,
)
from . import observables

log = logging.getLogger(__name__)

BoundPolicy = Literal["paper", "relaxed"]

# n ceiling for the relaxed policy when nothing else limits the radial ladder
DEFAULT_N_CAP = 64
# automatic m-window: initial half width and hard limit
_WINDOW_START = 8
_WINDOW_LIMIT = 1 << 16
# relative width under which two energies count as degenerate
TIE_RTOL = 1e-12

__all__ = [
    "QuantumNumbers", "StateRecord", "SpectrumTable", "RadialBound",
    "eval_energy", "eval_energy_flat", "radial_bound", "enumerate_states",
    "landau_sphere_energy", "make_record",
]


@dataclass(frozen=True)
class StateRecord:
    qn: QuantumNumbers
    energy: float
    moment: float                # effective magnetons
    current: Optional[float]     # None when the closed form is undefined (M = 0)
    rho_m: Optional[float]
    M: float
    omega_m: float
    flags: tuple = ()


@dataclass(frozen=True)
class SpectrumTable:
    params: ModelParams
    records: tuple = ()
    m_window: Optional[tuple] = None
    bound_policy: str = "paper"
    ties: bool = False

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def is_empty(self) -> bool:
        """True when no bound state survived the policy (not an error)."""
        return not self.records

    @property
    def energies(self) -> list:
        return [r.energy for r in self.records]


@dataclass(frozen=True)
class RadialBound:
    n_sup: float
    n_max: int   # -1 means no allowed state

    @property
    def count(self) -> int:
        return self.n_max + 1


def eval_energy(params: ModelParams, qn: QuantumNumbers) -> float:
    """Closed-form E(n, m); the n-bound is deliberately not enforced here."""
    if params.geometry.flat_limit:
        return eval_energy_flat(params, qn)
    d = derive_state_quantities(params, qn)
    a = params.a
    u = qn.m + params.fields.nu
    s = qn.n + 0.5
    curvature = (s * s + s * d.M + 0.5 * u * u) / (2.0 * a * a)
    return (curvature + d.omega_m * (s + 0.5 * d.M)
            + params.c_omega * d.omega_c * u
            - 0.25 * d.omega0**2 * d.rho0**2)


def eval_energy_flat(params: ModelParams, qn: QuantumNumbers) -> float:
    """Flat Tan-Inkson energy, omega_f = sqrt(omega_c^2 + omega0^2)."""
    if not params.geometry.flat_limit:
        raise ModelError("eval_energy_flat needs flat_limit geometry")
    d = derive_state_quantities(params, qn)
    u = qn.m + params.fields.nu
    omega_f = math.hypot(d.omega_c, d.omega0)
    return omega_f * (qn.n + 0.5 + 0.5 * d.M) + params.c_omega * d.omega_c * u - d.v0


def landau_sphere_energy(a: float, b: float, qn: QuantumNumbers, convention="half") -> float:
    """Landau levels on the sphere: no confinement, no flux."""
    return eval_energy(ModelParams.build(a=a, b=b, convention=convention), qn)


def radial_bound(params: ModelParams, m: int) -> RadialBound:
    """0 <= n < a^2 omega_m - M/2 - 1/2 (strict)."""
    if params.geometry.flat_limit:
        raise ModelError("the radial bound needs a finite sphere radius")
    d = derive_state_quantities(params, QuantumNumbers(0, m))
    n_sup = params.a**2 * d.omega_m - 0.5 * d.M - 0.5
    n_max = max(math.ceil(n_sup) - 1, -1)
    return RadialBound(n_sup, n_max)


def make_record(params: ModelParams, qn: QuantumNumbers, energy: float = None,
                extra_flags: Sequence[str] = ()) -> StateRecord:
    d = derive_state_quantities(params, qn)
    if energy is None:
        energy = eval_energy(params, qn)
    flags = list(extra_flags)
    current = None
    rho_m = d.rho_m
    if d.M == 0.0:
        flags.append("M0")
        rho_m = None
    else:
        current = observables.state_current(params, qn)
    moment = observables.state_moment(params, qn)
    return StateRecord(qn, energy, moment, current, rho_m, d.M, d.omega_m, tuple(flags))


def _sort_key(record: StateRecord):
    return (record.energy, record.qn.m, record.qn.n)


def _ladder(params: ModelParams, m: int, policy: str, n_cap: Optional[int],
            limit: Optional[int], energy_max: Optional[float]):
    """Allowed (n, energy, flags) for one angular channel, ascending in n."""
    if params.geometry.flat_limit:
        n_stop = n_cap if n_cap is not None else DEFAULT_N_CAP
        n_sup = math.inf
    else:
        if derive_state_quantities(params, QuantumNumbers(0, m)).omega_m == 0.0:
            log.info("skipping m=%d: omega_m = 0", m)
            return []
        bound = radial_bound(params, m)
        n_sup = bound.n_sup
        if policy == "paper":
            n_stop = bound.n_max
            if n_cap is not None:
                n_stop = min(n_stop, n_cap)
        elif policy == "relaxed":
            # every omega_m > 0 profile is normalizable, so only the cap limits n
            n_stop = n_cap if n_cap is not None else DEFAULT_N_CAP
        else:
            raise ModelError(f"unknown bound policy {policy!r}")
    if limit is not None:
        n_stop = min(n_stop, limit - 1)
    out = []
    for n in range(0, n_stop + 1):
        qn = QuantumNumbers(n, m)
        e = eval_energy(params, qn)
        if energy_max is not None and e > energy_max:
            break  # energy grows with n
        flags = ("beyond_bound",) if n >= n_sup else ()
        out.append((qn, e, flags))
    return out


def _lowest_in_shell(params, m, policy, n_cap):
    ladder = _ladder(params, m, policy, n_cap, 1, None)
    return ladder[0][1] if ladder else None


def _shell_closed(params, m, policy, n_cap, threshold) -> bool:
    low = _lowest_in_shell(params, m, policy, n_cap)
    return low is None or low > threshold


def enumerate_states(params: ModelParams, m_window: Optional[Iterable[int]] = None,
                     bound_policy: BoundPolicy = "paper", max_states: Optional[int] = None,
                     n_cap: Optional[int] = None,
                     energy_max: Optional[float] = None) -> SpectrumTable:
    """Allowed states sorted by (E, m, n).

    ``m_window`` is an inclusive ``(m_min, m_max)`` pair or any iterable of m.
    Without a window the symmetric window grows until the lowest energy of the
    next two shells on both sides exceeds the largest retained energy, which
    needs ``max_states`` or ``energy_max`` to terminate.
    """
    if max_states is not None and max_states < 1:
        raise ModelError("max_states must be >= 1")
    if m_window is not None:
        ms = _window_values(m_window)
        records = _collect(params, ms, bound_policy, n_cap, max_states, energy_max)
        window = (min(ms), max(ms))
    else:
        if max_states is None and energy_max is None:
            raise ModelError("automatic m-window needs max_states or energy_max")
        half = _WINDOW_START
        while True:
            ms = range(-half, half + 1)
            records = _collect(params, ms, bound_policy, n_cap, max_states, energy_max)
            if max_states is not None and len(records) >= max_states:
                threshold = records[-1].energy
                if energy_max is not None:
                    threshold = min(threshold, energy_max)
            elif energy_max is not None:
                threshold = energy_max
            else:
                threshold = math.inf
            shells = [-half - 1, -half - 2, half + 1, half + 2]
            if all(_shell_closed(params, m, bound_policy, n_cap, threshold) for m in shells):
                break
            half *= 2
            if half > _WINDOW_LIMIT:
                raise ModelError("automatic m-window did not converge")
        window = (-half, half)
    ties = _has_tie(records)
    return SpectrumTable(params, tuple(records), window, bound_policy, ties)


def _window_values(m_window) -> list:
    if isinstance(m_window, tuple) and len(m_window) == 2 and all(isinstance(v, int) for v in m_window):
        lo, hi = m_window
        ms = list(range(lo, hi + 1))
    else:
        ms = sorted(set(int(m) for m in m_window))
    if not ms:
        raise ModelError("m_window is empty")
    return ms


def _collect(params, ms, policy, n_cap, max_states, energy_max) -> list:
    candidates = []
    for m in ms:
        for qn, e, flags in _ladder(params, m, policy, n_cap, max_states, energy_max):
            candidates.append((e, m, qn.n, qn, flags))
    candidates.sort(key=lambda c: c[:3])
    if max_states is not None:
        candidates = candidates[:max_states]
    return [make_record(params, qn, e, flags) for e, _, _, qn, flags in candidates]


def _has_tie(records) -> bool:
    for first, second in zip(records, records[1:]):
        if abs(second.energy - first.energy) <= TIE_RTOL * max(abs(first.energy), 1e-300):
            return True
    return False
