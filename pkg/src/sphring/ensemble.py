"""Fermi-weighted totals: magnetization and persistent current for N electrons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .model import ModelError, ModelParams
from .observables import byers_yang_current
from .spectrum import TIE_RTOL, SpectrumTable, StateRecord, enumerate_states

# excluded states must carry occupation below this
TAIL_OCCUPATION = 1e-12
_TAIL_KT = -math.log(TAIL_OCCUPATION)
_PAD_KT = 40.0


class InsufficientStatesError(ModelError):
    def __init__(self, needed: int, available: int):
        super().__init__(f"need {needed} states, spectrum has {available} "
                         f"(short by {needed - available})")
        self.needed = needed
        self.available = available
        self.shortfall = needed - available


class WindowTooSmallError(ModelError):
    """The fixed m-window cuts off states with non-negligible occupation."""


@dataclass(frozen=True)
class EnsembleSpec:
    electrons: int = 1
    temperature: float = 0.0

    def __post_init__(self):
        if int(self.electrons) != self.electrons or self.electrons < 1:
            raise ModelError(f"electrons must be a positive integer, got {self.electrons}")
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise ModelError(f"temperature must be finite and >= 0, got {self.temperature}")


@dataclass(frozen=True)
class EnsembleResult:
    states: tuple
    weights: tuple
    magnetization: float          # effective magnetons
    current: float                # natural units
    chemical_potential: Optional[float] = None
    ties: bool = False            # T = 0 filling split a degenerate level


def record_current(params: ModelParams, record: StateRecord) -> float:
    """Closed-form current, or the numerical Byers-Yang value when M = 0."""
    if record.current is not None:
        return record.current
    return byers_yang_current(params, record.qn)


def fill_T0(params: ModelParams, spec: EnsembleSpec, m_window=None,
            bound_policy: str = "paper", n_cap: Optional[int] = None) -> EnsembleResult:
    """Occupy the N lowest states in (E, m, n) order."""
    n_el = spec.electrons
    table = enumerate_states(params, m_window, bound_policy, max_states=n_el + 1, n_cap=n_cap)
    if len(table) < n_el:
        raise InsufficientStatesError(n_el, len(table))
    occupied = table.records[:n_el]
    ties = False
    if len(table) > n_el:
        last, following = table.records[n_el - 1], table.records[n_el]
        ties = abs(following.energy - last.energy) <= TIE_RTOL * max(abs(last.energy), 1e-300)
    return EnsembleResult(
        states=tuple(occupied),
        weights=(1.0,) * n_el,
        magnetization=math.fsum(r.moment for r in occupied),
        current=math.fsum(record_current(params, r) for r in occupied),
        ties=ties,
    )


def fermi(energies, mu: float, temperature: float) -> np.ndarray:
    return expit(-(np.asarray(energies, dtype=float) - mu) / temperature)


def _solve_mu(energies: np.ndarray, n_el: int, temperature: float) -> float:
    lo = energies[0] - _PAD_KT * temperature
    hi = energies[-1] + _PAD_KT * temperature
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fermi(energies, mid, temperature).sum() < n_el:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    residual = abs(fermi(energies, mu, temperature).sum() - n_el)
    if residual >= 1e-10:
        raise ModelError(f"chemical potential did not converge (residual {residual:.3g})")
    return mu


def _thermal_table(params, spec, m_window, bound_policy, n_cap):
    n_el, temperature = spec.electrons, spec.temperature
    base = enumerate_states(params, m_window, bound_policy, max_states=n_el, n_cap=n_cap)
    if len(base) < n_el:
        raise InsufficientStatesError(n_el, len(base))
    cut = base.records[-1].energy + _PAD_KT * temperature
    while True:
        table = enumerate_states(params, m_window, bound_policy, n_cap=n_cap, energy_max=cut)
        energies = np.array(table.energies)
        mu = _solve_mu(energies, n_el, temperature)
        if mu + _TAIL_KT * temperature <= cut:
            break
        cut = mu + _PAD_KT * temperature
    if m_window is not None:
        _check_window_edges(table, mu, temperature)
    return table, mu


def _check_window_edges(table: SpectrumTable, mu: float, temperature: float):
    lo, hi = table.m_window
    for r in table.records:
        if r.qn.m in (lo, hi):
            occ = float(fermi([r.energy], mu, temperature)[0])
            if occ >= TAIL_OCCUPATION:
                raise WindowTooSmallError(
                    f"state (n={r.qn.n}, m={r.qn.m}) at the window edge has occupation "
                    f"{occ:.3g}; widen the m-window beyond [{lo}, {hi}]")


def chemical_potential(params: ModelParams, spec: EnsembleSpec, m_window=None,
                       bound_policy: str = "paper", n_cap: Optional[int] = None) -> float:
    """mu such that sum_states f0(E) = N, by bisection."""
    if spec.temperature <= 0:
        raise ModelError("chemical_potential needs T > 0")
    return _thermal_table(params, spec, m_window, bound_policy, n_cap)[1]


def total_magnetization(params: ModelParams, spec: EnsembleSpec, m_window=None,
                        bound_policy: str = "paper", n_cap: Optional[int] = None) -> EnsembleResult:
    """Ensemble magnetization and current; T = 0 fills, T > 0 weights by f0."""
    if spec.temperature == 0:
        return fill_T0(params, spec, m_window, bound_policy, n_cap)
    table, mu = _thermal_table(params, spec, m_window, bound_policy, n_cap)
    weights = fermi(table.energies, mu, spec.temperature)
    moments = np.array([r.moment for r in table.records])
    currents = np.array([record_current(params, r) for r in table.records])
    return EnsembleResult(
        states=table.records,
        weights=tuple(float(w) for w in weights),
        magnetization=math.fsum(weights * moments),
        current=math.fsum(weights * currents),
        chemical_potential=mu,
    )
