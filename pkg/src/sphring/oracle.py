"""Finite-difference oracle for the separated radial equation.

The radial problem in x = 1/(1 + (rho/2a)^2) is the Sturm-Liouville equation

    -(x(1-x) f')' + [M^2/(4(1-x)) + a^4 omega_m^2 / x] f = kappa f,
    kappa = 2 a^2 E - 1/4 + a^4 [omega_c^2 + omega0^2 (1 + (rho0/2a)^2)^2].

Its endpoint exponents are alpha = a^2 omega_m at x = 0 and M/2 at x = 1, so a
uniform grid in x converges only like h^(2 min(alpha, M/2)).  The solver
therefore discretizes the same operator in the polar angle, x = cos^2(theta/2):

    -(sin t f')' + sin t q(x(t)) f = kappa sin t f,

where the exponents double and the three-point scheme is second order whenever
M >= 1 and 4 alpha >= 2.  Eigenvalues come from Sturm-sequence bisection on the
symmetrized tridiagonal matrix; Richardson extrapolation over nested grids
removes the leading error.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import (
    FLUX_QUANTUM,
    MAGNETON,
    DegenerateFrequencyError,
    ModelError,
    ModelParams,
    QuantumNumbers,
    derive_state_quantities,
)

SLOW_ORDER = 2.0


@dataclass(frozen=True)
class RadialOperator:
    params: ModelParams
    m: int
    alpha: float     # a^2 omega_m, exponent at x = 0
    M: float         # 2 x exponent at x = 1
    shift: float     # a^4 [omega_c^2 + omega0^2 (1 + (rho0/2a)^2)^2]

    @property
    def a(self) -> float:
        return self.params.a

    @property
    def boundary_at_1(self) -> str:
        return "dirichlet" if self.M > 0 else "neumann"

    def p(self, x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 - x)

    def q(self, x):
        x = np.asarray(x, dtype=float)
        out = self.alpha**2 / x
        if self.M > 0:
            out = out + self.M**2 / (4.0 * (1.0 - x))
        return out

    def kappa_to_energy(self, kappa):
        return (np.asarray(kappa, dtype=float) + 0.25 - self.shift) / (2.0 * self.a**2)

    def energy_to_kappa(self, energy):
        return 2.0 * self.a**2 * np.asarray(energy, dtype=float) - 0.25 + self.shift

    @property
    def convergence_order(self) -> float:
        """Leading exponent of the discretization error in h."""
        order = min(SLOW_ORDER, 4.0 * self.alpha)
        if self.M > 0:
            order = min(order, 2.0 * self.M)
        return order


def build_radial_operator(params: ModelParams, m: int) -> RadialOperator:
    if params.geometry.flat_limit:
        raise ModelError("the oracle needs a finite sphere radius")
    d = derive_state_quantities(params, QuantumNumbers(0, m))
    if d.omega_m == 0.0:
        raise DegenerateFrequencyError(f"omega_m = 0 for m={m}")
    a = params.a
    stretch = (1.0 + (d.rho0 / (2.0 * a)) ** 2) ** 2
    shift = a**4 * (d.omega_c**2 + d.omega0**2 * stretch)
    return RadialOperator(params, m, a * a * d.omega_m, d.M, shift)


@dataclass(frozen=True)
class OracleGrid:
    points: int = 4001
    boundary_at_1: Optional[str] = None   # None: chosen from M
    richardson_levels: int = 1

    def __post_init__(self):
        if self.points < 101 or self.points % 2 == 0:
            raise ModelError(f"grid points must be odd and >= 101, got {self.points}")
        if self.richardson_levels not in (1, 2, 3):
            raise ModelError("richardson_levels must be 1, 2 or 3")
        if self.boundary_at_1 not in (None, "dirichlet", "neumann"):
            raise ModelError(f"unknown boundary condition {self.boundary_at_1!r}")

    def nested(self) -> list:
        """Point counts of the nested grids, coarsest first."""
        return [(self.points - 1) * 2**j + 1 for j in range(self.richardson_levels + 1)]

    def to_dict(self) -> dict:
        return {"points": self.points, "boundary_at_1": self.boundary_at_1,
                "richardson_levels": self.richardson_levels, "coordinate": "theta"}


def assemble(op: RadialOperator, points: int, boundary_at_1: Optional[str] = None):
    """Symmetric tridiagonal (diag, offdiag) on a uniform theta grid.

    theta = 0 is the ring centre (x = 1), theta = pi the far pole (x = 0).
    Dirichlet at theta = pi always; at theta = 0 Dirichlet or, for M = 0, the
    zero-flux half cell.  The weight sin(theta) is absorbed symmetrically.
    """
    boundary = boundary_at_1 or op.boundary_at_1
    h = math.pi / (points - 1)
    theta = np.linspace(0.0, math.pi, points)
    s_half = np.sin(theta[:-1] + 0.5 * h)
    neumann = boundary == "neumann"
    idx = np.arange(0 if neumann else 1, points - 1)
    t = theta[idx]
    x = np.cos(0.5 * t) ** 2
    weight = np.sin(t) * h
    q = op.alpha**2 / x
    if op.M > 0:
        q = q + op.M**2 / (4.0 * np.sin(0.5 * t) ** 2)
    left = s_half[np.maximum(idx - 1, 0)]
    if neumann:
        left = left.copy()
        left[0] = 0.0
        weight[0] = 1.0 - math.cos(0.5 * h)
    diag = (left + s_half[idx]) / h + q * weight
    off = -s_half[idx[:-1]] / h
    scale = 1.0 / np.sqrt(weight)
    return diag * scale * scale, off * scale[:-1] * scale[1:]


def sturm_count(diag, off, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift (LDL^T inertia)."""
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    tiny = np.finfo(float).tiny
    count = np.zeros(shifts.shape, dtype=int)
    piv = diag[0] - shifts
    piv = np.where(piv == 0.0, -tiny, piv)
    count += piv < 0
    off2 = np.asarray(off) ** 2
    for i in range(1, len(diag)):
        piv = diag[i] - shifts - off2[i - 1] / piv
        piv = np.where(piv == 0.0, -tiny, piv)
        count += piv < 0
    return count


def _lowest(diag, off, k: int, scale: float) -> np.ndarray:
    if k > len(diag):
        raise ModelError(f"requested {k} eigenvalues from a {len(diag)}-dimensional matrix")
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="i",
                            select_range=(0, k - 1), lapack_driver="stebz",
                            tol=1e-14 * scale)


def fd_eigenvalues(op: RadialOperator, grid: OracleGrid, count: int,
                   points: Optional[int] = None) -> np.ndarray:
    """The ``count`` lowest kappa on a single grid (no extrapolation)."""
    if count < 1:
        raise ModelError("count must be >= 1")
    diag, off = assemble(op, points or grid.points, grid.boundary_at_1)
    scale = max(1.0, (count + op.alpha + 0.5 * op.M + 1.0) ** 2)
    return _lowest(diag, off, count, scale)


def richardson(coarse, fine, order: float = 2.0) -> np.ndarray:
    """Eliminate an h^order error term from values on grids h and h/2."""
    coarse = np.asarray(coarse, dtype=float)
    fine = np.asarray(fine, dtype=float)
    if coarse.shape != fine.shape:
        raise ModelError("richardson needs matching value counts")
    r = 2.0**order
    return (r * fine - coarse) / (r - 1.0)


def _orders(op: RadialOperator, levels: int) -> list:
    first = op.convergence_order
    rest = [2.0, 4.0, 6.0] if first < 2.0 else [4.0, 6.0]
    return ([first] + rest)[:levels]


def extrapolated_kappas(op: RadialOperator, grid: OracleGrid, count: int) -> np.ndarray:
    table = [fd_eigenvalues(op, grid, count, points=p) for p in grid.nested()]
    for order in _orders(op, grid.richardson_levels):
        table = [richardson(c, f, order) for c, f in zip(table, table[1:])]
    return table[0]


def oracle_energies(params: ModelParams, m: int, count: int,
                    grid: OracleGrid = OracleGrid()) -> np.ndarray:
    op = build_radial_operator(params, m)
    return op.kappa_to_energy(extrapolated_kappas(op, grid, count))


def oracle_energy(params: ModelParams, qn: QuantumNumbers,
                  grid: OracleGrid = OracleGrid()) -> float:
    return float(oracle_energies(params, qn.m, qn.n + 1, grid)[qn.n])


EnergyFunction = Callable[[ModelParams, QuantumNumbers], float]


def diff_energy(energy_function: EnergyFunction, wrt: str, params: ModelParams,
                qn: QuantumNumbers, h0: Optional[float] = None):
    """dE/dB or dE/dPhi_AB by central differences with one Richardson step.

    Returns ``(derivative, error_estimate)``.  ``wrt='flux'`` differentiates
    with respect to Phi_AB = 2 pi nu.
    """
    if wrt == "B":
        base = params.fields.b
        def at(value):
            return energy_function(params.replace(b=value), qn)
    elif wrt == "flux":
        base = FLUX_QUANTUM * params.fields.nu
        def at(value):
            return energy_function(params.replace(nu=value / FLUX_QUANTUM), qn)
    else:
        raise ModelError(f"wrt must be 'B' or 'flux', got {wrt!r}")
    h = h0 if h0 is not None else 1e-4 * max(1.0, abs(base))

    def central(step):
        hi, lo = at(base + step), at(base - step)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ModelError("non-finite energy while differentiating")
        return (hi - lo) / (2.0 * step)

    coarse, fine = central(h), central(0.5 * h)
    best = (4.0 * fine - coarse) / 3.0
    return best, abs(best - fine)


@dataclass(frozen=True)
class ValidationRow:
    qn: QuantumNumbers
    E_closed_half: float
    E_closed_full: float
    E_oracle: float
    rel_err_half: float
    rel_err_full: float
    flags: tuple = ()
    moment_rel_err: Optional[float] = None
    current_rel_err: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "qn": {"n": self.qn.n, "m": self.qn.m},
            "E_closed_half": self.E_closed_half,
            "E_closed_full": self.E_closed_full,
            "E_oracle": self.E_oracle,
            "rel_err_half": self.rel_err_half,
            "rel_err_full": self.rel_err_full,
            "flags": list(self.flags),
            "moment_rel_err": self.moment_rel_err,
            "current_rel_err": self.current_rel_err,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationRow":
        return cls(
            QuantumNumbers(data["qn"]["n"], data["qn"]["m"]),
            data["E_closed_half"], data["E_closed_full"], data["E_oracle"],
            data["rel_err_half"], data["rel_err_full"], tuple(data.get("flags", ())),
            data.get("moment_rel_err"), data.get("current_rel_err"),
        )


@dataclass(frozen=True)
class ValidationReport:
    params: ModelParams
    grid: OracleGrid
    rows: tuple
    summary: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return self.summary["verdict"]

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "rows": [row.to_dict() for row in self.rows],
            "summary": dict(self.summary),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        g = data["grid"]
        grid = OracleGrid(g["points"], g["boundary_at_1"], g["richardson_levels"])
        rows = tuple(ValidationRow.from_dict(r) for r in data["rows"])
        return cls(ModelParams.from_dict(data["params"]), grid, rows, dict(data["summary"]))

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        return cls.from_dict(json.loads(text))


def _rel(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def decide_verdict(max_half: float, max_full: float, tolerance: float) -> str:
    half_ok, full_ok = max_half < tolerance, max_full < tolerance
    if half_ok and not full_ok:
        return "half"
    if full_ok and not half_ok:
        return "full"
    return "inconclusive"


def validate(params: ModelParams, states: Sequence[QuantumNumbers], tolerance: float = 1e-5,
             grid: OracleGrid = OracleGrid(), check_derivatives: bool = True,
             derivative_tolerance: float = 1e-6) -> ValidationReport:
    """Compare closed-form energies under both conventions with the oracle.

    Failures never raise; they show up as row errors and in the verdict.
    """
    from .observables import state_current, state_moment
    from .spectrum import eval_energy, radial_bound

    half = params.replace(convention="half")
    full = params.replace(convention="full")
    by_m = defaultdict(list)
    for qn in states:
        by_m[qn.m].append(qn)

    rows = []
    for m in sorted(by_m):
        qns = sorted(by_m[m], key=lambda q: q.n)
        op = build_radial_operator(params, m)
        energies = op.kappa_to_energy(extrapolated_kappas(op, grid, qns[-1].n + 1))
        n_sup = radial_bound(params, m).n_sup
        for qn in qns:
            e_oracle = float(energies[qn.n])
            e_half, e_full = eval_energy(half, qn), eval_energy(full, qn)
            flags = []
            if qn.n >= n_sup:
                flags.append("beyond_bound")
            if op.convergence_order < SLOW_ORDER:
                flags.append("slow_convergence")
            moment_err = current_err = None
            if check_derivatives:
                dE_dB, _ = diff_energy(eval_energy, "B", half, qn)
                moment_err = _rel(MAGNETON * state_moment(half, qn), -dE_dB)
                if op.M > 1e-3:
                    dE_dPhi, _ = diff_energy(eval_energy, "flux", half, qn)
                    current_err = _rel(state_current(half, qn), -dE_dPhi)
            rows.append(ValidationRow(
                qn, e_half, e_full, e_oracle,
                _rel(e_half, e_oracle), _rel(e_full, e_oracle),
                tuple(flags), moment_err, current_err,
            ))

    max_half = max((r.rel_err_half for r in rows), default=0.0)
    max_full = max((r.rel_err_full for r in rows), default=0.0)
    moment_errs = [r.moment_rel_err for r in rows if r.moment_rel_err is not None]
    current_errs = [r.current_rel_err for r in rows if r.current_rel_err is not None]
    summary = {
        "max_rel_err_half": max_half,
        "max_rel_err_full": max_full,
        "verdict": decide_verdict(max_half, max_full, tolerance),
        "tolerance": tolerance,
        "states": len(rows),
        "max_moment_rel_err": max(moment_errs, default=None),
        "max_current_rel_err": max(current_errs, default=None),
        "derivative_tolerance": derivative_tolerance,
    }
    return ValidationReport(params, grid, tuple(rows), summary)
