"""Parameters, unit scales, coordinate maps and the curved Tan-Inkson potential.

All formulas are evaluated in natural units, hbar = mu = e = c = 1, where mu is
the effective mass.  In these units the cyclotron frequency equals the field
strength, the flux quantum is 2*pi and the effective magneton eh/(2 mu c) is 1/2.
A :class:`UnitScale` only matters at the boundary (CLI input and output).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Literal, Optional

import numpy as np
from scipy import constants as _const

FLUX_QUANTUM = 2.0 * math.pi
MAGNETON = 0.5  # effective magneton in natural units

Convention = Literal["half", "full"]
QUANTITY_KINDS = ("energy", "length", "field", "moment", "current")


class ModelError(ValueError):
    """Invalid model input."""


class DegenerateFrequencyError(ModelError):
    """Raised when omega_m vanishes and a quantity needs 1/omega_m."""


@dataclass(frozen=True)
class UnitScale:
    """Scale factors from natural units to a presentation unit system.

    ``energy_unit`` is meV per natural energy, ``length_unit`` nm per natural
    length and ``field_unit`` tesla per natural field.  Moments are reported
    in effective magnetons in the natural system and in meV/T otherwise;
    currents in natural units or nA.
    """

    system: Literal["natural", "material-preset"] = "natural"
    mass_ratio: float = 1.0
    energy_unit: float = 1.0
    length_unit: float = 1.0
    field_unit: float = 1.0
    name: str = "natural"

    def __post_init__(self):
        for key in ("mass_ratio", "energy_unit", "length_unit", "field_unit"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ModelError(f"{key} must be finite and positive, got {value}")

    @property
    def moment_unit(self) -> float:
        """meV/T per effective magneton."""
        if self.system == "natural":
            return 1.0
        return self.energy_unit * MAGNETON / self.field_unit

    @property
    def current_unit(self) -> float:
        """nA per natural current unit (e * E_unit / hbar)."""
        if self.system == "natural":
            return 1.0
        joule = self.energy_unit * 1e-3 * _const.e
        return _const.e * joule / _const.hbar * 1e9

    def factor(self, kind: str) -> float:
        if kind not in QUANTITY_KINDS:
            raise ModelError(f"unknown quantity kind {kind!r}; expected one of {QUANTITY_KINDS}")
        return {
            "energy": self.energy_unit,
            "length": self.length_unit,
            "field": self.field_unit,
            "moment": self.moment_unit,
            "current": self.current_unit,
        }[kind]


NATURAL = UnitScale()


def material_preset(mass_ratio: float, length_nm: float = 1.0, name: str = "custom") -> UnitScale:
    """Build a meV / nm / tesla unit scale for an effective-mass material.

    The natural length is ``length_nm`` nanometres; the natural energy is then
    hbar^2 / (m* L^2) and the natural field hbar / (e L^2).
    """
    m_star = mass_ratio * _const.m_e
    length = length_nm * 1e-9
    energy_j = _const.hbar**2 / (m_star * length**2)
    return UnitScale(
        system="material-preset",
        mass_ratio=mass_ratio,
        energy_unit=energy_j / (1e-3 * _const.e),
        length_unit=length_nm,
        field_unit=_const.hbar / (_const.e * length**2),
        name=name,
    )


# GaAs conduction-band effective mass, standard literature value.
GAAS = material_preset(0.067, name="gaas")
PRESETS = {"natural": NATURAL, "gaas": GAAS}


def convert_units(value, kind: str, direction: str, units: UnitScale = NATURAL):
    """Convert between natural units and ``units``.

    ``direction`` is ``"from_natural"`` or ``"to_natural"``.  Works on scalars
    and arrays.
    """
    factor = units.factor(kind)
    if direction == "from_natural":
        return value * factor
    if direction == "to_natural":
        return value / factor
    raise ModelError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class Geometry:
    a: float = 1.0
    flat_limit: bool = False

    def __post_init__(self):
        if self.flat_limit:
            object.__setattr__(self, "a", math.inf)
        elif not (math.isfinite(self.a) and self.a > 0):
            raise ModelError(f"sphere radius must be finite and positive, got {self.a}")

    @classmethod
    def flat(cls) -> "Geometry":
        return cls(a=math.inf, flat_limit=True)


@dataclass(frozen=True)
class Confinement:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        for key in ("lambda1", "lambda2"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value >= 0):
                raise ModelError(f"{key} must be finite and nonnegative, got {value}")


@dataclass(frozen=True)
class Fields:
    b: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.b) and math.isfinite(self.nu)):
            raise ModelError("field strength and flux ratio must be finite")


@dataclass(frozen=True)
class QuantumNumbers:
    n: int
    m: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m:
            raise ModelError(f"quantum numbers must be integers, got {self.n}, {self.m}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        if self.n < 0:
            raise ModelError(f"radial quantum number must be >= 0, got {self.n}")


@dataclass(frozen=True)
class ModelParams:
    geometry: Geometry = field(default_factory=Geometry)
    confinement: Confinement = field(default_factory=Confinement)
    fields: Fields = field(default_factory=Fields)
    convention: Convention = "half"
    units: UnitScale = NATURAL

    def __post_init__(self):
        if self.convention not in ("half", "full"):
            raise ModelError(f"convention must be 'half' or 'full', got {self.convention!r}")

    @classmethod
    def build(cls, a=1.0, lambda1=0.0, lambda2=0.0, b=0.0, nu=0.0,
              convention: Convention = "half", flat=False, units: UnitScale = NATURAL):
        geometry = Geometry.flat() if flat else Geometry(a)
        return cls(geometry, Confinement(lambda1, lambda2), Fields(b, nu), convention, units)

    def replace(self, **changes) -> "ModelParams":
        """Copy with top-level scalar overrides (a, lambda1, lambda2, b, nu, convention)."""
        values = dict(
            a=self.geometry.a, flat=self.geometry.flat_limit,
            lambda1=self.confinement.lambda1, lambda2=self.confinement.lambda2,
            b=self.fields.b, nu=self.fields.nu, convention=self.convention, units=self.units,
        )
        if "a" in changes and "flat" not in changes:
            changes["flat"] = False
        values.update(changes)
        return ModelParams.build(**values)

    @property
    def a(self) -> float:
        return self.geometry.a

    @property
    def c_omega(self) -> float:
        """Coefficient of omega_c (m + nu) in the energy."""
        return 0.5 if self.convention == "half" else 1.0

    def to_dict(self) -> dict:
        return {
            "a": None if self.geometry.flat_limit else self.geometry.a,
            "flat_limit": self.geometry.flat_limit,
            "lambda1": self.confinement.lambda1,
            "lambda2": self.confinement.lambda2,
            "b": self.fields.b,
            "nu": self.fields.nu,
            "convention": self.convention,
            "units": asdict(self.units),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        units = UnitScale(**data["units"]) if "units" in data else NATURAL
        return cls.build(
            a=data["a"] if data["a"] is not None else math.inf,
            lambda1=data["lambda1"], lambda2=data["lambda2"],
            b=data["b"], nu=data["nu"], convention=data["convention"],
            flat=data["flat_limit"], units=units,
        )


@dataclass(frozen=True)
class ConfinementScales:
    omega0: float
    rho0: float
    v0: float


@dataclass(frozen=True)
class DerivedQuantities:
    omega0: float
    rho0: float
    v0: float
    omega_c: float
    M: float
    omega_m: float
    rho_m: Optional[float]

    def require_rho_m(self) -> float:
        if self.rho_m is None:
            raise DegenerateFrequencyError("effective radius undefined: omega_m = 0")
        return self.rho_m


def derive_confinement(confinement: Confinement, geometry: Geometry) -> ConfinementScales:
    """omega0, rho0 (location of the potential minimum) and the offset V0."""
    l1, l2 = confinement.lambda1, confinement.lambda2
    if l1 == 0.0 and l2 == 0.0:
        return ConfinementScales(0.0, 0.0, 0.0)
    if geometry.flat_limit:
        if l1 == 0.0:
            raise ModelError("flat antidot (lambda1 = 0, lambda2 > 0) has no finite minimum")
        return ConfinementScales(
            omega0=math.sqrt(8.0 * l1),
            rho0=(l2 / l1) ** 0.25,
            v0=2.0 * math.sqrt(l1 * l2),
        )
    a = geometry.a
    eff = l1 + l2 / (2.0 * a) ** 4
    return ConfinementScales(
        omega0=math.sqrt(8.0 * eff),
        rho0=(l2 / eff) ** 0.25,
        v0=l2 / (2.0 * a * a) + 2.0 * math.sqrt(l2 * eff),
    )


def sample_potential(params: ModelParams, rho_grid) -> np.ndarray:
    """V(rho) = l1 rho^2 + (l2/rho^2)(1 + (rho/2a)^2)^2 - V0 on a grid of rho > 0."""
    rho = np.asarray(rho_grid, dtype=float)
    if np.any(~(rho > 0)):
        raise ModelError("potential is sampled only at rho > 0")
    conf = params.confinement
    scales = derive_confinement(conf, params.geometry)
    if params.geometry.flat_limit:
        stretch = 1.0
    else:
        stretch = (1.0 + (rho / (2.0 * params.a)) ** 2) ** 2
    return conf.lambda1 * rho**2 + conf.lambda2 / rho**2 * stretch - scales.v0


def potential_theta(params: ModelParams, theta) -> np.ndarray:
    """The potential as a function of the polar angle on the sphere."""
    return sample_potential(params, theta_to_rho(theta, params.geometry))


# coordinate maps: tan(theta/2) = rho/(2a), x = 1/(1 + (rho/2a)^2) = cos^2(theta/2)

def _check_finite_sphere(geometry: Geometry):
    if geometry.flat_limit:
        raise ModelError("coordinate maps need a finite sphere radius")


def theta_to_rho(theta, geometry: Geometry):
    _check_finite_sphere(geometry)
    t = np.asarray(theta, dtype=float)
    if np.any(~((t > 0) & (t < math.pi))):
        raise ModelError("theta must lie in (0, pi)")
    return 2.0 * geometry.a * np.tan(t / 2.0)


def rho_to_theta(rho, geometry: Geometry):
    _check_finite_sphere(geometry)
    r = np.asarray(rho, dtype=float)
    if np.any(~(r > 0)) or np.any(~np.isfinite(r)):
        raise ModelError("rho must be positive and finite")
    return 2.0 * np.arctan(r / (2.0 * geometry.a))


def rho_to_x(rho, geometry: Geometry):
    """x = 1/(1 + (rho/2a)^2); rho = 0 maps to x = 1."""
    _check_finite_sphere(geometry)
    r = np.asarray(rho, dtype=float)
    if np.any(~(r >= 0)):
        raise ModelError("rho must be nonnegative")
    return 1.0 / (1.0 + (r / (2.0 * geometry.a)) ** 2)


def x_to_rho(x, geometry: Geometry):
    _check_finite_sphere(geometry)
    xs = np.asarray(x, dtype=float)
    if np.any(~((xs > 0) & (xs <= 1))):
        raise ModelError("x must lie in (0, 1]")
    return 2.0 * geometry.a * np.sqrt((1.0 - xs) / xs)


def theta_to_x(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(~((t >= 0) & (t < math.pi))):
        raise ModelError("theta must lie in [0, pi)")
    return np.cos(t / 2.0) ** 2


def x_to_theta(x):
    xs = np.asarray(x, dtype=float)
    if np.any(~((xs > 0) & (xs <= 1))):
        raise ModelError("x must lie in (0, 1]")
    return 2.0 * np.arccos(np.sqrt(xs))


def effective_angular_number(params: ModelParams, m: int) -> float:
    scales = derive_confinement(params.confinement, params.geometry)
    u = m + params.fields.nu
    return math.hypot(u, 0.5 * scales.omega0 * scales.rho0**2)


def hybrid_frequency(params: ModelParams, m: int) -> float:
    """omega_m = sqrt((omega_c + (m + nu)/(2a^2))^2 + omega0^2)."""
    scales = derive_confinement(params.confinement, params.geometry)
    u = m + params.fields.nu
    curvature = 0.0 if params.geometry.flat_limit else u / (2.0 * params.a**2)
    return math.hypot(params.fields.b + curvature, scales.omega0)


def derive_state_quantities(params: ModelParams, qn: QuantumNumbers) -> DerivedQuantities:
    scales = derive_confinement(params.confinement, params.geometry)
    M = effective_angular_number(params, qn.m)
    omega_m = hybrid_frequency(params, qn.m)
    rho_m = math.sqrt(2.0 * M / omega_m) if omega_m > 0 else None
    return DerivedQuantities(
        omega0=scales.omega0, rho0=scales.rho0, v0=scales.v0,
        omega_c=params.fields.b, M=M, omega_m=omega_m, rho_m=rho_m,
    )
