"""Exact spectrum, wavefunctions, magnetization and persistent currents of a
quantum ring on a sphere, with a finite-difference cross-check."""
from .model import (
    GAAS,
    MAGNETON,
    NATURAL,
    DegenerateFrequencyError,
    ModelError,
    ModelParams,
    QuantumNumbers,
    UnitScale,
    convert_units,
    derive_confinement,
    derive_state_quantities,
    material_preset,
    sample_potential,
)
from .spectrum import (
    SpectrumTable,
    StateRecord,
    enumerate_states,
    eval_energy,
    eval_energy_flat,
    landau_sphere_energy,
    radial_bound,
)
from .observables import byers_yang_current, moment_from_current, state_current, state_moment
from .wavefunction import density_samples, hypergeom_poly, normalize, overlap, radial_profile
from .ensemble import (
    EnsembleResult,
    EnsembleSpec,
    InsufficientStatesError,
    chemical_potential,
    fill_T0,
    total_magnetization,
)
from .oracle import OracleGrid, ValidationReport, diff_energy, oracle_energy, validate

__version__ = "0.1.0"
