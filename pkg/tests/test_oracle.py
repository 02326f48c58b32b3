import math

import numpy as np
import pytest

from sphring.model import DegenerateFrequencyError, ModelError, ModelParams, QuantumNumbers
from sphring.oracle import (
    OracleGrid,
    ValidationReport,
    assemble,
    build_radial_operator,
    decide_verdict,
    diff_energy,
    extrapolated_kappas,
    fd_eigenvalues,
    oracle_energies,
    oracle_energy,
    richardson,
    sturm_count,
    validate,
)
from sphring.spectrum import eval_energy

from conftest import rel

Q = QuantumNumbers
GRID = OracleGrid()


def test_free_sphere_operator(free_sphere):
    op = build_radial_operator(free_sphere, 1)
    x = np.array([0.1, 0.37, 0.8])
    np.testing.assert_allclose(op.q(x), 0.25 * (1 / x + 1 / (1 - x)), rtol=1e-14)
    np.testing.assert_allclose(op.p(x), x * (1 - x))
    assert op.kappa_to_energy(2.0) == pytest.approx((2.0 + 0.25) / 2, rel=1e-15)
    assert op.boundary_at_1 == "dirichlet"


def test_landau_operator(landau):
    op = build_radial_operator(landau, 0)
    x = np.array([0.2, 0.5])
    np.testing.assert_allclose(op.q(x), 100 / x, rtol=1e-14)
    assert op.boundary_at_1 == "neumann"


def test_kappa_map_monotone(ring):
    op = build_radial_operator(ring, 2)
    k = np.linspace(-10, 1e4, 50)
    assert np.all(np.diff(op.kappa_to_energy(k)) > 0)
    np.testing.assert_allclose(op.energy_to_kappa(op.kappa_to_energy(k)), k, rtol=1e-12, atol=1e-9)


def test_operator_coefficients_positive(ring):
    op = build_radial_operator(ring, -3)
    x = np.linspace(1e-6, 1 - 1e-6, 1001)
    assert np.all(op.p(x) > 0) and np.all(op.q(x) >= 0)


def test_operator_rejects_degenerate(free_sphere):
    with pytest.raises(DegenerateFrequencyError):
        build_radial_operator(free_sphere, 0)
    with pytest.raises(ModelError):
        build_radial_operator(ModelParams.build(lambda1=1, flat=True), 0)


def test_grid_validation():
    for bad in (dict(points=100), dict(points=51), dict(richardson_levels=4),
                dict(boundary_at_1="robin")):
        with pytest.raises(ModelError):
            OracleGrid(**bad)
    assert OracleGrid(101, richardson_levels=2).nested() == [101, 201, 401]


def test_free_sphere_kappas(free_sphere):
    op = build_radial_operator(free_sphere, 1)
    kappas = extrapolated_kappas(op, GRID, 4)
    exact = np.array([2.0, 6.0, 12.0, 20.0])
    assert np.max(np.abs(kappas - exact) / exact) < 1e-8


def test_eigenvalues_strictly_increasing(ring):
    k = fd_eigenvalues(build_radial_operator(ring, 1), GRID, 8)
    assert np.all(np.diff(k) > 0)


def test_second_order_convergence(free_sphere):
    op = build_radial_operator(free_sphere, 1)
    exact = np.array([2.0, 6.0, 12.0])
    e1 = np.abs(fd_eigenvalues(op, GRID, 3, points=1001) - exact)
    e2 = np.abs(fd_eigenvalues(op, GRID, 3, points=2001) - exact)
    ratio = e1 / e2
    assert np.all((ratio >= 3.5) & (ratio <= 4.5))


def test_convergence_order_reported(free_sphere, landau):
    assert build_radial_operator(free_sphere, 1).convergence_order == 2.0
    assert build_radial_operator(landau, 0).convergence_order == 2.0
    weak = ModelParams.build(a=1.0, b=1.0, nu=0.25)
    assert build_radial_operator(weak, 0).convergence_order == pytest.approx(0.5)


def test_richardson_examples():
    h = np.array([0.1, 0.05])
    values = 3.7 + 2.5 * h**2
    assert richardson([values[0]], [values[1]])[0] == pytest.approx(3.7, rel=1e-15)
    assert richardson([5.0, 6.0], [5.0, 6.0]).tolist() == [5.0, 6.0]
    with pytest.raises(ModelError):
        richardson([1.0, 2.0], [1.0])


def test_fd_count_limits(free_sphere):
    op = build_radial_operator(free_sphere, 1)
    with pytest.raises(ModelError):
        fd_eigenvalues(op, OracleGrid(101), 200)
    with pytest.raises(ModelError):
        fd_eigenvalues(op, GRID, 0)


def test_matrix_symmetric_and_sturm_counts(ring):
    op = build_radial_operator(ring, 2)
    diag, off = assemble(op, 401)
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    assert np.array_equal(dense, dense.T)
    eig = np.linalg.eigvalsh(dense)
    rng = np.random.default_rng(2)
    probes = rng.uniform(eig[0] - 10, eig[30], 20)
    np.testing.assert_array_equal(sturm_count(diag, off, probes),
                                  [np.count_nonzero(eig < p) for p in probes])
    lowest = fd_eigenvalues(op, OracleGrid(401), 10)
    np.testing.assert_allclose(lowest, eig[:10], rtol=1e-12)


def test_oracle_energy_examples(free_sphere, landau, ring):
    assert abs(oracle_energy(free_sphere, Q(0, 1)) - 1.125) < 1e-8
    assert rel(oracle_energy(landau, Q(0, 0)), 5.125) < 1e-6
    e = oracle_energy(ring, Q(0, 2))
    half = rel(eval_energy(ring, Q(0, 2)), e)
    full = rel(eval_energy(ring.replace(convention="full"), Q(0, 2)), e)
    assert (half < 1e-5) != (full < 1e-5)


def test_oracle_frozen_values(ring):
    # reference values from the default 4001/8001 theta grids
    assert oracle_energy(ring, Q(0, 2)) == pytest.approx(4.728362013519363, rel=1e-11)
    np.testing.assert_allclose(oracle_energies(ring, -1, 3),
                               [1.52188303, 4.53861638, 7.56534974], rtol=1e-8)


def test_boundary_policy_for_m0(landau):
    neumann = oracle_energies(landau, 0, 3)
    dirichlet = oracle_energies(landau, 0, 3, OracleGrid(boundary_at_1="dirichlet"))
    closed = [eval_energy(landau, Q(n, 0)) for n in range(3)]
    assert np.all(dirichlet > neumann)
    assert np.max(np.abs(neumann - closed) / closed) < 1e-6
    assert np.min(np.abs(dirichlet - closed) / closed) > 1e-2


def test_oracle_flux_shift(ring):
    p = ring.replace(nu=0.25)
    for k in (-2, 1, 3):
        q = p.replace(nu=0.25 - k)
        assert abs(oracle_energy(q, Q(1, 2 + k)) - oracle_energy(p, Q(1, 2))) < 1e-9


def test_diff_energy_examples(landau):
    def linear(params, qn):
        return 1.125 + 1.5 * params.fields.b
    value, err = diff_energy(linear, "B", landau, Q(0, 1))
    assert abs(value - 1.5) < 1e-10
    value, _ = diff_energy(lambda p, q: 7.25, "flux", landau, Q(0, 1))
    assert abs(value) < 1e-12
    dE, _ = diff_energy(eval_energy, "flux", landau, Q(0, 1))
    assert rel(-dE, -11.5 / (2 * math.pi)) < 1e-6
    with pytest.raises(ModelError):
        diff_energy(eval_energy, "temperature", landau, Q(0, 1))
    with pytest.raises(ModelError):
        diff_energy(lambda p, q: math.nan, "B", landau, Q(0, 1))


def test_validate_free_sphere_inconclusive(free_sphere):
    states = [Q(n, m) for m in (1, 2, -3) for n in range(3)]
    report = validate(free_sphere, states)
    assert report.verdict == "inconclusive"
    assert report.summary["max_rel_err_half"] < 1e-8
    assert report.summary["max_rel_err_full"] < 1e-8
    assert all("beyond_bound" in r.flags for r in report.rows)


def test_validate_confined_ring(ring):
    states = [Q(0, 2), Q(1, 2), Q(0, -1), Q(2, 0)]
    report = validate(ring, states)
    assert report.verdict == "half"
    for row in report.rows:
        gap = abs(0.5 * ring.fields.b * (row.qn.m + ring.fields.nu))
        assert rel(abs(row.E_closed_full - row.E_oracle), gap) < 1e-4
        assert row.moment_rel_err < 1e-6 and row.current_rel_err < 1e-6
    assert set(report.summary) >= {"max_rel_err_half", "max_rel_err_full", "verdict", "tolerance"}


def test_report_json_round_trip(ring):
    report = validate(ring, [Q(0, 1), Q(0, -2)])
    text = report.to_json()
    again = ValidationReport.from_json(text)
    assert again == report
    assert again.to_json() == text
    doc = report.to_dict()
    assert set(doc) == {"params", "grid", "rows", "summary"}
    assert {"qn", "E_closed_half", "E_closed_full", "E_oracle", "rel_err_half",
            "rel_err_full"} <= set(doc["rows"][0])


def test_decide_verdict():
    assert decide_verdict(1e-9, 1e-2, 1e-5) == "half"
    assert decide_verdict(1e-2, 1e-9, 1e-5) == "full"
    assert decide_verdict(1e-9, 1e-9, 1e-5) == "inconclusive"
    assert decide_verdict(1e-2, 1e-2, 1e-5) == "inconclusive"


def test_slow_convergence_flag():
    weak = ModelParams.build(a=1.0, b=1.0, nu=0.25)
    report = validate(weak, [Q(0, 0)], check_derivatives=False)
    assert "slow_convergence" in report.rows[0].flags
