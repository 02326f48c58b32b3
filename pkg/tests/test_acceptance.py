"""Acceptance suite: one test per criterion, each at its stated tolerance."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from sphring.ensemble import EnsembleSpec, fill_T0, total_magnetization
from sphring.model import MAGNETON, ModelParams, QuantumNumbers, derive_confinement, derive_state_quantities
from sphring.observables import moment_from_current, state_current, state_moment
from sphring.oracle import diff_energy, oracle_energies, validate
from sphring.spectrum import enumerate_states, eval_energy, eval_energy_flat, radial_bound
from sphring.wavefunction import next_coefficient, node_count, normalize, overlap, radial_profile

Q = QuantumNumbers


def rel(value, reference):
    return abs(value - reference) / abs(reference)


@pytest.mark.acceptance(1, "free-sphere analytic spectrum (closed form 1e-12, oracle 1e-8, < 30 s)")
def test_free_sphere_spectrum():
    start = time.perf_counter()
    params = ModelParams.build(a=1.0)
    worst_closed = worst_oracle = 0.0
    for m in (-4, -3, -2, -1, 1, 2, 3, 4):
        oracle = oracle_energies(params, m, 5)
        for n in range(5):
            l = n + abs(m)
            exact = l * (l + 1) + 0.25
            exact /= 2.0
            worst_closed = max(worst_closed, rel(eval_energy(params, Q(n, m)), exact))
            worst_oracle = max(worst_oracle, rel(oracle[n], exact))
    elapsed = time.perf_counter() - start
    print(f"closed {worst_closed:.2e}, oracle {worst_oracle:.2e}, {elapsed:.1f} s")
    assert worst_closed <= 1e-12
    assert worst_oracle <= 1e-8
    assert elapsed < 30


@pytest.mark.acceptance(2, "sphere-Landau limit (oracle 1e-6, 10 states for m=0 at 10, < 1 min)")
def test_sphere_landau_limit():
    start = time.perf_counter()
    worst = 0.0
    for omega_c in (5.0, 10.0):
        params = ModelParams.build(a=1.0, b=omega_c)   # winning convention: half
        for m in range(-2, 3):
            count = radial_bound(params, m).count
            assert count >= 1
            oracle = oracle_energies(params, m, count)
            for n in range(count):
                worst = max(worst, rel(eval_energy(params, Q(n, m)), oracle[n]))
    assert radial_bound(ModelParams.build(a=1.0, b=10.0), 0).count == 10
    assert len(enumerate_states(ModelParams.build(a=1.0, b=10.0), (0, 0))) == 10
    elapsed = time.perf_counter() - start
    print(f"worst {worst:.2e}, {elapsed:.1f} s")
    assert worst < 1e-6
    assert elapsed < 60


ADJUDICATION_SETS = [
    dict(a=10.0, lambda1=1.0, lambda2=1.0, b=1.0, nu=0.3),
    dict(a=5.0, lambda1=0.5, lambda2=2.0, b=0.8, nu=0.0),
    dict(a=8.0, lambda1=2.0, lambda2=0.6, b=-1.5, nu=0.45),
    dict(a=3.0, lambda1=1.0, lambda2=3.0, b=2.0, nu=-0.2),
    dict(a=15.0, lambda1=0.3, lambda2=1.5, b=0.5, nu=0.7),
    dict(a=20.0, lambda1=1.5, lambda2=4.0, b=3.0, nu=0.1),
    dict(a=6.0, lambda1=0.8, lambda2=0.8, b=-0.6, nu=-0.35),
    dict(a=12.0, lambda1=0.1, lambda2=5.0, b=1.2, nu=0.5),
    dict(a=4.0, lambda1=3.0, lambda2=1.0, b=4.0, nu=0.25),
    dict(a=25.0, lambda1=0.5, lambda2=0.7, b=0.3, nu=-0.6),
    dict(a=7.0, lambda1=1.2, lambda2=2.5, b=-2.5, nu=1.15),
]


@pytest.mark.acceptance(3, "convention adjudication (unanimous verdict, winner 1e-5, gap 1e-4, < 2 min)")
def test_convention_adjudication():
    start = time.perf_counter()
    verdicts = set()
    worst_winner = worst_gap = 0.0
    for spec in ADJUDICATION_SETS:
        params = ModelParams.build(**spec)
        nu = params.fields.nu
        states = [r.qn for r in enumerate_states(params, max_states=8) if r.qn.m + nu != 0][:6]
        assert len(states) >= 4
        report = validate(params, states, tolerance=1e-5)
        verdicts.add(report.verdict)
        for row in report.rows:
            assert row.rel_err_half < 1e-5 <= row.rel_err_full    # every state, same winner
            worst_winner = max(worst_winner, row.rel_err_half)
            # predicted loser offset: (c_full - c_half) omega_c (m + nu)
            gap = abs(0.5 * params.fields.b * (row.qn.m + nu))
            worst_gap = max(worst_gap, rel(abs(row.E_closed_full - row.E_oracle), gap))
    elapsed = time.perf_counter() - start
    print(f"verdicts {verdicts}, winner {worst_winner:.2e}, gap {worst_gap:.2e}, {elapsed:.1f} s")
    assert verdicts == {"half"}
    assert len(ADJUDICATION_SETS) >= 10
    assert worst_gap < 1e-4
    assert elapsed < 120


@pytest.mark.acceptance(4, "flat-limit regression (1e-6 at a = 1e6 rho0; error ratio in [3.2, 4.8])")
def test_flat_limit_regression():
    flat = ModelParams.build(lambda1=1.0, lambda2=2.0, b=0.7, nu=0.15, flat=True)
    rho0 = derive_confinement(flat.confinement, flat.geometry).rho0
    states = [Q(n, m) for n in range(4) for m in range(-2, 3)]
    assert len(states) == 20
    worst, ratios = 0.0, []
    for qn in states:
        ef = eval_energy_flat(flat, qn)
        worst = max(worst, rel(eval_energy(flat.replace(a=1e6 * rho0), qn), ef))
        err1 = abs(eval_energy(flat.replace(a=1e3 * rho0), qn) - ef)
        err2 = abs(eval_energy(flat.replace(a=2e3 * rho0), qn) - ef)
        ratios.append(err1 / err2)
    print(f"worst {worst:.2e}, ratios {min(ratios):.4f}..{max(ratios):.4f}")
    assert worst < 1e-6
    assert all(3.2 <= r <= 4.8 for r in ratios)


@pytest.mark.acceptance(5, "derivative identities (1e-6) and moment-current inverse (1e-12)")
def test_derivative_identities():
    rng = np.random.default_rng(2024)
    tested = 0
    while tested < 20:
        params = ModelParams.build(a=rng.uniform(1, 30), lambda1=rng.uniform(0, 3),
                                   lambda2=rng.uniform(0, 3), b=rng.uniform(-4, 4),
                                   nu=rng.uniform(-2, 2))
        qn = Q(int(rng.integers(0, 5)), int(rng.integers(-8, 9)))
        if derive_state_quantities(params, qn).M <= 1e-3:
            continue
        dE_dB, _ = diff_energy(eval_energy, "B", params, qn)
        dE_dPhi, _ = diff_energy(eval_energy, "flux", params, qn)
        moment = state_moment(params, qn)
        current = state_current(params, qn)
        assert rel(MAGNETON * moment, -dE_dB) < 1e-6
        assert rel(current, -dE_dPhi) < 1e-6
        assert rel(moment_from_current(params, qn, current), moment) < 1e-12
        tested += 1


@pytest.mark.acceptance(6, "hand-computed worked state (1e-9)")
def test_worked_state():
    params = ModelParams.build(a=1.0, b=10.0, convention="half")
    qn = Q(0, 1)
    assert rel(eval_energy(params, qn), 16.125) < 1e-9
    assert rel(state_moment(params, qn), -3.0) < 1e-9
    assert rel(state_current(params, qn), -11.5 / (2 * math.pi)) < 1e-9
    assert abs(state_current(params, qn) - (-1.83028)) < 1e-5


@pytest.mark.acceptance(7, "wavefunction suite (truncation, nodes, Gram 1e-8, sqrt(3) 1e-9)")
def test_wavefunction_suite():
    for n in range(8):
        assert next_coefficient(n, n + 2.5, 1.75) == 0.0
    cases = [(ModelParams.build(a=2.0, lambda1=0.5, lambda2=0.8, b=0.7, nu=0.25), (0, 1, -2)),
             (ModelParams.build(a=10.0, lambda1=1.0, lambda2=1.0, b=1.0, nu=0.3), (2, -1)),
             (ModelParams.build(a=1.0, b=10.0), (0,))]
    for params, ms in cases:
        for m in ms:
            count = min(5, radial_bound(params, m).count)
            qns = [Q(n, m) for n in range(count)]
            for qn in qns:
                assert node_count(radial_profile(params, qn)) == qn.n
            gram = np.array([[overlap(params, a, b) for b in qns] for a in qns])
            assert np.max(np.abs(gram - np.diag(np.diag(gram)))) < 1e-8
            assert np.max(np.abs(np.diag(gram) - 1)) < 1e-9
    bare = radial_profile(ModelParams.build(a=1.0), Q(0, 1), normalized=False)
    assert rel(normalize(bare), math.sqrt(3)) < 1e-9


@pytest.mark.acceptance(8, "symmetry suite (flux shift, antisymmetry, closed shells)")
def test_symmetry_suite():
    base = ModelParams.build(a=6.0, lambda1=1.0, lambda2=1.5, b=0.9, nu=0.375)
    for k in (-3, -1, 2, 5):
        shifted = base.replace(nu=base.fields.nu - k)
        for n in range(3):
            for m in range(-5, 6):
                a, b = Q(n, m), Q(n, m + k)
                assert eval_energy(shifted, b) == eval_energy(base, a)
                assert state_moment(shifted, b) == state_moment(base, a)
                assert state_current(shifted, b) == state_current(base, a)
        for temperature in (0.0, 0.1):
            r1 = total_magnetization(base, EnsembleSpec(6, temperature), m_window=(-50, 50))
            r2 = total_magnetization(shifted, EnsembleSpec(6, temperature), m_window=(-50 + k, 50 + k))
            assert (r1.magnetization, r1.current) == (r2.magnetization, r2.current)
    mirror = base.replace(b=-base.fields.b, nu=-base.fields.nu)
    for n in range(3):
        for m in range(-5, 6):
            assert state_moment(base, Q(n, m)) == -state_moment(mirror, Q(n, -m))
            assert state_current(base, Q(n, m)) == -state_current(mirror, Q(n, -m))
    zero = base.replace(b=0.0, nu=0.0)
    energies = enumerate_states(zero, (-40, 40), max_states=40).energies
    shells = [i for i in range(1, len(energies)) if energies[i] - energies[i - 1] > 1e-9 * energies[i]]
    assert len(shells) >= 5
    for n_el in shells[:6]:
        assert fill_T0(zero, EnsembleSpec(n_el)).magnetization == 0.0


@pytest.mark.acceptance(9, "CLI determinism and Landau CSV first energy 5.125")
def test_cli_determinism(tmp_path):
    sweep = ["sweep", "--a", "10", "--lambda1", "1", "--lambda2", "1", "--flux-ratio", "0.3",
             "--param", "b", "--from", "0", "--to", "2", "--steps", "9", "--electrons", "5",
             "--temperature", "0.05", "--of", "magnetization"]
    outputs = []
    for i, extra in enumerate(([], ["--jobs", "3"])):
        path = tmp_path / f"sweep{i}.csv"
        proc = subprocess.run([sys.executable, "-m", "sphring", *sweep, *extra, "--output", str(path)],
                              capture_output=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") == 10
    landau = ["spectrum", "--a", "1", "--b", "10", "--lambda1", "0", "--lambda2", "0",
              "--m-min", "0", "--m-max", "0"]
    proc = subprocess.run([sys.executable, "-m", "sphring", *landau], capture_output=True)
    assert proc.returncode == 0
    header, first = proc.stdout.decode().splitlines()[:2]
    column = header.split(",").index("energy")
    assert float(first.split(",")[column]) == 5.125
