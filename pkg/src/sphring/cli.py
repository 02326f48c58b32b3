"""Command-line front end: spectra, curves, ensemble totals, sweeps, validation.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 empty spectrum or too
few states, 4 validation with neither convention inside tolerance.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import (
    EnsembleSpec,
    InsufficientStatesError,
    WindowTooSmallError,
    total_magnetization,
)
from .model import PRESETS, ModelError, ModelParams, QuantumNumbers, UnitScale, derive_confinement, sample_potential
from .oracle import OracleGrid, validate
from .spectrum import SpectrumTable, enumerate_states
from .wavefunction import density_samples

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_EMPTY, EXIT_VALIDATION = 0, 1, 2, 3, 4

COMMANDS = ("spectrum", "potential", "wavefunction", "magnetization", "current", "sweep", "validate")
SWEEP_PARAMS = ("b", "flux", "a")
SWEEPABLE = ("spectrum", "magnetization", "current", "validate")
CSV_HEADER = ("n", "m", "energy", "moment", "current", "rho_m", "M", "omega_m", "flags")
DEFAULT_MAX_STATES = 20
DEFAULT_VALIDATE_STATES = 10


class UsageError(Exception):
    pass


class EmptySpectrumError(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int
    of: str = "magnetization"

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise UsageError(f"--param must be one of {SWEEP_PARAMS}")
        if self.steps < 2:
            raise UsageError("sweep needs --steps >= 2")
        if self.start == self.stop:
            raise UsageError("sweep needs --from != --to")
        if self.of not in SWEEPABLE:
            raise UsageError(f"--of must be one of {SWEEPABLE}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams
    ensemble: Optional[EnsembleSpec] = None
    sweep: Optional[SweepSpec] = None
    output: Optional[str] = None
    format: str = "csv"
    grid: OracleGrid = field(default_factory=OracleGrid)
    m_window: Optional[tuple] = None
    n_cap: Optional[int] = None
    bound_policy: str = "paper"
    max_states: Optional[int] = None
    per_state: bool = False
    qn: Optional[QuantumNumbers] = None
    coordinate: str = "rho"
    points: int = 201
    rho_max: Optional[float] = None
    jobs: int = 1
    tolerance: float = 1e-5

    @property
    def units(self) -> UnitScale:
        return self.params.units


# ---------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value file; flags override it")
    g = p.add_argument_group("model")
    g.add_argument("--a", type=float, default=1.0, help="sphere radius ('inf' for the flat plane)")
    g.add_argument("--lambda1", type=float, default=0.0)
    g.add_argument("--lambda2", type=float, default=0.0)
    g.add_argument("--b", type=float, default=0.0, help="magnetic field")
    g.add_argument("--flux-ratio", type=float, default=0.0, help="AB flux in flux quanta")
    g.add_argument("--convention", choices=("half", "full"), default="half")
    g.add_argument("--units", choices=tuple(PRESETS), default="natural")
    s = p.add_argument_group("states")
    s.add_argument("--m-min", type=int)
    s.add_argument("--m-max", type=int)
    s.add_argument("--n-cap", type=int)
    s.add_argument("--bound-policy", choices=("paper", "relaxed"), default="paper")
    s.add_argument("--max-states", type=int)
    e = p.add_argument_group("ensemble")
    e.add_argument("--electrons", type=int, default=1)
    e.add_argument("--temperature", type=float, default=0.0)
    e.add_argument("--per-state", action="store_true")
    c = p.add_argument_group("curves")
    c.add_argument("--n", type=int, default=0)
    c.add_argument("--m", type=int, default=0)
    c.add_argument("--coordinate", choices=("rho", "theta", "x"), default="rho")
    c.add_argument("--points", type=int, default=201)
    c.add_argument("--rho-max", type=float)
    w = p.add_argument_group("sweep")
    w.add_argument("--param", choices=SWEEP_PARAMS)
    w.add_argument("--from", dest="start", type=float)
    w.add_argument("--to", dest="stop", type=float)
    w.add_argument("--steps", type=int)
    w.add_argument("--of", choices=SWEEPABLE, default="magnetization")
    w.add_argument("--jobs", type=int, default=1)
    o = p.add_argument_group("oracle")
    o.add_argument("--grid", type=int, default=4001, help="coarse grid points (odd)")
    o.add_argument("--richardson", type=int, default=1, choices=(1, 2, 3))
    o.add_argument("--tolerance", type=float, default=1e-5)
    out = p.add_argument_group("output")
    out.add_argument("--format", choices=("csv", "json"))
    out.add_argument("--output", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sphring", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    return parser


def read_config(path: str) -> list:
    """Turn a ``key = value`` file into command-line tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if flag == "--per-state":
                if value.lower() in ("1", "true", "yes", "on"):
                    tokens.append(flag)
                continue
            tokens += [flag, value]
    return tokens


def _with_config(argv: list) -> list:
    """Splice config-file tokens in front of the command-line flags."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not argv or argv[0] not in COMMANDS:
        return argv
    try:
        tokens = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    return [argv[0]] + tokens + argv[1:]


def _natural_params(ns, units: UnitScale) -> ModelParams:
    """Command-line values (in the chosen unit system) to natural-unit parameters."""
    e, l = units.energy_unit, units.length_unit
    flat = math.isinf(ns.a)
    return ModelParams.build(
        a=1.0 if flat else ns.a / l,
        lambda1=ns.lambda1 / (e / l**2),
        lambda2=ns.lambda2 / (e * l**2),
        b=ns.b / units.field_unit,
        nu=ns.flux_ratio,
        convention=ns.convention,
        flat=flat,
        units=units,
    )


def parse_args(argv: Sequence[str]) -> RunConfig:
    argv = _with_config(list(argv))
    ns = build_parser().parse_args(argv)
    units = PRESETS[ns.units]
    try:
        params = _natural_params(ns, units)
        ensemble = EnsembleSpec(ns.electrons, ns.temperature / units.energy_unit)
        qn = QuantumNumbers(ns.n, ns.m)
        grid = OracleGrid(points=ns.grid, richardson_levels=ns.richardson)
    except ModelError as exc:
        raise UsageError(str(exc)) from exc
    if (ns.m_min is None) != (ns.m_max is None):
        raise UsageError("--m-min and --m-max must be given together")
    window = None
    if ns.m_min is not None:
        if ns.m_min > ns.m_max:
            raise UsageError("--m-min must not exceed --m-max")
        window = (ns.m_min, ns.m_max)
    for key in ("n_cap", "max_states"):
        value = getattr(ns, key)
        if value is not None and value < (0 if key == "n_cap" else 1):
            raise UsageError(f"--{key.replace('_', '-')} out of range: {value}")
    if ns.points < 2:
        raise UsageError("--points must be >= 2")
    if ns.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if ns.rho_max is not None and not ns.rho_max > 0:
        raise UsageError("--rho-max must be positive")
    sweep = None
    if ns.command == "sweep":
        if None in (ns.param, ns.start, ns.stop, ns.steps):
            raise UsageError("sweep needs --param, --from, --to and --steps")
        sweep = SweepSpec(ns.param, ns.start, ns.stop, ns.steps, ns.of)
        if ns.param == "a" and (ns.start <= 0 or ns.stop <= 0):
            raise UsageError("sphere radius sweep must stay positive")
    fmt = ns.format or ("json" if ns.command == "validate" else "csv")
    return RunConfig(
        command=ns.command, params=params, ensemble=ensemble, sweep=sweep,
        output=ns.output, format=fmt, grid=grid, m_window=window,
        n_cap=ns.n_cap, bound_policy=ns.bound_policy, max_states=ns.max_states,
        per_state=ns.per_state, qn=qn, coordinate=ns.coordinate, points=ns.points,
        rho_max=ns.rho_max, jobs=ns.jobs, tolerance=ns.tolerance,
    )


# ---------------------------------------------------------------- formatting

def format_float(value) -> str:
    """Shortest decimal with at least 12 significant digits that round-trips."""
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return repr(value)
    for digits in range(12, 18):
        text = f"{value:.{digits}g}"
        if float(text) == value:
            return text
    return repr(value)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (tuple, list)):
        return ";".join(str(v) for v in value)
    return str(value)


def write_csv(header: Sequence[str], rows) -> bytes:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue().encode("utf-8")


def _json_value(value):
    if isinstance(value, (tuple, list)):
        return [_json_value(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(header: Sequence[str], rows, meta: dict = None) -> bytes:
    doc = {"columns": list(header),
           "rows": [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]}
    if meta:
        doc.update(meta)
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def state_rows(table: SpectrumTable, units: UnitScale) -> list:
    e, l = units.energy_unit, units.length_unit
    rows = []
    for r in table.records:
        rows.append((
            r.qn.n, r.qn.m, r.energy * e, r.moment * units.moment_unit,
            None if r.current is None else r.current * units.current_unit,
            None if r.rho_m is None else r.rho_m * l, r.M, r.omega_m * e, r.flags,
        ))
    return rows


def emit_csv(table: SpectrumTable, units: UnitScale = None) -> bytes:
    """StateRecord table as CSV; the current cell is empty for M = 0 rows."""
    return write_csv(CSV_HEADER, state_rows(table, units or table.params.units))


# ---------------------------------------------------------------- commands

@dataclass
class Result:
    header: tuple
    rows: list
    exit_code: int = EXIT_OK
    meta: dict = field(default_factory=dict)


def _spectrum(cfg: RunConfig) -> Result:
    max_states = cfg.max_states
    if cfg.m_window is None and max_states is None:
        max_states = DEFAULT_MAX_STATES
    table = enumerate_states(cfg.params, cfg.m_window, cfg.bound_policy, max_states, cfg.n_cap)
    code = EXIT_EMPTY if table.is_empty else EXIT_OK
    return Result(CSV_HEADER, state_rows(table, cfg.units), code, {"ties": table.ties})


def _default_rho_max(params: ModelParams) -> float:
    rho0 = derive_confinement(params.confinement, params.geometry).rho0
    if rho0 > 0:
        return 3.0 * rho0
    return 4.0 * params.a if not params.geometry.flat_limit else 10.0


def _rho_grid(cfg: RunConfig) -> np.ndarray:
    top = cfg.rho_max / cfg.units.length_unit if cfg.rho_max else _default_rho_max(cfg.params)
    return np.linspace(top / cfg.points, top, cfg.points)


def _potential(cfg: RunConfig) -> Result:
    rho = _rho_grid(cfg)
    v = sample_potential(cfg.params, rho)
    rows = list(zip(rho * cfg.units.length_unit, v * cfg.units.energy_unit))
    return Result(("rho", "V"), rows)


def _wavefunction(cfg: RunConfig) -> Result:
    pts = cfg.points
    l = cfg.units.length_unit
    if cfg.coordinate == "x":
        grid = (np.arange(pts) + 0.5) / pts
    elif cfg.coordinate == "theta":
        grid = (np.arange(pts) + 0.5) * math.pi / pts
    else:
        grid = _rho_grid(cfg)
    samples = density_samples(cfg.params, cfg.qn, cfg.coordinate, grid)
    if cfg.coordinate == "rho":
        samples = samples * np.array([l, 1.0 / l])
    return Result((cfg.coordinate, "density"), [tuple(row) for row in samples])


def _ensemble(cfg: RunConfig, quantity: str) -> Result:
    res = total_magnetization(cfg.params, cfg.ensemble, cfg.m_window, cfg.bound_policy, cfg.n_cap)
    u = cfg.units
    mu = None if res.chemical_potential is None else res.chemical_potential * u.energy_unit
    if cfg.per_state:
        header = ("n", "m", "energy", "weight", "moment", "current", "flags")
        rows = []
        for r, w in zip(res.states, res.weights):
            cur = None if r.current is None else r.current * u.current_unit
            rows.append((r.qn.n, r.qn.m, r.energy * u.energy_unit, w,
                         r.moment * u.moment_unit, cur, r.flags))
        meta = {"chemical_potential": mu, "magnetization": res.magnetization * u.moment_unit,
                "current": res.current * u.current_unit, "ties": res.ties}
        return Result(header, rows, meta=meta)
    value = res.magnetization * u.moment_unit if quantity == "magnetization" else res.current * u.current_unit
    header = ("electrons", "temperature", "chemical_potential", quantity, "ties")
    temperature = cfg.ensemble.temperature * u.energy_unit
    return Result(header, [(cfg.ensemble.electrons, temperature, mu, value, res.ties)])


def _validate(cfg: RunConfig) -> Result:
    max_states = cfg.max_states or (None if cfg.m_window else DEFAULT_VALIDATE_STATES)
    table = enumerate_states(cfg.params, cfg.m_window, cfg.bound_policy, max_states, cfg.n_cap)
    if table.is_empty:
        raise EmptySpectrumError("no states to validate")
    report = validate(cfg.params, [r.qn for r in table.records], cfg.tolerance, cfg.grid)
    s = report.summary
    code = EXIT_OK
    if s["max_rel_err_half"] >= cfg.tolerance and s["max_rel_err_full"] >= cfg.tolerance:
        code = EXIT_VALIDATION
    header = ("n", "m", "E_closed_half", "E_closed_full", "E_oracle", "rel_err_half",
              "rel_err_full", "flags")
    rows = [(r.qn.n, r.qn.m, r.E_closed_half, r.E_closed_full, r.E_oracle,
             r.rel_err_half, r.rel_err_full, r.flags) for r in report.rows]
    return Result(header, rows, code, {"report": report})


_RUNNERS = {
    "spectrum": _spectrum,
    "potential": _potential,
    "wavefunction": _wavefunction,
    "magnetization": lambda cfg: _ensemble(cfg, "magnetization"),
    "current": lambda cfg: _ensemble(cfg, "current"),
    "validate": _validate,
}


def _point_config(cfg: RunConfig, value: float) -> RunConfig:
    from dataclasses import replace

    units = cfg.units
    if cfg.sweep.parameter == "b":
        params = cfg.params.replace(b=value / units.field_unit)
    elif cfg.sweep.parameter == "flux":
        params = cfg.params.replace(nu=value)
    else:
        params = cfg.params.replace(a=value / units.length_unit)
    return replace(cfg, command=cfg.sweep.of, params=params, sweep=None)


def _sweep_point(args) -> Result:
    cfg, value = args
    point = _point_config(cfg, value)
    return _RUNNERS[point.command](point)


def _sweep(cfg: RunConfig) -> Result:
    values = [float(v) for v in cfg.sweep.values()]
    jobs = [(cfg, v) for v in values]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    name = cfg.sweep.parameter
    rows = []
    code = EXIT_OK
    for value, res in zip(values, results):
        rows += [(value,) + tuple(row) for row in res.rows]
        code = max(code, res.exit_code)
    return Result((name,) + tuple(results[0].header), rows, code)


def execute(cfg: RunConfig) -> Result:
    if cfg.command == "sweep":
        return _sweep(cfg)
    return _RUNNERS[cfg.command](cfg)


def render(cfg: RunConfig, result: Result) -> bytes:
    if cfg.command == "validate" and cfg.format == "json":
        return (result.meta["report"].to_json() + "\n").encode("utf-8")
    if cfg.format == "json":
        meta = {k: v for k, v in result.meta.items() if k != "report"}
        meta["params"] = cfg.params.to_dict()
        return write_json(result.header, result.rows, meta)
    return write_csv(result.header, result.rows)


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout.buffer
    try:
        result = execute(cfg)
    except (InsufficientStatesError, WindowTooSmallError, EmptySpectrumError) as exc:
        print(f"sphring: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ModelError as exc:
        print(f"sphring: {exc}", file=sys.stderr)
        return EXIT_USAGE
    data = render(cfg, result)
    try:
        if cfg.output:
            with open(cfg.output, "wb") as fh:
                fh.write(data)
        else:
            stdout.write(data)
            stdout.flush()
    except OSError as exc:
        print(f"sphring: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if result.exit_code == EXIT_EMPTY:
        print("sphring: no bound states under the chosen policy", file=sys.stderr)
    return result.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"sphring: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
