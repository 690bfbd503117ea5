"""Run orchestration: config loading, per-mode execution, parameter sweeps and table output."""
import csv
import io
import itertools
import json
import logging
import math
import sys
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from . import cavity, dark_states, markov, mps
from .errors import ConfigError, DegenerateSteadyStateError, ParameterError
from .models import OutputOptions, RunConfig, RunResult, SystemParams
from .operators import kron, projector
from .parallel import parallel_map

logger = logging.getLogger(__name__)

STEADY_COLUMNS = [
    "omega",
    "delta_phi",
    "delta1",
    "delta2",
    "gamma_loss",
    "eta",
    "purity",
    "pop_g",
    "pop_S",
    "pop_T",
    "emission_rate",
    "H_expectation",
]
STEADY_OBSERVABLES = STEADY_COLUMNS[6:]
EVOLVE_COLUMNS = ["t", "pop_g", "pop_e1", "pop_e2", "pop_S", "pop_T", "purity", "emission_rate"]
MPS_COLUMNS = list(mps.TimeBinRun.COLUMNS)
CAVITY_COLUMNS = [
    "g",
    "kappa",
    "kappa_loss",
    "gamma_eff",
    "trace_distance",
    "gamma_fit",
    "relative_rate_error",
    "cutoff_population",
    "purity_full",
    "purity_adiabatic",
]
DARK_CURVE_COLUMNS = ["delta", "delta_phi", "omega_dark"]
MPS_SWEEP_OBSERVABLES = ["purity", "flux_in_loop", "flux_emitted", "flux_lost", "max_bond_dim"]


# ==============================================================
#  Config Loading
# ==============================================================
def _validation_diagnostics(e: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]


def parse_config(text: str, source: str = "<config>", mode: Optional[str] = None) -> RunConfig:
    """Parse a JSON run configuration; ``mode`` fills in or must match the file's mode."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source} is not valid JSON", [f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{source} must hold a JSON object")

    if mode is not None:
        if raw.setdefault("mode", mode) != mode:
            raise ConfigError(f"{source} declares mode '{raw['mode']}' but '{mode}' was requested")
    try:
        return RunConfig(**raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid run configuration in {source}", _validation_diagnostics(e)) from e


def load_config(path: str, mode: Optional[str] = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    return parse_config(text, source=path, mode=mode)


def columns_for(config: RunConfig) -> List[str]:
    if config.mode == "steady":
        return list(STEADY_COLUMNS)
    if config.mode == "evolve":
        return list(EVOLVE_COLUMNS)
    if config.mode == "mps":
        return list(MPS_COLUMNS)
    if config.mode == "cavity":
        return list(CAVITY_COLUMNS)
    if config.mode == "dark-curve":
        return list(DARK_CURVE_COLUMNS)
    axes = [axis.name for axis in config.grid]
    if config.engine == "mps":
        return axes + MPS_SWEEP_OBSERVABLES
    return axes + list(STEADY_COLUMNS)


# ==============================================================
#  Single Runs
# ==============================================================
def _model_for(config: RunConfig, p: SystemParams) -> markov.LindbladModel:
    if config.model == "dimer":
        return markov.build_dimer_model(p.omega, p.gamma, p.delta1, p.delta2, p.delta_phi)
    return markov.build_v_atom_model(p)


def _dimer_initial(label: str, delta_phi: float) -> np.ndarray:
    g, e = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    eg, ge = kron(g, e), kron(e, g)
    w = np.exp(-1j * delta_phi)
    kets = {
        "g": kron(g, g),
        "e1": eg,
        "e2": ge,
        "S": (eg - w * ge) / math.sqrt(2.0),
        "T": (eg + w * ge) / math.sqrt(2.0),
    }
    return projector(kets[label])


def _steady_row(config: RunConfig, p: SystemParams) -> List[float]:
    params = [p.omega, p.delta_phi, p.delta1, p.delta2, p.gamma_loss, p.eta]
    model = _model_for(config, p)
    try:
        rho = markov.steady_state(markov.vectorize(model))
    except DegenerateSteadyStateError as e:
        logger.warning(f"Degenerate steady state at {p.model_dump()}: {e}")
        return params + [math.nan] * len(STEADY_OBSERVABLES)
    obs = markov.observables(rho, model)
    return params + [obs[name] for name in STEADY_OBSERVABLES]


def _evolve_rows(config: RunConfig) -> Tuple[List[List[float]], List[str]]:
    p = config.params
    model = _model_for(config, p)
    if config.model == "dimer":
        rho0 = _dimer_initial(config.initial_state, p.delta_phi)
    else:
        rho0 = markov.initial_state(config.initial_state, p.delta_phi)
    t_final = config.steps.t_final or markov.default_horizon(p)
    traj = markov.evolve(model, rho0, t_final, config.steps.dt, config.steps.method, config.steps.sample_every)

    rows = []
    for t, rho in traj:
        obs = markov.observables(rho, model)
        pops = np.real(np.diag(rho))
        if config.model == "dimer":
            # atom 1 excited: n1 = 1 -> indices 1, 3; atom 2 excited: indices 2, 3
            pop_e1, pop_e2 = pops[1] + pops[3], pops[2] + pops[3]
        else:
            pop_e1, pop_e2 = pops[1], pops[2]
        rows.append(
            [float(t), obs["pop_g"], float(pop_e1), float(pop_e2), obs["pop_S"], obs["pop_T"], obs["purity"], obs["emission_rate"]]
        )
    return rows, list(traj.warnings)


def _mps_point(task: Tuple[RunConfig, SystemParams]) -> List[float]:
    config, p = task
    return mps.steady_point(p, config.time_bins)


def _steady_point(task: Tuple[RunConfig, SystemParams]) -> List[float]:
    config, p = task
    return _steady_row(config, p)


def grid_points(config: RunConfig) -> List[Tuple[Tuple[float, ...], SystemParams]]:
    """Cartesian product of the grid axes in row-major order (first axis outermost)."""
    names = [axis.name for axis in config.grid]
    points = []
    for values in itertools.product(*(axis.grid() for axis in config.grid)):
        update = dict(zip(names, (float(v) for v in values)))
        try:
            p = SystemParams(**{**config.params.model_dump(), **update})
        except ValidationError as e:
            raise ConfigError(f"Grid point {update} is not a valid parameter set", _validation_diagnostics(e)) from e
        points.append((tuple(update[n] for n in names), p))
    return points


def _sweep_rows(config: RunConfig, threads: int) -> Tuple[List[List[float]], List[str]]:
    points = grid_points(config)
    logger.info(f"Sweep over {len(points)} point(s) with the {config.engine} engine")
    worker = _mps_point if config.engine == "mps" else _steady_point
    results = parallel_map(worker, [(config, p) for _, p in points], threads)

    rows, warnings = [], []
    for (axis_values, _), result in zip(points, results):
        if any(isinstance(v, float) and math.isnan(v) for v in result):
            warnings.append(f"degenerate steady state at {dict(zip([a.name for a in config.grid], axis_values))}")
        rows.append(list(axis_values) + list(result))
    return rows, warnings


def _cavity_rows(config: RunConfig) -> Tuple[List[List[float]], List[str]]:
    c = config.cavity
    report = cavity.verify_adiabatic_limit(config.params, c)
    row = [
        c.g,
        c.kappa,
        c.kappa_loss,
        report.gamma_eff,
        report.trace_distance,
        report.gamma_fit,
        report.relative_rate_error,
        report.cutoff_population,
        report.purity_full,
        report.purity_adiabatic,
    ]
    return [row], list(report.warnings)


def _dark_curve_rows(config: RunConfig) -> List[List[Optional[float]]]:
    p = config.params
    if p.delta1 != p.delta2:
        raise ConfigError("dark-curve needs equal detunings", [f"params.delta1={p.delta1}, params.delta2={p.delta2}"])
    phases = config.grid[0].grid() if config.grid else np.linspace(-math.pi, math.pi, 181)
    return [[d, phi, omega] for d, phi, omega in dark_states.dark_curve(p.delta1, phases, p.gamma)]


def run_config(config: RunConfig, threads: int = 1) -> RunResult:
    """Execute one run configuration; rows follow the column set of its mode."""
    warnings: List[str] = []
    if config.mode == "steady":
        rows = [_steady_row(config, config.params)]
    elif config.mode == "evolve":
        rows, warnings = _evolve_rows(config)
    elif config.mode == "mps":
        p = config.params
        psi = markov.initial_ket(config.initial_state, p.delta_phi)
        result = mps.run(p, config.time_bins, atom_state=psi)
        rows, warnings = result.rows(), list(result.warnings)
    elif config.mode == "cavity":
        rows, warnings = _cavity_rows(config)
    elif config.mode == "dark-curve":
        rows = _dark_curve_rows(config)
    elif config.mode == "sweep":
        rows, warnings = _sweep_rows(config, threads)
    else:
        raise ParameterError(f"unknown mode '{config.mode}'")

    logger.info(f"Run finished: mode={config.mode}, rows={len(rows)}, warnings={len(warnings)}")
    return RunResult(mode=config.mode, columns=columns_for(config), rows=rows, warnings=warnings)


# ==============================================================
#  Output
# ==============================================================
def format_result(result: RunResult, fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow(["" if v is None else repr(float(v)) for v in row])
    elif fmt == "jsonl":
        for row in result.json_rows():
            buf.write(json.dumps(dict(zip(result.columns, row))) + "\n")
    else:
        raise ConfigError(f"Unknown output format '{fmt}' (expected csv or jsonl)")
    return buf.getvalue()


def write_result(result: RunResult, output: OutputOptions) -> Optional[str]:
    """Write to ``output.path`` or stdout; returns the path written, if any."""
    text = format_result(result, output.format)
    if output.path is None:
        sys.stdout.write(text)
        return None
    with open(output.path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {len(result.rows)} row(s) to {output.path}")
    return output.path
