"""Command-line harness for the gate experiments.

Usage::

    qdcavity <experiment> --config run.json [--model analytic|effective|full]
             [--strict] [--out path] [--format json|csv]

The configuration is a flat JSON object. Energies are in meV and times in
ps. Sweeps are given either as a list or as a ``"start,stop,count"``
string. Every run writes its data file and a ``<out>.manifest.json``
sidecar holding the config echo, integrator settings, the photon-cutoff
guard and wall-clock timings.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .gates import (
    FIDELITY_MODES,
    GateRunConfig,
    ThermalState,
    decoherence_scan,
    pair_params,
    run_cz,
    run_parallel,
    single_qubit_report,
)
from .params import DEFAULT_THRESHOLD, HBAR_MEV_PS, check_approximations, convert_time
from .propagation import ConvergenceError
from .schedule import InfeasibleScheduleError, solve_schedule
from .output import OutputError, Table, write_manifest, write_output

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STRICT = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

EXPERIMENTS = ("params", "truth-table", "photon-sweep", "compare", "parallel",
               "decoherence", "single-qubit")
MODEL_ALIASES = {
    "analytic": "analytic",
    "effective": "effective_numeric",
    "effective_numeric": "effective_numeric",
    "effective_pm": "effective_pm",
    "full": "full_numeric",
    "full_numeric": "full_numeric",
}
GUARD_EXTRA_PHOTONS = 4
GUARD_TOLERANCE = 1e-8

REQUIRED_KEYS = ("omega1", "omega2", "omega3", "delta1", "delta2", "k")
# key -> (default, kind)
OPTIONAL_KEYS = {
    "photon_cutoff": (6, "int"),
    "model_level": (None, "str"),
    "fidelity_mode": ("local_z", "str"),
    "cavity_n": (0, "int"),
    "mean_photon": (None, "float"),
    "photon_sweep": ("0,4,5", "ladder"),
    "kappa_ladder": ([0.0, HBAR_MEV_PS / 80, HBAR_MEV_PS / 40, HBAR_MEV_PS / 20,
                      HBAR_MEV_PS / 10], "ladder"),
    "separation_ratios": ([1 / 3, 2 / 3, 4 / 3, 8 / 3, 16 / 3], "ladder"),
    "parallel_time_ps": (None, "float"),
    "dot": (0, "int"),
    "approximation_threshold": (DEFAULT_THRESHOLD, "float"),
    "effective_steps_per_period": (2000, "int"),
    "full_steps_per_period": (160, "int"),
    "lindblad_steps_per_period": (2000, "int"),
    "fock_padding": (16, "int"),
    "scheme": ("commutator_free_4", "str"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    omega1: float
    omega2: float
    omega3: float
    delta1: float
    delta2: float
    k: int
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def echo(self):
        out = {key: getattr(self, key) for key in REQUIRED_KEYS}
        out.update(self.values)
        return out

    def run_config(self, cutoff=None):
        return GateRunConfig(
            fidelity_mode=self.fidelity_mode,
            effective_steps_per_period=self.effective_steps_per_period,
            full_steps_per_period=self.full_steps_per_period,
            lindblad_steps_per_period=self.lindblad_steps_per_period,
            scheme=self.scheme,
            fock_padding=self.fock_padding,
            photon_cutoff=self.photon_cutoff if cutoff is None else cutoff,
        )


def expand_ladder(value):
    """Turn a list or a ``"start,stop,count"`` string into a list of floats."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 3:
            raise ValueError("expected 'start,stop,count'")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("count must be at least 1")
        return [float(x) for x in np.linspace(start, stop, count)]
    if isinstance(value, (list, tuple)) and value:
        return [float(x) for x in value]
    raise ValueError("expected a non-empty list or 'start,stop,count'")


def _coerce(key, value, kind):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ValueError(f"{key} must be an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{key} must be a number")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"{key} must be a string")
        return value
    try:
        return expand_ladder(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{key}: {exc}") from None


def validate_config(raw):
    """Check a decoded config mapping; collects all problems before raising."""
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errors = []
    for key in raw:
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            errors.append(f"unknown key {key!r}")
    for key in REQUIRED_KEYS:
        if key not in raw:
            errors.append(f"missing required key {key!r}")
    parsed = {}
    for key in REQUIRED_KEYS:
        if key in raw:
            try:
                parsed[key] = _coerce(key, raw[key], "int" if key == "k" else "float")
            except ValueError as exc:
                errors.append(str(exc))
    values = {}
    for key, (default, kind) in OPTIONAL_KEYS.items():
        if key in raw and raw[key] is not None:
            try:
                values[key] = _coerce(key, raw[key], kind)
            except ValueError as exc:
                errors.append(str(exc))
        else:
            values[key] = expand_ladder(default) if kind == "ladder" else default

    for key in ("omega1", "omega2", "omega3", "delta1", "delta2"):
        if key in parsed and not parsed[key] > 0:
            errors.append(f"{key} must be positive")
    if "k" in parsed and parsed["k"] < 0:
        errors.append("k must be a non-negative integer")
    if "delta1" in parsed and "delta2" in parsed and parsed["delta1"] == parsed["delta2"]:
        errors.append("delta1 must differ from delta2")
    if values["photon_cutoff"] < 2:
        errors.append("photon_cutoff must be at least 2")
    if values["model_level"] is not None and values["model_level"] not in MODEL_ALIASES:
        errors.append(f"model_level must be one of {sorted(set(MODEL_ALIASES))}")
    if values["fidelity_mode"] not in FIDELITY_MODES:
        errors.append(f"fidelity_mode must be one of {list(FIDELITY_MODES)}")
    if not 0 <= values["cavity_n"] <= values["photon_cutoff"]:
        errors.append("cavity_n must lie between 0 and photon_cutoff")
    if values["mean_photon"] is not None and values["mean_photon"] < 0:
        errors.append("mean_photon must be non-negative")
    sweep = values["photon_sweep"]
    if isinstance(sweep, list):
        if any(n != int(n) or n < 0 or n > values["photon_cutoff"] for n in sweep):
            errors.append("photon_sweep entries must be integers within 0..photon_cutoff")
        else:
            values["photon_sweep"] = [int(n) for n in sweep]
    if isinstance(values["kappa_ladder"], list) and any(k < 0 for k in values["kappa_ladder"]):
        errors.append("kappa_ladder entries must be non-negative")
    if isinstance(values["separation_ratios"], list) and any(
        r <= 0 for r in values["separation_ratios"]
    ):
        errors.append("separation_ratios entries must be positive")
    for key in ("effective_steps_per_period", "full_steps_per_period",
                "lindblad_steps_per_period"):
        if values[key] < 1:
            errors.append(f"{key} must be positive")
    if values["fock_padding"] < 0:
        errors.append("fock_padding must be non-negative")
    if values["dot"] not in (0, 1):
        errors.append("dot must be 0 or 1")
    if values["parallel_time_ps"] is not None and not values["parallel_time_ps"] > 0:
        errors.append("parallel_time_ps must be positive")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**parsed, values=values)


def parse_config(path):
    """Read and validate a flat JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror or exc}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON in {path}: {exc}"]) from None
    return validate_config(raw)


def make_schedule(cfg: ExperimentConfig, cutoff=None):
    return solve_schedule(
        cfg.omega1, cfg.omega2, cfg.omega3, cfg.delta1, cfg.delta2, cfg.k,
        photon_cutoff=cfg.photon_cutoff if cutoff is None else cutoff,
    )


def _model(cfg, default):
    return MODEL_ALIASES[cfg.model_level or default]


def _schedule_summary(schedule):
    return {
        "dot_pair": list(schedule.dot_pair),
        "k": schedule.k,
        "g_required_mev": schedule.g_required,
        "delta_mev": schedule.delta_solved,
        "a_coupling_mev": schedule.couplings.a_coupling,
        "b_coupling_mev": schedule.couplings.b_coupling,
        "t_gate_natural": schedule.t_gate_natural,
        "t_gate_ps": schedule.t_gate_ps,
        "residuals": schedule.residuals(),
    }


# Each experiment returns (report, guard values). The guard values are
# recomputed with a larger photon cutoff and must not move.

def exp_params(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    approx = check_approximations(pair_params(schedule), cfg.approximation_threshold)
    report = {
        "schedule": _schedule_summary(schedule),
        "approximations": {
            "threshold": approx.threshold,
            "ok": approx.ok,
            "entries": [
                {"condition": e.condition, "small": e.small_value, "large": e.large_value,
                 "ratio": e.ratio, "status": e.status}
                for e in approx.entries
            ],
        },
    }
    return report, None


def exp_truth_table(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    level = _model(cfg, "analytic")
    state = ThermalState(cfg.mean_photon) if cfg.mean_photon is not None else cfg.cavity_n
    r = run_cz(schedule, level, state, cfg.run_config(cutoff))
    report = {
        "model_level": level,
        "fidelity_mode": r.fidelity_mode,
        "cavity_state": ({"mean_photon": cfg.mean_photon} if cfg.mean_photon is not None
                         else {"fock": cfg.cavity_n}),
        "basis": ["++", "+-", "-+", "--"],
        "phases": list(r.truth_table_phases),
        "fidelity": r.avg_fidelity,
        "leakage": r.leakage,
        "t_gate_ps": r.t_gate_ps,
    }
    return report, [r.avg_fidelity, r.leakage]


def exp_photon_sweep(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    level = _model(cfg, "analytic")
    ns = sorted({int(round(n)) for n in cfg.photon_sweep})
    if ns[-1] > cutoff:
        raise ConfigError([f"photon_sweep reaches {ns[-1]} above photon_cutoff {cutoff}"])
    r = run_cz(schedule, level, ns[0], cfg.run_config(cutoff), sectors=ns)
    rows = []
    for n in ns:
        u = r.sector_unitaries[n]
        rows.append((n, r.sector_fidelities[n], r.sector_leakage[n], complex(u[0, 0]),
                     complex(u[3, 3])))
    table = Table(
        ("n", "fidelity", "leakage", "phase_pp_re", "phase_pp_im", "phase_mm_re", "phase_mm_im"),
        rows,
        {"model_level": level, "fidelity_mode": r.fidelity_mode,
         "photon_spread": r.photon_spread},
    )
    guard = [v for row in rows for v in (row[1], row[2])]
    return table, guard


def exp_compare(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    level = _model(cfg, "full")
    if level == "analytic":
        level = "full_numeric"
    run_cfg = cfg.run_config(cutoff)
    ref = run_cz(schedule, "analytic", cfg.cavity_n, run_cfg)
    num = run_cz(schedule, level, cfg.cavity_n, run_cfg)
    report = {
        "model_level": level,
        "fidelity_mode": num.fidelity_mode,
        "analytic_fidelity": ref.avg_fidelity,
        "numeric_fidelity": num.avg_fidelity,
        "numeric_leakage": num.leakage,
        "valence_population": num.valence_population,
        "local_z_phases": list(num.local_z_phases.get(cfg.cavity_n, ())),
        "numeric_phases": list(num.truth_table_phases),
    }
    return report, [num.avg_fidelity, num.leakage]


def exp_parallel(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    da = schedule.delta_solved
    base = schedule.params
    t = None if cfg.parallel_time_ps is None else convert_time(cfg.parallel_time_ps, "ps->natural")
    run_cfg = cfg.run_config(cutoff)
    rows = []
    for ratio in cfg.separation_ratios:
        db = da * (1 + ratio)
        p4 = base.replace(n_dots=4, delta=(da, da, db, db), photon_cutoff=cutoff)
        rep = run_parallel(p4, (0, 1), (2, 3), t, run_cfg)
        rows.append((db - da, rep.crosstalk_error))
    p4 = base.replace(n_dots=4, delta=(da, da, 2 * da, 2 * da), photon_cutoff=cutoff)
    idle = run_parallel(p4, (0, 1), (2, 3), t, run_cfg, drive_b=False)
    table = Table(
        ("delta_separation_mev", "crosstalk_error"),
        rows,
        {"delta_a_mev": da,
         "time_ps": convert_time(t if t is not None else schedule.t_gate_natural),
         "spectator_deviation": idle.spectator_deviation},
    )
    return table, [r[1] for r in rows]


def exp_decoherence(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    points = decoherence_scan(schedule, cfg.kappa_ladder, cfg.run_config(cutoff))
    rows = [(p.kappa, p.fidelity, p.tau_eff_ps, p.coherence) for p in points]
    table = Table(("kappa_mev", "fidelity", "tau_eff_ps", "coherence"), rows,
                  {"t_gate_ps": schedule.t_gate_ps})
    return table, [p.fidelity for p in points]


def exp_single_qubit(cfg, cutoff):
    schedule = make_schedule(cfg, cutoff)
    rep = single_qubit_report(schedule.params, cfg.dot)
    report = {
        "dot": cfg.dot,
        "not_time_ps": rep.not_time_ps,
        "half_not_time_ps": rep.half_time_ps,
        "basis": ["up", "down"],
        "not_unitary": rep.not_unitary,
        "half_not_unitary": rep.half_unitary,
    }
    return report, None


RUNNERS = {
    "params": exp_params,
    "truth-table": exp_truth_table,
    "photon-sweep": exp_photon_sweep,
    "compare": exp_compare,
    "parallel": exp_parallel,
    "decoherence": exp_decoherence,
    "single-qubit": exp_single_qubit,
}


def cutoff_guard(name, cfg, guard_values):
    """Re-run at a larger photon cutoff and report the largest drift."""
    if guard_values is None:
        return {"applicable": False, "passed": True}
    bigger = cfg.photon_cutoff + GUARD_EXTRA_PHOTONS
    _, again = RUNNERS[name](cfg, bigger)
    drift = float(np.max(np.abs(np.asarray(guard_values) - np.asarray(again))))
    return {
        "applicable": True,
        "cutoff": cfg.photon_cutoff,
        "check_cutoff": bigger,
        "max_drift": drift,
        "tolerance": GUARD_TOLERANCE,
        "passed": bool(drift < GUARD_TOLERANCE),
    }


def run_experiment(name, cfg: ExperimentConfig, out, fmt="json", strict=False):
    """Run one experiment, write its data and manifest, and return an exit code."""
    if name not in RUNNERS:
        raise ConfigError([f"unknown experiment {name!r}"])
    try:
        schedule = make_schedule(cfg)
    except InfeasibleScheduleError as exc:
        raise ConfigError([str(exc)]) from None
    approx = check_approximations(pair_params(schedule), cfg.approximation_threshold)
    warnings = [e.condition for e in approx.warnings]
    if strict and warnings:
        for w in warnings:
            print(f"approximation warning: {w}", file=sys.stderr)
        return EXIT_STRICT

    start = time.perf_counter()
    report, guard_values = RUNNERS[name](cfg, cfg.photon_cutoff)
    run_seconds = time.perf_counter() - start
    start = time.perf_counter()
    guard = cutoff_guard(name, cfg, guard_values)
    guard_seconds = time.perf_counter() - start

    manifest = {
        "experiment": name,
        "artifact_version": __version__,
        "config": cfg.echo(),
        "output_format": fmt,
        "integrator": {
            "scheme": cfg.scheme,
            "effective_steps_per_period": cfg.effective_steps_per_period,
            "full_steps_per_period": cfg.full_steps_per_period,
            "lindblad_steps_per_period": cfg.lindblad_steps_per_period,
            "fock_padding": cfg.fock_padding,
        },
        "g_required_mev": schedule.g_required,
        "approximation_warnings": warnings,
        "cutoff_guard": guard,
        "wall_clock_s": {"experiment": run_seconds, "cutoff_guard": guard_seconds},
    }
    if not guard["passed"]:
        write_manifest(manifest, out)
        print(f"photon cutoff guard failed: drift {guard['max_drift']:.3g}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_output(report, fmt, out)
    write_manifest(manifest, out)
    for w in warnings:
        print(f"approximation warning: {w}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qdcavity",
        description="Cavity-mediated controlled-phase gate experiments on quantum-dot spins.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="flat JSON configuration file")
    parser.add_argument("--model", choices=("analytic", "effective", "full"),
                        help="model level (overrides model_level in the config)")
    parser.add_argument("--strict", action="store_true",
                        help="exit with code 2 if any approximation condition warns")
    parser.add_argument("--out", help="output path (default: <experiment>.<format>)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.model:
            cfg.values["model_level"] = args.model
        out = Path(args.out or f"{args.experiment}.{args.format}")
        return run_experiment(args.experiment, cfg, out, args.format, args.strict)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
