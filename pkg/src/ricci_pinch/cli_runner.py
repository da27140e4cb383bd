"""Command-line front end: flat configs in, CSV traces and exit codes out.

    ricci-pinch run CONFIG [--output PATH]
    ricci-pinch verdict TRACE.csv [--c1 V] [--c2 V] [--n N] [--epsilon E] [--tol T]

A config is a list of ``key=value`` tokens separated by whitespace or
newlines; ``#`` starts a comment. The output directory can be redirected
with ``RICCI_PINCH_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import flow_engine as fe
from . import geometry_catalog as gc
from . import pinching_monitor as pm
from .errors import InvalidConfig

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "RICCI_PINCH_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERDICT_FAIL = 2
EXIT_NUMERICAL = 3

CSV_HEADER = ",".join(pm.SAMPLE_FIELDS)


class UsageError(Exception):
    """Bad configuration or arguments; maps to exit code 1."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

SCENARIO_KEYS = {
    "round_sphere": {"n": int, "kappa": float},
    "product_spheres": {"p": int, "q": int, "r1sq": float, "r2sq": float},
    "homogeneous": {"group": str, "A": float, "B": float, "C": float},
    "neckpinch": {
        "n_fiber": int,
        "M": int,
        "profile": str,
        "neck_depth": float,
        "phi0": float,
        "gauge": str,
    },
}
SCENARIO_ALIASES = {"warped": "neckpinch", "space_form": "round_sphere"}

SCENARIO_DEFAULTS = {
    "round_sphere": {"n": 3, "kappa": 1.0},
    "product_spheres": {"p": 2, "q": 2, "r1sq": 1.0, "r2sq": 4.0},
    "homogeneous": {"group": "su2", "A": 1.0, "B": 1.0, "C": 0.5},
    "neckpinch": {"n_fiber": 3, "M": 400, "profile": "dumbbell", "neck_depth": 0.8, "phi0": float(np.pi), "gauge": "conformal"},
}

INTEGRATOR_KEYS = {
    "method": str,
    "dt": float,
    "dt_initial": float,
    "dt_safety": float,
    "t_max": float,
    "blowup_threshold": float,
    "tol_step": float,
    "sample_stride": int,
}
MONITOR_KEYS = {"c": float, "epsilon": float, "c1": float, "c2": float, "tol": float}
OTHER_KEYS = {"output": str, "output_path": str}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    params: dict
    integrator: fe.IntegratorConfig
    monitor: pm.MonitorConfig
    output_path: str
    sample_stride: int = 1
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def build_state(self):
        return build_state(self.scenario, self.params)


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for tok in line.split():
            yield lineno, tok


def _convert(key: str, raw: str, kind, lineno: int):
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return kind(raw)
    except ValueError:
        raise UsageError(f"line {lineno}: {key}={raw!r} is not a valid {kind.__name__}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat ``key=value`` run configuration."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, tok in _tokens(text):
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            raise UsageError(f"line {lineno}: expected key=value, got {tok!r}")
        if key in raw:
            raise UsageError(f"line {lineno}: duplicate key {key!r} (first on line {raw[key][1]})")
        raw[key] = (value, lineno)

    if "scenario" not in raw:
        raise UsageError("missing required key 'scenario'")
    scenario, sc_line = raw.pop("scenario")
    scenario = SCENARIO_ALIASES.get(scenario, scenario)
    if scenario not in SCENARIO_KEYS:
        raise UsageError(f"line {sc_line}: unknown scenario {scenario!r}; expected one of {sorted(SCENARIO_KEYS)}")

    allowed = {**SCENARIO_KEYS[scenario], **INTEGRATOR_KEYS, **MONITOR_KEYS, **OTHER_KEYS}
    values = {}
    for key, (value, lineno) in raw.items():
        if key not in allowed:
            raise UsageError(f"line {lineno}: unknown key {key!r} for scenario {scenario}")
        values[key] = _convert(key, value, allowed[key], lineno)
    line_of = {k: v[1] for k, v in raw.items()}
    line_of["scenario"] = sc_line

    def fail(key, msg):
        where = f"line {line_of[key]}: " if key in line_of else ""
        raise UsageError(f"{where}{key}: {msg}")

    if "dt" in values and "dt_initial" in values:
        fail("dt", "give either dt or dt_initial, not both")
    if "output" in values and "output_path" in values:
        fail("output", "give either output or output_path, not both")

    params = dict(SCENARIO_DEFAULTS[scenario])
    params.update({k: values[k] for k in SCENARIO_KEYS[scenario] if k in values})

    integ_kwargs = {k: values[k] for k in INTEGRATOR_KEYS if k in values and k != "dt"}
    if "dt" in values:
        integ_kwargs["dt_initial"] = values["dt"]
    try:
        integrator = fe.IntegratorConfig(**integ_kwargs)
    except InvalidConfig as exc:
        bad = next((k for k in ("dt", *integ_kwargs) if k in line_of and k in str(exc)), "integrator")
        fail(bad, str(exc))

    mon_kwargs = {}
    for key, target in (("c", "c_override"), ("epsilon", "epsilon"), ("c1", "c1"), ("c2", "c2"), ("tol", "tolerance_rel")):
        if key in values:
            mon_kwargs[target] = values[key]
    try:
        monitor = pm.MonitorConfig(**mon_kwargs)
    except InvalidConfig as exc:
        bad = next((k for k in ("c", "epsilon", "c1", "c2", "tol") if k in line_of and k in str(exc).split()[0]), "monitor")
        fail(bad, str(exc))

    try:
        build_state(scenario, params)
    except (ValueError, TypeError) as exc:
        bad = next((k for k in SCENARIO_KEYS[scenario] if k in line_of and k in str(exc)), None)
        if bad is None:
            bad = next((k for k in SCENARIO_KEYS[scenario] if k in line_of), "scenario")
        fail(bad, str(exc))

    output = values.get("output", values.get("output_path", f"{scenario}.csv"))
    return RunConfig(
        scenario=scenario,
        params=params,
        integrator=integrator,
        monitor=monitor,
        output_path=output,
        sample_stride=integrator.sample_stride,
        lines=line_of,
    )


def build_state(scenario: str, params: dict):
    """Initial state for a scenario tag; raises ``ValueError`` subclasses on bad parameters."""
    p = params
    if scenario == "round_sphere":
        if p["n"] < 3:
            raise InvalidConfig(f"n must be >= 3 for the curvature decomposition, got n = {p['n']}")
        if p["n"] > 8:
            raise InvalidConfig(f"n must be <= 8, got n = {p['n']}")
        if not p["kappa"] > 0:
            raise InvalidConfig(f"kappa must be positive, got {p['kappa']}")
        return gc.SpaceFormState.from_kappa(p["n"], p["kappa"])
    if scenario == "product_spheres":
        if p["p"] + p["q"] > 8:
            raise InvalidConfig("p + q must be <= 8")
        state = gc.ProductSphereState(p["p"], p["q"], p["r1sq"], p["r2sq"])
        gc.check_state(state)
        return state
    if scenario == "homogeneous":
        state = gc.HomogeneousState.named(p["group"], p["A"], p["B"], p["C"])
        gc.check_state(state)
        return state
    if scenario == "neckpinch":
        if p["n_fiber"] < 2 or p["n_fiber"] > 7:
            raise InvalidConfig(f"n_fiber must be between 2 and 7, got {p['n_fiber']}")
        if p["M"] < 8 or p["M"] % 2:
            raise InvalidConfig(f"M must be an even integer >= 8, got {p['M']}")
        if p["gauge"] not in ("conformal", "direct"):
            raise InvalidConfig(f"gauge must be 'conformal' or 'direct', got {p['gauge']!r}")
        if p["profile"] == "round":
            return gc.round_warped(p["n_fiber"], p["M"])
        if p["profile"] == "dumbbell":
            if not 0 <= p["neck_depth"] < 1:
                raise InvalidConfig(f"neck_depth must lie in [0, 1), got {p['neck_depth']}")
            return gc.dumbbell_warped(
                p["n_fiber"], p["M"], p["neck_depth"], p["phi0"], conformal=p["gauge"] == "conformal"
            )
        raise InvalidConfig(f"profile must be 'round' or 'dumbbell', got {p['profile']!r}")
    raise InvalidConfig(f"unknown scenario {scenario!r}")


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def resolve_output(path: str | os.PathLike) -> Path:
    base = os.environ.get(OUTPUT_DIR_ENV)
    path = Path(path)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _fmt(x: float) -> str:
    return repr(float(x)) if not np.isfinite(x) else f"{x:.17g}"


def write_trace(path: Path, samples) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for s in samples:
            fh.write(",".join(_fmt(getattr(s, f)) for f in pm.SAMPLE_FIELDS) + "\n")


def read_trace(path: str | os.PathLike) -> list[pm.PinchSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != CSV_HEADER:
            raise UsageError(f"{path}: header does not match {CSV_HEADER!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(pm.SAMPLE_FIELDS):
                raise UsageError(f"{path}:{lineno}: expected {len(pm.SAMPLE_FIELDS)} fields, got {len(row)}")
            rows.append(pm.PinchSample(*map(float, row)))
    return rows


def meta_path(trace_path: Path) -> Path:
    return trace_path.with_suffix(trace_path.suffix + ".meta.json")


def exit_code(verdicts, termination: fe.Termination | str | None) -> int:
    """0 when every sample passes, 2 on any failure, 3 on a numerical stop without failures."""
    if any(v == pm.Verdict.FAIL for v in verdicts):
        return EXIT_VERDICT_FAIL
    if termination is not None and fe.Termination(termination) in (fe.Termination.DEGENERATE, fe.Termination.UNDERFLOW):
        return EXIT_NUMERICAL
    return EXIT_OK


def summary_line(scenario: str, samples, verdicts, termination, t_final: float) -> str:
    margins = [s.margin for s in samples]
    n_pass = sum(v == pm.Verdict.PASS for v in verdicts)
    n_fail = len(verdicts) - n_pass
    term = fe.Termination(termination).value if termination is not None else "unknown"
    min_margin = min(margins) if margins else float("nan")
    return (
        f"{scenario}: termination={term} t_final={t_final:.6g} samples={len(samples)} "
        f"min_margin={min_margin:.6g} pass={n_pass} fail={n_fail}"
    )


def execute(config: RunConfig, out=None) -> int:
    """Run one scenario, write its trace and sidecar metadata, return the exit code."""
    out = out or sys.stdout
    path = resolve_output(config.output_path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w"):
            pass
    except OSError as exc:
        print(f"error: cannot write {path}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE

    state = config.build_state()
    trace = fe.run(state, config.integrator, config.monitor)
    write_trace(path, trace.samples)
    meta = {
        "scenario": config.scenario,
        "params": config.params,
        "integrator": asdict(config.integrator),
        "monitor": asdict(config.monitor),
        "n": trace.n,
        "c": trace.monitor.c,
        "c1": trace.monitor.alpha_sq,
        "c2": trace.monitor.gamma**2,
        "epsilon": trace.monitor.epsilon,
        "tolerance": trace.tolerance,
        "termination": trace.termination.value,
        "t_final": trace.t_final,
        "steps": trace.steps,
        "message": trace.message,
    }
    meta_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    verdicts = trace.verdicts
    print(summary_line(config.scenario, trace.samples, verdicts, trace.termination, trace.t_final), file=out)
    return exit_code(verdicts, trace.termination)


def reverdict(samples, n: int, c1: float | None, c2: float, epsilon: float, tol: float) -> list[pm.Verdict]:
    """Recompute the barrier from a saved trace and verdict every row.

    ``c`` is recovered from the first row as ``b_min - R_min`` and the
    initial ``phi_max`` from the first row, so with the run's own constants
    this reproduces the stored ``Phi`` column.
    """
    if not samples:
        return []
    first = samples[0]
    c = first.b_min - first.R_min
    config = pm.MonitorConfig(epsilon=epsilon, c1=c1, c2=c2)
    mstate = pm.MonitorState.create(n, c, first.phi_max, config)
    verdicts = []
    for s in samples:
        mstate, Phi = pm.barrier(mstate, s.W_max, s.b_min)
        recomputed = pm.PinchSample(**{**asdict(s), "Phi": Phi, "margin": Phi - s.phi_max})
        verdicts.append(pm.verdict(recomputed, tol))
    return verdicts


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ricci-pinch", description="Ricci flow pinching-estimate monitor")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config")
    run.add_argument("--output", help="override the config's output path")

    ver = sub.add_parser("verdict", help="re-verdict a saved trace")
    ver.add_argument("trace")
    ver.add_argument("--c1", type=float)
    ver.add_argument("--c2", type=float)
    ver.add_argument("--n", type=int)
    ver.add_argument("--epsilon", type=float)
    ver.add_argument("--tol", type=float)
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.output:
                config = RunConfig(**{**{f.name: getattr(config, f.name) for f in fields(config)}, "output_path": args.output})
            return execute(config)
        return _verdict_command(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _verdict_command(args) -> int:
    path = Path(args.trace)
    if not path.exists():
        raise UsageError(f"no such trace: {path}")
    samples = read_trace(path)
    meta = {}
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text())
    n = args.n if args.n is not None else meta.get("n")
    if n is None:
        raise UsageError("--n is required when the trace has no metadata file")
    c1 = args.c1 if args.c1 is not None else meta.get("c1")
    c2 = args.c2 if args.c2 is not None else meta.get("c2", pm.DEFAULT_C2)
    epsilon = args.epsilon if args.epsilon is not None else meta.get("epsilon", 1e-3)
    tol = args.tol if args.tol is not None else meta.get("tolerance", 1e-6)
    try:
        verdicts = reverdict(samples, n, c1, c2, epsilon, tol)
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    termination = meta.get("termination")
    t_final = meta.get("t_final", samples[-1].t if samples else 0.0)
    print(summary_line(meta.get("scenario", path.stem), samples, verdicts, termination, t_final))
    return exit_code(verdicts, termination)


if __name__ == "__main__":
    sys.exit(main())
