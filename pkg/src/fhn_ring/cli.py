"""Command-line entry point ``fhn``.

Usage::

    fhn constants|simulate|verify|sweep [--config PATH] [--out STEM] [--workers K]
        [--deterministic-names] [--section.key VALUE ...]

The config file is JSON with the sections ``model``, ``integ``, ``init``,
``sweep`` and ``verify`` plus the top-level keys ``command``, ``rho``,
``output_path`` and ``precision``.  Dotted flags override file values.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 integration failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import model as M
from .diagnostics import diagnostics_series, feedback_sum_identity_residual
from .integrate import IntegrationError, IntegratorConfig, Trajectory, convergence_order, integrate
from .sweep import RNG_NAME, SweepGrid, random_initial, resolve_workers, run_sweep

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_IO = 0, 1, 2, 3, 4

COMMANDS = ("constants", "simulate", "verify", "sweep")

MODEL_KEYS = {"n", "a", "b", "c", "delta", "p", "alpha", "lambda", "beta", "gamma"}
INTEG_KEYS = {f.name for f in dataclasses.fields(IntegratorConfig)}
INIT_KEYS = {"mode", "radius", "seed", "x0", "y0", "x", "y"}
SWEEP_KEYS = {"p_values", "a_values", "alpha_values", "n_values", "seeds", "init_radius"}
VERIFY_KEYS = {"samples", "envelope_samples", "seed"}
SECTIONS = {"model": MODEL_KEYS, "integ": INTEG_KEYS, "init": INIT_KEYS,
            "sweep": SWEEP_KEYS, "verify": VERIFY_KEYS}
TOP_KEYS = {"command", "rho", "output_path", "precision"} | set(SECTIONS)

ORDER_DTS = (0.02, 0.01, 0.005, 0.0025)
ORDER_BAND = (3.8, 4.2)
IDENTITY_TOL = 1e-12


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str
    model: M.ModelParams
    integ: IntegratorConfig
    init: Dict[str, Any] = field(default_factory=dict)
    sweep: Optional[SweepGrid] = None
    verify: Dict[str, Any] = field(default_factory=dict)
    rho: float = 100.0
    output_path: Optional[str] = None
    precision: int = 17


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(doc: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    if len(parts) == 1:
        if parts[0] not in TOP_KEYS or parts[0] in SECTIONS:
            raise ConfigError(dotted, "unknown key")
        doc[parts[0]] = value
    elif len(parts) == 2:
        section, key = parts
        if section not in SECTIONS:
            raise ConfigError(dotted, "unknown section")
        if key not in SECTIONS[section]:
            raise ConfigError(dotted, "unknown key")
        doc.setdefault(section, {})[key] = value
    else:
        raise ConfigError(dotted, "overrides take the form --section.key VALUE")


def _number(section: dict, key: str, where: str, kind=float):
    value = section[key]
    name = f"{where}.{key}" if where else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _numbers(section: dict, key: str, where: str, kind=float) -> list:
    values = section[key]
    if not isinstance(values, list):
        values = [values]
    return [_number({key: v}, key, where, kind) for v in values]


def _build_model(sec: dict) -> M.ModelParams:
    kwargs = {}
    for key in ("a", "b", "c", "delta", "p"):
        if key in sec:
            kwargs[key] = _number(sec, key, "model")
    if "n" in sec:
        kwargs["n"] = _number(sec, "n", "model", int)
    try:
        nl = M.CubicNonlinearity(_number(sec, "alpha", "model") if "alpha" in sec else 0.5)
    except M.ParameterError as exc:
        raise ConfigError("model.alpha", str(exc)) from None
    env = None
    overrides = {k: _number(sec, k, "model") for k in ("lambda", "beta", "gamma") if k in sec}
    if overrides:
        for key, value in overrides.items():
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"model.{key}", f"must be nonnegative and finite, got {value}")
        base = M.envelope_for_cubic(nl)
        env = M.AssumptionEnvelope.unchecked(
            overrides.get("lambda", base.lam), overrides.get("beta", base.beta),
            overrides.get("gamma", base.gamma))
    try:
        return M.ModelParams(nonlinearity=nl, envelope=env, **kwargs)
    except M.ParameterError as exc:
        key = str(exc).split()[0]
        raise ConfigError(f"model.{key}", str(exc)) from None


def _build_integ(sec: dict) -> IntegratorConfig:
    kwargs = {}
    for key in INTEG_KEYS & set(sec):
        if key == "method":
            kwargs[key] = sec[key]
        elif key == "sample_stride":
            kwargs[key] = _number(sec, key, "integ", int)
        else:
            kwargs[key] = _number(sec, key, "integ")
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(f"integ.{key}", str(exc)) from None


def _build_sweep(sec: dict, base: M.ModelParams, integ: IntegratorConfig) -> SweepGrid:
    kwargs = {
        "p_values": _numbers(sec, "p_values", "sweep") if "p_values" in sec else [base.p],
        "a_values": _numbers(sec, "a_values", "sweep") if "a_values" in sec else [base.a],
        "alpha_values": (_numbers(sec, "alpha_values", "sweep") if "alpha_values" in sec
                         else [base.alpha]),
        "n_values": _numbers(sec, "n_values", "sweep", int) if "n_values" in sec else [base.n],
        "seeds": _numbers(sec, "seeds", "sweep", int) if "seeds" in sec else [0],
    }
    for key in ("p_values", "a_values"):
        if any(not (v > 0) for v in kwargs[key]):
            raise ConfigError(f"sweep.{key}", "values must be positive")
    if any(not (0 < v < 1) for v in kwargs["alpha_values"]):
        raise ConfigError("sweep.alpha_values", "values must satisfy 0 < alpha < 1")
    if any(v < 4 for v in kwargs["n_values"]):
        raise ConfigError("sweep.n_values", "values must satisfy n >= 4")
    radius = _number(sec, "init_radius", "sweep") if "init_radius" in sec else 2.0
    try:
        return SweepGrid(base=base, init_radius=radius, integ=integ, **kwargs)
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None


def _check_init(sec: dict) -> dict:
    mode = sec.get("mode", "random")
    if mode not in ("random", "zero", "synchronized", "explicit"):
        raise ConfigError("init.mode", f"unknown mode {mode!r}")
    out = {"mode": mode}
    if "radius" in sec:
        out["radius"] = _number(sec, "radius", "init")
        if not out["radius"] > 0:
            raise ConfigError("init.radius", "must be positive")
    if "seed" in sec:
        out["seed"] = _number(sec, "seed", "init", int)
    for key in ("x0", "y0"):
        if key in sec:
            out[key] = _number(sec, key, "init")
    for key in ("x", "y"):
        if key in sec:
            out[key] = _numbers(sec, key, "init")
    if mode == "explicit" and not ("x" in out and "y" in out):
        raise ConfigError("init.x", "explicit mode needs both x and y")
    return out


def parse_config(text: Optional[str] = None, overrides: Optional[List[Tuple[str, Any]]] = None,
                 command: Optional[str] = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from a JSON document plus dotted overrides."""
    if text:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "top level must be an object")
    else:
        doc = {}
    for key, value in doc.items():
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key")
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "section must be an object")
            for sub in value:
                if sub not in SECTIONS[key]:
                    raise ConfigError(f"{key}.{sub}", "unknown key")
    for dotted, value in overrides or []:
        _apply_override(doc, dotted, value)
    if command is not None:
        doc["command"] = command
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}, got {cmd!r}")

    params = _build_model(doc.get("model", {}))
    integ = _build_integ(doc.get("integ", {}))
    grid = _build_sweep(doc.get("sweep", {}), params, integ) if cmd == "sweep" else None
    init = _check_init(doc.get("init", {}))
    if init["mode"] == "explicit" and (len(init["x"]) != params.n or len(init["y"]) != params.n):
        raise ConfigError("init.x", f"explicit state must have n={params.n} entries")
    verify = {}
    for key in VERIFY_KEYS & set(doc.get("verify", {})):
        verify[key] = _number(doc["verify"], key, "verify", int)
    rho = _number(doc, "rho", "") if "rho" in doc else 100.0
    if rho < 0:
        raise ConfigError("rho", "must be nonnegative")
    precision = _number(doc, "precision", "", int) if "precision" in doc else 17
    if not 1 <= precision <= 17:
        raise ConfigError("precision", "must lie in 1..17")
    out = doc.get("output_path")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_path", "must be a string")
    return RunConfig(cmd, params, integ, init, grid, verify, rho, out, precision)


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def fmt(value: float, precision: int = 17) -> str:
    return f"{float(value):.{precision}g}"


def _write_rows(path: Path, header: List[str], rows, footer: List[str] = ()) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    for line in footer:
        buf.write(f"# {line}\n")
    path.write_text(buf.getvalue(), newline="")


def initial_state(cfg: RunConfig) -> M.NetworkState:
    init, n = cfg.init, cfg.model.n
    mode = init.get("mode", "random")
    if mode == "zero":
        return M.NetworkState.zeros(n)
    if mode == "synchronized":
        return M.NetworkState.synchronized(n, init.get("x0", 0.5), init.get("y0", 0.0))
    if mode == "explicit":
        return M.NetworkState(init["x"], init["y"])
    return random_initial(n, init.get("radius", 2.0), init.get("seed", 0))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_constants(cfg: RunConfig, stem: Optional[Path] = None, out=None) -> int:
    out = out or sys.stdout
    k = M.derived_constants(cfg.model)
    rows = list(k.as_dict().items())
    rows.append((f"T_B(rho={fmt(cfg.rho, cfg.precision)})", M.absorbing_entry_time(cfg.rho, cfg.model)))
    text = ["quantity,value"] + [f"{name},{fmt(v, cfg.precision)}" for name, v in rows]
    out.write("\n".join(text) + "\n")
    if stem is not None:
        try:
            Path(f"{stem}_constants.csv").write_text("\n".join(text) + "\n", newline="")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, stem: Path, out=None) -> int:
    out = out or sys.stdout
    params = cfg.model
    init = initial_state(cfg)
    footer = []
    status = EXIT_OK
    try:
        traj = integrate(params, init, cfg.integ)
    except IntegrationError as exc:
        traj = exc.trajectory
        footer.append(f"integration failed: {exc}")
        status = EXIT_INTEGRATION
        if traj is None or len(traj) == 0:
            traj = Trajectory(np.zeros(1), init.x[None, :].copy(), init.y[None, :].copy(), 0)
    series = diagnostics_series(traj, params)
    prec = cfg.precision
    n = params.n
    state_header = ["t"] + [f"x_{i}" for i in range(1, n + 1)] + [f"y_{i}" for i in range(1, n + 1)]
    state_rows = ([fmt(t, prec)] + [fmt(v, prec) for v in x] + [fmt(v, prec) for v in y]
                  for t, x, y in zip(traj.times, traj.xs, traj.ys))
    diag_rows = ([fmt(v, prec) for v in row] for row in zip(
        series.times, series.plain_energy, series.weighted_energy, series.diff_energy,
        series.gap, series.bound))
    state_path = Path(f"{stem}_state.csv")
    diag_path = Path(f"{stem}_diag.csv")
    try:
        _write_rows(state_path, state_header, state_rows, footer)
        _write_rows(diag_path, ["t", "E_plain", "E_weighted", "D", "gap", "bound"], diag_rows, footer)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {state_path} and {diag_path} ({len(traj)} samples)", file=out)
    if footer:
        print(footer[0], file=sys.stderr)
    return status


def _identity_battery(kind: str, samples: int, seed: int, p: float):
    """Return ``(passed, worst ratio, first counterexample or None)``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(4, 65))
        scale = 10.0 ** rng.uniform(-3, 3)
        x = rng.standard_normal(n) * scale
        if kind == "divergence":
            residual = M.divergence_residual(x)
        else:
            residual = feedback_sum_identity_residual(M.NetworkState(x, np.zeros(n)), p)
        ratio = residual / (IDENTITY_TOL * (1.0 + float(np.dot(x, x))))
        worst = max(worst, ratio)
        if not ratio < 1.0:
            return False, worst, x
    return True, worst, None


def cmd_verify(cfg: RunConfig, out=None) -> int:
    """Run the identity, envelope and convergence batteries; exit 1 on any failure."""
    out = out or sys.stdout
    params = cfg.model
    samples = cfg.verify.get("samples", 10_000)
    env_samples = cfg.verify.get("envelope_samples", 100_000)
    seed = cfg.verify.get("seed", 0)
    failures = 0

    for kind in ("divergence", "feedback_sum"):
        ok, worst, counter = _identity_battery(kind, samples, seed, params.p)
        print(f"{'PASS' if ok else 'FAIL'} {kind}: {samples} vectors, "
              f"max residual/(tol*(1+|x|^2)) = {worst:.3g}", file=out)
        if not ok:
            failures += 1
            print(f"  counterexample x = {np.array2string(counter, precision=17)}", file=out)

    env = params.resolved_envelope()
    bad = M.verify_envelope(params.nonlinearity, env, -20.0, 20.0, env_samples)
    ok = bad.size == 0
    print(f"{'PASS' if ok else 'FAIL'} envelope: alpha={fmt(params.alpha, 6)} "
          f"lambda={fmt(env.lam, 6)} beta={fmt(env.beta, 6)} gamma={fmt(env.gamma, 6)}, "
          f"{bad.size} violations in {env_samples} samples", file=out)
    if not ok:
        failures += 1
        print(f"  counterexample s = {fmt(bad[0], cfg.precision)}", file=out)

    init = random_initial(params.n, 1.0, seed)
    order = convergence_order(params, init, 2.0, ORDER_DTS)
    ok = ORDER_BAND[0] <= order <= ORDER_BAND[1]
    print(f"{'PASS' if ok else 'FAIL'} convergence: observed RK4 order {order:.4f} "
          f"(band {ORDER_BAND[0]}..{ORDER_BAND[1]})", file=out)
    if not ok:
        failures += 1
    return EXIT_OK if failures == 0 else EXIT_VERIFY


SWEEP_HEADER = ["p", "a", "alpha", "n", "seed", "synchronized", "t_sync", "fitted_rate",
                "tail_min_gap_sq", "threshold_satisfied", "bound_violations", "failed"]


def sweep_rows(records, precision: int = 17):
    def opt(v):
        return "" if v is None else fmt(v, precision)

    def flag(v):
        return "true" if v else "false"

    for r in records:
        v = r.verdict
        yield [fmt(r.params.p, precision), fmt(r.params.a, precision), fmt(r.params.alpha, precision),
               str(r.params.n), str(r.seed), flag(v.synchronized), opt(v.t_sync), opt(v.fitted_rate),
               fmt(v.tail_min_gap_sq, precision), flag(v.threshold_satisfied_tail),
               str(r.bound_violations), flag(r.failed)]


def cmd_sweep(cfg: RunConfig, stem: Path, workers: Optional[int] = None, out=None) -> int:
    out = out or sys.stdout
    records = run_sweep(cfg.sweep, workers)
    path = Path(f"{stem}_sweep.csv")
    try:
        _write_rows(path, SWEEP_HEADER, sweep_rows(records, cfg.precision),
                    [f"rng={RNG_NAME} uniform(-init_radius, init_radius), x then y",
                     f"init_radius={fmt(cfg.sweep.init_radius, cfg.precision)}"])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path} ({len(records)} records)", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _split_overrides(extra: List[str]) -> List[Tuple[str, Any]]:
    pairs = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            raise ConfigError(token, "unexpected argument")
        key = token[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(key, "missing value")
            raw = extra[i + 1]
            i += 2
        pairs.append((key, _parse_value(raw)))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhn", description="Boundary-feedback FitzHugh-Nagumo ring lattice laboratory.",
        epilog="Any --section.key VALUE flag overrides the config file, e.g. --model.delta 0.2")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", help="output file stem")
    parser.add_argument("--workers", type=int, help="worker processes for sweep (default $FHN_WORKERS or 1)")
    parser.add_argument("--deterministic-names", action="store_true",
                        help="omit the timestamp from default output names")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        text = None
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return EXIT_IO
        cfg = parse_config(text, _split_overrides(extra), args.command)
        workers = resolve_workers(args.workers) if args.workers is not None else None
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.out:
        stem = Path(args.out)
    elif cfg.output_path:
        stem = Path(cfg.output_path)
    else:
        stem = Path(cfg.command if args.deterministic_names
                    else f"{cfg.command}_{time.strftime('%Y%m%d-%H%M%S')}")

    if cfg.command == "constants":
        return cmd_constants(cfg, stem if (args.out or cfg.output_path) else None)
    if cfg.command == "simulate":
        return cmd_simulate(cfg, stem)
    if cfg.command == "verify":
        return cmd_verify(cfg)
    return cmd_sweep(cfg, stem, workers)


if __name__ == "__main__":
    sys.exit(main())
