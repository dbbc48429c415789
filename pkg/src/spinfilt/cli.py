"""Command-line front end: ``spinfilt <command> [options]``.

Every command writes CSV (header row, data rows, trailing
``# spinfilt <version> <command> <param-hash>`` comment). Options can also
come from a plain ``key = value`` file passed with ``--config``; flags given
on the command line take precedence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from .design import design_gate
from .filters import (
    filter_strong_universal,
    filter_weak_universal,
    filters_strong_half,
    second_order_filter,
    strong_filter_arrays,
    weak_filter_arrays,
    weak_resonance_order,
    weak_resonance_param,
)
from .propagator import ControlKind, SpinSystem, product_state, simulate_gate
from .sensing import CpmgPlan, SlicePlan, sensing_scan
from .sequences import ResonancePoint, SliceSpec, cpmg, resonance_tau_weak, sliced_alternating
from .spin import DOWN, UP
from .validate import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
POINTS_PER_DECADE = 2000
# initial target-spin states for gate-sim; the control starts in (|down> + |up>)/sqrt(2)
TARGET_STATES = {
    "down": DOWN,
    "up": UP,
    "plus": (UP + DOWN) / math.sqrt(2),
    "minus": (UP - DOWN) / math.sqrt(2),
}
COMMANDS = ("filter-scan", "gate-sim", "sense-scan", "design-gate", "validate")


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    omega: float = 1.0
    A: float = 0.06
    control: str = "half"
    N: int = 20
    tau: float | None = None
    slices: int = 0
    per_slice: int = 2
    c: float = 0.0
    k: int = 0
    grid: str | None = None
    out: str = "-"
    regime: str = "weak"
    second_order: bool = False
    phi: float = math.pi / 2
    theta: float = math.pi / 2
    n_max: int = 100
    target_state: str = "down"
    suite: tuple[str, ...] = ()
    mutate: bool = False

    def check(self) -> "RunConfig":
        if not self.omega >= 0 or not math.isfinite(self.omega):
            raise InputError("--omega must be a non-negative number")
        if not math.isfinite(self.A):
            raise InputError("--A must be finite")
        if self.control not in {k.value for k in ControlKind}:
            raise InputError("--control must be one of half, one+, one-")
        if self.N < 1:
            raise InputError("--N must be at least 1")
        if self.tau is not None and not self.tau > 0:
            raise InputError("--tau must be positive")
        if self.slices < 0 or self.per_slice < 1:
            raise InputError("--slices must be >= 0 and --per-slice >= 1")
        if self.k < 0:
            raise InputError("--k must be non-negative")
        if not -2 < self.c < 2:
            raise InputError("--c must lie in (-2, 2)")
        if self.regime not in ("weak", "strong", "strong-half"):
            raise InputError("--regime must be weak, strong or strong-half")
        if self.target_state not in TARGET_STATES:
            raise InputError(f"--target-state must be one of {', '.join(TARGET_STATES)}")
        if self.grid is not None:
            parse_grid(self.grid)
        return self

    def system(self) -> SpinSystem:
        return SpinSystem(self.omega, self.A, ControlKind(self.control))

    def param_hash(self) -> str:
        payload = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()) if k != "out")
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def render(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "command":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(value)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"


_CASTS = {
    "omega": float,
    "A": float,
    "tau": float,
    "c": float,
    "phi": float,
    "theta": float,
    "N": int,
    "slices": int,
    "per_slice": int,
    "k": int,
    "n_max": int,
}


def _cast(key: str, value: str):
    if key in _CASTS:
        try:
            return _CASTS[key](value)
        except ValueError as exc:
            raise InputError(f"{key}: cannot parse {value!r}") from exc
    if key in ("second_order", "mutate"):
        low = value.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise InputError(f"{key}: expected a boolean, got {value!r}")
        return low in ("1", "true", "yes")
    if key == "suite":
        return tuple(s.strip() for s in value.split(",") if s.strip())
    return value


def read_config(path: str) -> dict:
    known = {f.name for f in fields(RunConfig)} - {"command"}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        if value == "":
            continue
        out[key] = _cast(key, value)
    return out


def parse_grid(text: str) -> tuple[float, float, int | None]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise InputError("--grid expects start:stop[:points]")
    try:
        start, stop = float(parts[0]), float(parts[1])
        points = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise InputError(f"invalid grid {text!r}") from exc
    if not (math.isfinite(start) and math.isfinite(stop)) or stop <= start:
        raise InputError("grid needs finite start < stop")
    if points is not None and points < 2:
        raise InputError("grid needs at least 2 points")
    return start, stop, points


def grid_values(text: str) -> np.ndarray:
    """Uniform grid; without an explicit count, 2000 points per decade of stop/start."""
    start, stop, points = parse_grid(text)
    if points is None:
        if start > 0:
            points = max(2, int(math.ceil(POINTS_PER_DECADE * math.log10(stop / start))) + 1)
        else:
            points = 3 * POINTS_PER_DECADE
    return np.linspace(start, stop, points)


# ---------------------------------------------------------------------------
# CSV output


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def csv_text(cfg: RunConfig, header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    buf.write(f"# spinfilt {__version__} {cfg.command} {cfg.param_hash()}\n")
    return buf.getvalue()


def emit(cfg: RunConfig, text: str, stdout) -> None:
    if cfg.out == "-":
        stdout.write(text)
        return
    try:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {cfg.out}: {exc.strerror}") from exc


def _columns_to_rows(columns) -> list:
    return list(zip(*columns))


# ---------------------------------------------------------------------------
# commands


def cmd_filter_scan(cfg: RunConfig, stdout, stderr) -> int:
    grid = grid_values(cfg.grid or "0:9.42477796076938")
    if cfg.regime == "weak":
        x = grid
        _, F, phi, axis_sign = weak_filter_arrays(x, cfg.N)
        k = weak_resonance_order(x)
        c = weak_resonance_param(x, cfg.N)
        universal = filter_weak_universal(c, 0) / (2 * np.asarray(k) + 1)
        header = ["omega_tau", "F", "phi", "axis_sign", "c", "F_universal"]
        cols = [x, F, phi, axis_sign, c, universal]
        if cfg.second_order:
            if not cfg.omega > 0:
                raise InputError("second-order column needs omega > 0")
            f2 = [0.0 if v <= 0 else second_order_filter(cfg.omega, cpmg(cfg.N, v / cfg.omega)) for v in x]
            header.append("F2")
            cols.append(np.array(f2))
    elif cfg.regime == "strong":
        sign = -1 if cfg.control == "one-" else 1
        if np.any(grid <= 0):
            raise InputError("strong-coupling grids over A tau must be positive")
        _, _, F_c, F_u, phi_c, phi_u = strong_filter_arrays(grid, cfg.N, sign)
        kc = np.maximum(0, np.rint((grid / np.pi - 1) / 2))
        c_c = (grid - (2 * kc + 1) * np.pi) * cfg.N / np.pi
        ku = np.rint(grid / (2 * np.pi))
        c_u = (grid - 2 * ku * np.pi) * cfg.N / np.pi
        header = ["A_tau", "F_c", "F_u", "phi_c", "phi_u", "F_c_universal", "F_u_universal"]
        cols = [grid, F_c, F_u, phi_c, phi_u, filter_strong_universal(c_c), filter_strong_universal(c_u)]
    else:
        if np.any(grid <= 0):
            raise InputError("strong-coupling grids over A tau must be positive")
        pairs = np.array([filters_strong_half(1.0, cfg.N, v) for v in grid])
        header = ["A_tau", "F_c", "F_u"]
        cols = [grid, pairs[:, 0], pairs[:, 1]]
    emit(cfg, csv_text(cfg, header, _columns_to_rows(cols)), stdout)
    return EXIT_OK


def _gate_sequence(cfg: RunConfig):
    if not cfg.omega > 0:
        raise InputError("gate simulation needs omega > 0")
    if cfg.slices:
        tau0 = cfg.tau if cfg.tau is not None else (2 * cfg.k + 1) * math.pi / (2 * cfg.omega)
        spec = SliceSpec.from_tau0(cfg.slices, cfg.per_slice, tau0, cfg.c, cfg.k)
        return sliced_alternating(spec)
    tau = cfg.tau if cfg.tau is not None else resonance_tau_weak(cfg.omega, ResonancePoint(cfg.k, cfg.c, cfg.N))
    return cpmg(cfg.N, tau)


def cmd_gate_sim(cfg: RunConfig, stdout, stderr) -> int:
    seq = _gate_sequence(cfg)
    phi = cfg.c * math.pi / 2
    sign = -1 if cfg.k % 2 else 1
    axis = (sign * math.cos(phi), -sign * math.sin(phi), 0.0)
    psi0 = product_state(TARGET_STATES[cfg.target_state], (DOWN + UP) / math.sqrt(2))
    trace = simulate_gate(cfg.system(), seq, cfg.theta, axis, initial_state=psi0)
    header = ["time", "re_coh", "im_coh", "pop_down", "fid_vs_target", "sx", "sy", "sz"]
    cols = [
        trace.time,
        trace.coherence.real,
        trace.coherence.imag,
        trace.pop_down,
        trace.fidelity,
        trace.sx,
        trace.sy,
        trace.sz,
    ]
    emit(cfg, csv_text(cfg, header, _columns_to_rows(cols)), stdout)
    summary = stderr if cfg.out == "-" else stdout
    summary.write(f"fidelity={trace.final_fidelity!r}\n")
    return EXIT_OK


def cmd_sense_scan(cfg: RunConfig, stdout, stderr) -> int:
    if not cfg.omega > 0:
        raise InputError("sensing scans need omega > 0")
    plan = SlicePlan(cfg.slices, cfg.per_slice, cfg.c, cfg.k) if cfg.slices else CpmgPlan(cfg.N)
    grid = grid_values(cfg.grid or "0.05:9.42477796076938")
    if np.any(grid <= 0):
        raise InputError("sensing grids over omega tau0 must be positive")
    scan = sensing_scan(cfg.system(), plan, grid)
    cols = scan.columns()
    emit(cfg, csv_text(cfg, list(cols), _columns_to_rows(list(cols.values()))), stdout)
    return EXIT_OK


def cmd_design_gate(cfg: RunConfig, stdout, stderr) -> int:
    try:
        design = design_gate(cfg.system(), cfg.phi, cfg.theta, cfg.n_max)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {
        "ok": design.ok,
        "c": design.c,
        "pulses_per_slice": design.pulses_per_slice,
        "slices": design.slices,
        "N": design.n_pulses,
        "tau_plus": design.tau_plus,
        "tau_minus": design.tau_minus,
        "theta_eff": design.theta_eff,
        "f_eff": design.f_eff,
        "fidelity_unitary": design.fidelity_unitary,
        "fidelity_state": design.fidelity_state,
        "magnus": design.magnus_tier,
    }
    target = stdout if cfg.out != "-" else stderr
    for key, value in report.items():
        target.write(f"{key}={value}\n")
    if design.message:
        stderr.write(f"warning: {design.message}\n" if design.ok else f"error: {design.message}\n")
    if not design.ok:
        return EXIT_FAIL
    seq = design.sequence()
    rows = [(i, t) for i, t in enumerate(seq.pulse_times, start=1)]
    rows.append(("total", seq.total_time))
    emit(cfg, csv_text(cfg, ["index", "pulse_time_seconds"], rows), stdout)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, stdout, stderr) -> int:
    names = list(cfg.suite) or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    results = run_suites(names, mutate=cfg.mutate)
    failed = False
    for name in names:
        checks = [r for r in results if r.suite == name]
        bad = [r for r in checks if not r.ok]
        failed |= bool(bad)
        stdout.write(f"{name}: {'FAIL' if bad else 'PASS'} ({len(checks) - len(bad)}/{len(checks)})\n")
        for r in bad:
            stdout.write(f"  failed: {r.name} {r.detail}\n")
    return EXIT_FAIL if failed else EXIT_OK


HANDLERS = {
    "filter-scan": cmd_filter_scan,
    "gate-sim": cmd_gate_sim,
    "sense-scan": cmd_sense_scan,
    "design-gate": cmd_design_gate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--show-config", action="store_true", help="print the effective configuration and exit")
    common.add_argument("--omega", type=float, help="target splitting (rad/s)")
    common.add_argument("--A", type=float, help="hyperfine coupling (rad/s)")
    common.add_argument("--control", choices=[k.value for k in ControlKind])
    common.add_argument("--N", type=int, help="pulse count")
    common.add_argument("--tau", type=float, help="half pulse spacing (s); tau0 for sliced runs")
    common.add_argument("--slices", type=int, help="slice count s (0 = plain CPMG)")
    common.add_argument("--per-slice", dest="per_slice", type=int, help="pulses per slice n")
    common.add_argument("--c", type=float, help="resonance parameter")
    common.add_argument("--k", type=int, help="resonance order")
    common.add_argument("--grid", help="start:stop[:points]")
    common.add_argument("--out", help="output path, '-' for stdout")

    parser = argparse.ArgumentParser(prog="spinfilt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spinfilt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("filter-scan", parents=[common], argument_default=argparse.SUPPRESS, help="filter functions over a grid")
    p.add_argument("--regime", choices=["weak", "strong", "strong-half"])
    p.add_argument("--second-order", dest="second_order", action="store_true")
    p = sub.add_parser("gate-sim", parents=[common], argument_default=argparse.SUPPRESS, help="time-resolved gate simulation")
    p.add_argument("--theta", type=float, help="target conditional angle")
    p.add_argument("--target-state", dest="target_state", choices=list(TARGET_STATES), help="initial target-spin state")
    p = sub.add_parser("sense-scan", parents=[common], argument_default=argparse.SUPPRESS, help="control-spin coherence scan")
    p = sub.add_parser("design-gate", parents=[common], argument_default=argparse.SUPPRESS, help="design an alternating-sequence gate")
    p.add_argument("--phi", type=float, help="target axis angle")
    p.add_argument("--theta", type=float, help="target conditional angle")
    p.add_argument("--n-max", dest="n_max", type=int, help="pulse budget")
    p = sub.add_parser("validate", parents=[common], argument_default=argparse.SUPPRESS, help="run invariant suites")
    p.add_argument("--suite", action="append", choices=list(SUITES))
    p.add_argument("--mutate", action="store_true", help="perturb a closed-form constant (fault injection)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "show_config", "command")}
    if "suite" in flags:
        flags["suite"] = tuple(flags["suite"])
    values.update(flags)
    cfg = replace(RunConfig(), command=args.command, **values)
    return cfg.check()


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        if getattr(args, "show_config", False):
            stdout.write(cfg.render())
            return EXIT_OK
        return HANDLERS[cfg.command](cfg, stdout, stderr)
    except (InputError, ValueError) as exc:
        stderr.write(f"spinfilt: error: {exc}\n")
        return EXIT_INPUT


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
