"""``avgctl`` command line: one experiment per invocation.

Exit status: 0 pass, 2 threshold failure, 1 runtime error, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys as _sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as an
from .averaging import (
    ControlProfile,
    CotangentPoint,
    hamiltonian,
    grad_hamiltonian,
    optimal_profile,
)
from .dynamics import (
    IntegratorSpec,
    JointControl,
    integrate_average,
    integrate_average_extremal,
    integrate_oscillating,
    integrate_oscillating_extremal,
    recovery_control,
)
from .errors import AvgCtlError, ConfigError
from .quadrature import locate_zeros
from .report import CONFIG_SCHEMA, build_report, write_csv, write_json
from .systems import REGISTRY, TWO_PI, KeplerSystem

EXIT_PASS, EXIT_ERROR, EXIT_FAIL, EXIT_USAGE = 0, 1, 2, 64


# --------------------------------------------------------------------------
# parameter types


def _vec(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _num(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {text!r}") from None


def _int(text) -> int:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected an integer, got {text!r}") from None
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def _str(text) -> str:
    return str(text)


@dataclass(frozen=True)
class Param:
    kind: Callable
    default: object = None
    help: str = ""


_VEC = _vec
COMMON = {
    "seed": Param(_int, 0, "random seed"),
    "threads": Param(_int, None, "worker threads (default: AVGCTL_THREADS or 1)"),
}
COMMANDS: dict[str, dict[str, Param]] = {
    "hamiltonian": {"x": Param(_VEC, None, "state"), "p": Param(_VEC, None, "costate")},
    "profile": {"x": Param(_VEC), "p": Param(_VEC), "n": Param(_int, 256, "angle samples")},
    "average": {"x": Param(_VEC), "profile": Param(_str, "signcos"), "p": Param(_VEC), "T": Param(_num, 1.0)},
    "oscillate": {"x": Param(_VEC), "profile": Param(_str, "signcos"), "p": Param(_VEC),
                  "T": Param(_num, 1.0), "eps": Param(_num, 0.05)},
    "extremal": {"x": Param(_VEC), "p": Param(_VEC), "T": Param(_num, 1.0), "eps": Param(_num, None)},
    "converge": {"x": Param(_VEC), "profile": Param(_str, "signcos"), "p": Param(_VEC), "T": Param(_num, 1.0),
                 "eps": Param(_VEC, [0.1, 0.05, 0.025, 0.0125])},
    "residual": {"x": Param(_VEC), "profile": Param(_str, "signcos"), "p": Param(_VEC), "T": Param(_num, 1.0),
                 "grid": Param(_int, 100)},
    "gradcheck": {"samples": Param(_int, 100), "exclusion": Param(_num, 1e-2)},
    "liplog": {"x": Param(_VEC), "p": Param(_VEC), "L": Param(_num, 1.0, "zero angle used to build the center"),
               "radii": Param(_VEC, [1e-2, 1e-3, 1e-4, 1e-5]), "pairs": Param(_int, 64)},
    "shoot": {"x0": Param(_VEC), "x1": Param(_VEC), "tol": Param(_num, 1e-6)},
    "timelimit": {"x0": Param(_VEC), "x1": Param(_VEC), "eps": Param(_VEC, [0.1, 0.05, 0.025])},
    "twobody-verify": {"samples": Param(_int, 1000)},
}
DEFAULT_STATE = {"rotating_field": [0.0, 0.0], "rotating_field_2": [0.0, 0.0], "two_body_planar": [1.0, 0.1, 0.05]}


# --------------------------------------------------------------------------
# configuration


def _allowed(command: str) -> dict[str, Param]:
    return {**COMMON, **COMMANDS[command]}


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict) or data.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(f"config must be a JSON object with schema {CONFIG_SCHEMA!r}")
    unknown = set(data) - {"schema", "command", "system", "params"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve(command: str, file_cfg: dict, flags: dict) -> dict:
    """Defaults, then config file params, then command-line flags."""
    allowed = _allowed(command)
    file_params = dict(file_cfg.get("params", {}))
    unknown = set(file_params) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown parameters for {command}: {', '.join(sorted(unknown))}")
    merged = {}
    for key, prm in allowed.items():
        raw = flags.get(key)
        if raw is None:
            raw = file_params.get(key, prm.default)
        merged[key] = prm.kind(raw) if raw is not None else None
    return merged


# --------------------------------------------------------------------------
# helpers


def _system(label: str):
    if label not in REGISTRY:
        raise ConfigError(f"unknown system {label!r}; known: {', '.join(REGISTRY.labels())}")
    return REGISTRY.get(label)


def _state(params, sys, label, key="x"):
    x = params.get(key)
    if x is None:
        x = DEFAULT_STATE.get(label)
    if x is None or len(x) != sys.n:
        raise ConfigError(f"--{key} needs {sys.n} comma-separated values")
    return np.array(x)


def _costate(params, sys, required=True):
    p = params.get("p")
    if p is None:
        if required:
            raise ConfigError("--p is required")
        return None
    if len(p) != sys.n:
        raise ConfigError(f"--p needs {sys.n} values")
    return np.array(p)


def _profile(params, sys, x) -> ControlProfile:
    name = params["profile"]
    if name == "signcos":
        def f(th):
            out = np.zeros((np.size(th), sys.m))
            out[:, 0] = np.sign(np.cos(th))
            return out

        return ControlProfile.closed_form(f, sys.m, (np.pi / 2, 3 * np.pi / 2))
    if name == "zero":
        return ControlProfile.zero(sys.m)
    if name == "optimal":
        return optimal_profile(sys, x, _costate(params, sys))
    raise ConfigError(f"unknown profile {name!r} (signcos, zero, optimal)")


def _is_rotating(label: str) -> bool:
    return label.startswith("rotating_field")


def _traj_rows(traj):
    full = traj.states if traj.costates is None else np.hstack([traj.states, traj.costates])
    return [[float(t), *map(float, row)] for t, row in zip(traj.times, full)]


def _traj_header(traj):
    head = ["t"] + [f"x_{i + 1}" for i in range(traj.n)]
    if traj.costates is not None:
        head += [f"p_{i + 1}" for i in range(traj.costates.shape[1])]
    return head


# --------------------------------------------------------------------------
# commands: each returns (results, passed, summary lines, csv tables)


def cmd_hamiltonian(sys, label, prm):
    x, p = _state(prm, sys, label), _costate(prm, sys)
    h = hamiltonian(sys, x, p)
    dx, dp = grad_hamiltonian(sys, x, p) if np.any(p) else (np.zeros(sys.n), np.zeros(sys.n))
    res = {"H": h, "dH_dx": dx, "dH_dp": dp}
    passed = True
    lines = [f"H = {h:.10g}"]
    if _is_rotating(label):
        ref = 2 / np.pi * np.linalg.norm(p) * (1.0 if sys.m == 1 else np.pi / 2)
        err = abs(h - ref) / max(ref, 1e-300) if ref else abs(h)
        passed = err <= 1e-6
        res["closed_form"] = ref
        lines.append(f"closed form {ref:.10g}, rel err {err:.2e}")
    return res, passed, lines, {}


def cmd_profile(sys, label, prm):
    x, p = _state(prm, sys, label), _costate(prm, sys)
    U = optimal_profile(sys, x, p)
    th = np.arange(prm["n"]) * (TWO_PI / prm["n"])
    vals = U(th)
    rows = [[float(t), *map(float, v)] for t, v in zip(th, vals)]
    zeros = list(U.breakpoints)
    table = {"profile": (["theta"] + [f"u_{k + 1}" for k in range(sys.m)], rows)}
    return {"zero_angles": zeros}, True, [f"zero angles: {zeros}"], table


def cmd_average(sys, label, prm):
    x = _state(prm, sys, label)
    J = JointControl.from_profile(_profile(prm, sys, x), prm["T"])
    traj = integrate_average(sys, x, J, (0.0, prm["T"]))
    res = {"x_T": traj.states[-1], "t_end": traj.t_end, "exit": traj.flags.get("exit")}
    passed = traj.t_end >= prm["T"]
    return res, passed, [f"x(T) = {traj.states[-1]}"], {"trajectory": (_traj_header(traj), _traj_rows(traj))}


def cmd_oscillate(sys, label, prm):
    x = _state(prm, sys, label)
    T, eps = prm["T"], prm["eps"]
    J = JointControl.from_profile(_profile(prm, sys, x), T)
    if isinstance(sys, KeplerSystem):
        traj = an._oscillating_run(sys, x, J, T, eps, IntegratorSpec(), an.DEFAULT_SPEC)
    else:
        traj = integrate_oscillating(sys, eps, recovery_control(J, eps), x, (0.0, T))
    avg = integrate_average(sys, x, J, (0.0, T))
    grid = np.linspace(0.0, min(T, traj.t_end), an.SUP_GRID)
    sup = float(np.max(np.linalg.norm(traj(grid) - avg(grid), axis=1)))
    res = {"x_T": traj.states[-1], "sup_distance_to_average": sup, "exit": traj.flags.get("exit")}
    passed = traj.t_end >= T * (1 - 1e-12)
    lines = [f"x(T) = {traj.states[-1]}", f"sup |x_eps - x_0| = {sup:.4e}"]
    return res, passed, lines, {"trajectory": (_traj_header(traj), _traj_rows(traj))}


def cmd_extremal(sys, label, prm):
    x, p = _state(prm, sys, label), _costate(prm, sys)
    T = prm["T"]
    if prm["eps"] is not None:
        traj = integrate_oscillating_extremal(sys, prm["eps"], CotangentPoint(x, p), (0.0, T))
        res = {"x_T": traj.states[-1], "p_T": traj.costates[-1], "switch_times": traj.flags["switch_times"]}
        lines = [f"x(T) = {traj.states[-1]}", f"{len(traj.flags['switch_times'])} switches"]
        passed = True
    else:
        traj = integrate_average_extremal(sys, CotangentPoint(x, p), (0.0, T))
        drift = traj.flags["hamiltonian_drift"]
        res = {"x_T": traj.states[-1], "p_T": traj.costates[-1], "hamiltonian_drift": drift,
               "exit": traj.flags.get("exit")}
        passed = drift <= 1e-6 and traj.t_end >= T
        lines = [f"x(T) = {traj.states[-1]}", f"H drift {drift:.2e}"]
    return res, passed, lines, {"trajectory": (_traj_header(traj), _traj_rows(traj))}


def cmd_converge(sys, label, prm):
    x = _state(prm, sys, label)
    J = JointControl.from_profile(_profile(prm, sys, x), prm["T"])
    rep = an.convergence_sweep(sys, x, J, prm["T"], prm["eps"], threads=prm["threads"])
    lo, hi = (0.8, 1.2) if isinstance(sys, KeplerSystem) else (0.85, 1.15)
    if rep.degenerate:
        passed = True
    else:
        passed = not rep.failed and lo <= rep.fitted_slope <= hi and rep.r_squared >= 0.98
    lines = [f"eps {e:<8g} sup err {s:.4e}" for e, s in zip(rep.eps_list, rep.sup_errors)]
    lines.append(f"slope {rep.fitted_slope:.4f} (target [{lo}, {hi}]), r^2 {rep.r_squared:.4f}")
    table = {"convergence": (["eps", "sup_error"], [[e, s] for e, s in zip(rep.eps_list, rep.sup_errors)])}
    return rep.to_json(), passed, lines, table


def cmd_residual(sys, label, prm):
    x = _state(prm, sys, label)
    J = JointControl.from_profile(_profile(prm, sys, x), prm["T"])
    traj = integrate_average(sys, x, J, (0.0, prm["T"]))
    r = an.inclusion_residual(sys, traj, n_grid=prm["grid"])
    passed = r <= an.FEASIBLE_RESIDUAL
    return {"inclusion_residual": r}, passed, [f"inclusion residual {r:.3e} (<= {an.FEASIBLE_RESIDUAL})"], {}


def cmd_gradcheck(sys, label, prm):
    err = an.grad_check(sys, prm["samples"], prm["exclusion"], seed=prm["seed"], threads=prm["threads"])
    tol = 1e-4 if isinstance(sys, KeplerSystem) else 1e-5
    return {"max_rel_error": err, "threshold": tol}, err <= tol, [f"max rel err {err:.3e} (<= {tol:g})"], {}


def _liplog_center(sys, label, prm) -> CotangentPoint:
    x = _state(prm, sys, label)
    p = _costate(prm, sys, required=False)
    if p is None:
        if label != "two_body_planar":
            raise ConfigError("--p is required for this system")
        from .two_body import null_costate

        A, X, Y = null_costate(x[1], x[2], prm["L"])
        p = np.array([A / x[0], X, Y])
    return CotangentPoint(x, p)


def cmd_liplog(sys, label, prm):
    center = _liplog_center(sys, label, prm)
    rep = an.liplog_modulus(sys, center, prm["radii"], n_pairs=prm["pairs"], seed=prm["seed"],
                            threads=prm["threads"])
    lip = np.asarray(rep.lipschitz[-3:])
    passed = rep.bounded(3.0) and bool(np.all(np.diff(lip) > 0))
    lines = [f"r {r:<8g} ratio {a:.4f}  lipschitz {b:.4f}" for r, a, b in zip(rep.radii, rep.ratios, rep.lipschitz)]
    table = {"liplog": (["r", "ratio", "lipschitz"], [list(t) for t in zip(rep.radii, rep.ratios, rep.lipschitz)])}
    return {**rep.to_json(), "center_p": center.p}, passed, lines, table


def cmd_shoot(sys, label, prm):
    x0, x1 = _state(prm, sys, label, "x0"), _state(prm, sys, label, "x1")
    res = an.min_time_shoot(sys, x0, x1, shoot_tol=prm["tol"], seed=prm["seed"])
    out = res.to_json()
    passed = res.terminal_miss <= prm["tol"]
    lines = [f"extremal time T0 = {res.T0:.10g}", f"terminal miss {res.terminal_miss:.2e}"]
    if _is_rotating(label) and sys.m == 1:
        ref = np.pi / 2 * np.linalg.norm(x1 - x0)
        out["closed_form"] = ref
        passed = passed and abs(res.T0 - ref) <= 1e-6
        lines.append(f"closed form {ref:.10g}")
    table = {"trajectory": (_traj_header(res.trajectory), _traj_rows(res.trajectory))}
    return out, passed, lines, table


def cmd_timelimit(sys, label, prm):
    x0, x1 = _state(prm, sys, label, "x0"), _state(prm, sys, label, "x1")
    rep = an.time_limit_probe(sys, prm["eps"], x0, x1, threads=prm["threads"])
    passed = 0.7 <= rep.excess_slope <= 1.3
    lines = [f"T0 = {rep.T0:.8g}, ball constant C = {rep.ball_constant:.4g}"]
    lines += [f"eps {e:<8g} reach {t:.6f} excess {t - rep.T0:+.4e}" for e, t in zip(rep.eps_list, rep.reach_times)]
    lines.append(f"excess slope {rep.excess_slope:.4f} (target [0.7, 1.3])")
    table = {"timelimit": (["eps", "reach_time"], [[e, t] for e, t in zip(rep.eps_list, rep.reach_times)])}
    return rep.to_json(), passed, lines, table


def cmd_twobody_verify(sys, label, prm):
    rep = an.verify_two_body(prm["samples"], prm["seed"])
    lines = [
        f"detM max rel err {rep.detM_max_rel_err:.3e} (<= 1e-10)",
        f"switch-count histogram {rep.to_json()['switch_histogram']}, disagreements {rep.switch_disagreements}",
        f"mean-motion max rel err {rep.mean_motion_max_rel_err:.3e} (<= 1e-8)",
    ]
    return rep.to_json(), rep.passed, lines, {}


RUNNERS = {
    "hamiltonian": cmd_hamiltonian,
    "profile": cmd_profile,
    "average": cmd_average,
    "oscillate": cmd_oscillate,
    "extremal": cmd_extremal,
    "converge": cmd_converge,
    "residual": cmd_residual,
    "gradcheck": cmd_gradcheck,
    "liplog": cmd_liplog,
    "shoot": cmd_shoot,
    "timelimit": cmd_timelimit,
    "twobody-verify": cmd_twobody_verify,
}


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="avgctl", description="Average control systems: experiments and checks.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name, help=f"run {name}")
        sp.add_argument("--config", help=f"JSON config file (schema {CONFIG_SCHEMA})")
        sp.add_argument("--system", help="registry label")
        sp.add_argument("--out", default=None, help="output directory (default: avgctl-out)")
        for key, prm in {**COMMON, **params}.items():
            sp.add_argument(f"--{key}", dest=key, default=None, help=prm.help or None)
    return parser


def dispatch(argv=None, stdout=None) -> int:
    out = stdout or _sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required")
        command = args.command
        file_cfg = load_config(args.config) if args.config else {}
        if file_cfg.get("command", command) != command:
            raise ConfigError(f"config is for {file_cfg['command']!r}, not {command!r}")
        label = args.system or file_cfg.get("system")
        if command == "twobody-verify":
            label = label or "two_body_planar"
        if not label:
            raise ConfigError("--system is required")
        flags = {k: getattr(args, k) for k in _allowed(command)}
        params = resolve(command, file_cfg, flags)
        sys = _system(label)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=_sys.stderr)
        return EXIT_USAGE

    try:
        results, passed, lines, tables = RUNNERS[command](sys, label, params)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (AvgCtlError, ValueError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_ERROR

    config = {"system": label, "params": params}
    report = build_report(command, config, params["seed"], results, passed)
    out_dir = Path(args.out or "avgctl-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = command.replace("-", "_")
    write_json(out_dir / f"{stem}.json", report)
    for name, (header, rows) in tables.items():
        write_csv(out_dir / f"{stem}_{name}.csv", header, rows)

    print(f"avgctl {command} [{label}]", file=out)
    for line in lines:
        print(f"  {line}", file=out)
    print(f"  {'PASS' if passed else 'FAIL'}  (report: {out_dir / (stem + '.json')})", file=out)
    return EXIT_PASS if passed else EXIT_FAIL


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
