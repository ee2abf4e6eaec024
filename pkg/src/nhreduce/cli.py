"""Command-line front end.

Subcommands: ``simulate``, ``verify``, ``reduce`` and ``momenta``.  Runs are
configured by flags or by an INI file::

    [run]
    system = snakeboard        ; builtin name
    seed = 0
    output = out/snake

    [params]                   ; optional overrides of the example defaults
    J = 0.5

    [initial_state]            ; optional, defaults to the example's state
    q = 0.2, 0.1, -0.3, 0.0, 1.37
    pD = 0.6, 0.3, 0.02

    [integrator]
    method = rk4               ; rk4 | adaptive
    dt = 1e-3
    t_final = 1.0
    rtol = 1e-10
    atol = 1e-12
    tolerance = 1e-8           ; allowed relative drift of H and J_i

    [reduction]
    level = 0.7                ; comma separated, one value per gauge momentum
    momenta = 0.5              ; horizontal leaf momenta for ``reduce``
    points = 21

    [checks]
    names = dynamical_condition, momentum_relation
    samples = 10

Flags override file values.  Exit codes: 0 success, 1 a check or drift
tolerance failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .chaplygin import projection_consistency, reduce_state
from .examples import NAMES, ParameterError, build_example, leaf_area_matrix
from .gauge import (
    B_matrix,
    build_gauge,
    dynamical_condition_residual,
    gauged_dynamics_residual,
    reduced_dynamical_condition_residual,
    verify_momentum_relation,
)
from .integrate import DomainExitError, integrate, standard_diagnostics
from .mwreduce import (
    basic_residuals,
    build_leaf,
    casimir_check,
    identification_residual,
    leaf_dynamics_residual,
    lifted_state,
    omega_mu_matrix,
    phi_mu_pullback_matrix,
    shift_pullback_residual,
)
from .symmetry import assemble_momentum_ode, solve_momentum_ode


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: str = "particle"
    params: Dict[str, float] = field(default_factory=dict)
    q0: Optional[np.ndarray] = None
    pD0: Optional[np.ndarray] = None
    method: str = "rk4"
    dt: float = 1e-3
    t_final: float = 1.0
    rtol: float = 1e-10
    atol: float = 1e-12
    tolerance: Optional[float] = None
    level: Optional[np.ndarray] = None
    leaf_momenta: Optional[np.ndarray] = None
    points: int = 21
    checks: List[str] = field(default_factory=list)
    samples: int = 10
    seed: int = 0
    output: Optional[str] = None
    omit_gauge: bool = False


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(";", ",").split(",") if t.strip()])
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r}") from exc


def _read_ini(path: str, cfg: RunConfig) -> None:
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path!r} does not exist")
    ini = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    ini.optionxform = str
    try:
        ini.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    try:
        if ini.has_section("run"):
            run = ini["run"]
            cfg.system = run.get("system", cfg.system)
            cfg.seed = run.getint("seed", cfg.seed)
            cfg.output = run.get("output", cfg.output)
            cfg.omit_gauge = run.getboolean("omit_gauge", cfg.omit_gauge)
        if ini.has_section("params"):
            cfg.params = {k: float(v) for k, v in ini["params"].items()}
        if ini.has_section("initial_state"):
            st = ini["initial_state"]
            if "q" in st:
                cfg.q0 = _floats(st["q"], "initial_state.q")
            if "pD" in st:
                cfg.pD0 = _floats(st["pD"], "initial_state.pD")
        if ini.has_section("integrator"):
            it = ini["integrator"]
            cfg.method = it.get("method", cfg.method)
            cfg.dt = it.getfloat("dt", cfg.dt)
            cfg.t_final = it.getfloat("t_final", cfg.t_final)
            cfg.rtol = it.getfloat("rtol", cfg.rtol)
            cfg.atol = it.getfloat("atol", cfg.atol)
            if "tolerance" in it:
                cfg.tolerance = it.getfloat("tolerance")
        if ini.has_section("reduction"):
            rd = ini["reduction"]
            if "level" in rd:
                cfg.level = _floats(rd["level"], "reduction.level")
            if "momenta" in rd:
                cfg.leaf_momenta = _floats(rd["momenta"], "reduction.momenta")
            cfg.points = rd.getint("points", cfg.points)
        if ini.has_section("checks"):
            ck = ini["checks"]
            if "names" in ck:
                cfg.checks = [n.strip() for n in ck["names"].split(",") if n.strip()]
            cfg.samples = ck.getint("samples", cfg.samples)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        _read_ini(args.config, cfg)
    if args.system:
        cfg.system = args.system
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output:
        cfg.output = args.output
    if args.level:
        cfg.level = _floats(args.level, "--level")
    if args.omit_gauge:
        cfg.omit_gauge = True
    for name in ("dt", "t_final", "tolerance", "samples", "points"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "adaptive", False):
        cfg.method = "adaptive"
    if getattr(args, "checks", None):
        cfg.checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    if cfg.system not in NAMES:
        raise ConfigError(f"unknown system {cfg.system!r}; builtin systems: {', '.join(NAMES)}")
    if cfg.method not in ("rk4", "adaptive"):
        raise ConfigError(f"unknown integrator method {cfg.method!r}")
    if not (cfg.dt > 0 and cfg.t_final >= 0 and math.isfinite(cfg.t_final)):
        raise ConfigError("dt must be positive and t_final non-negative")
    if cfg.samples < 1 or cfg.points < 1:
        raise ConfigError("samples and points must be positive")
    return cfg


def _example(cfg: RunConfig):
    try:
        ex = build_example(cfg.system, cfg.params)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.level is not None and len(cfg.level) != ex.k:
        raise ConfigError(f"level has {len(cfg.level)} entries, {cfg.system} has {ex.k} gauge momenta")
    return ex


def _level(cfg: RunConfig, ex) -> np.ndarray:
    return np.full(ex.k, 0.5) if cfg.level is None else cfg.level


def _out_dir(cfg: RunConfig) -> Optional[str]:
    if cfg.output:
        os.makedirs(cfg.output, exist_ok=True)
    return cfg.output


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ex = _example(cfg)
    sysm = ex.system
    state = ex.trajectory_state()
    if cfg.q0 is not None or cfg.pD0 is not None:
        q0 = state.q if cfg.q0 is None else cfg.q0
        pD0 = state.pD if cfg.pD0 is None else cfg.pD0
        if len(q0) != sysm.N or len(pD0) != sysm.r:
            raise ConfigError(f"initial state needs {sysm.N} coordinates and {sysm.r} momenta")
        try:
            state = sysm.state(np.asarray(q0, float), np.asarray(pD0, float))
        except ValueError as exc:
            raise ConfigError(f"invalid initial state: {exc}") from exc
    tol = cfg.tolerance
    if tol is None:
        tol = 1e-6 if cfg.system == "solid_of_revolution" else 1e-8
    diags = standard_diagnostics(sysm, ex.sections)
    mode = "fixed" if cfg.method == "rk4" else "adaptive"
    try:
        traj = integrate(sysm, state, cfg.dt, cfg.t_final, mode=mode, rtol=cfg.rtol,
                         atol=cfg.atol, diagnostics=diags)
    except DomainExitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    jn = [f"J_{i + 1}" for i in range(ex.k)]
    header = (["t"] + [f"q_{i + 1}" for i in range(sysm.N)] + [f"pD_{i + 1}" for i in range(sysm.r)]
              + ["H"] + jn + ["constraint_residual"])
    rows = []
    for i, (t, s) in enumerate(zip(traj.times, traj.states)):
        rows.append([t, *s.q, *s.pD, traj.diagnostics["energy"][i],
                     *[traj.diagnostics[j][i] for j in jn], traj.diagnostics["constraint_residual"][i]])
    drift = {"H": traj.drift("energy")}
    drift.update({j: traj.drift(j) for j in jn})
    failing = [name for name, d in drift.items() if not d <= tol]
    summary = {
        "system": cfg.system,
        "method": cfg.method,
        "dt": cfg.dt,
        "t_final": cfg.t_final,
        "rows": len(rows),
        "drift": drift,
        "max_constraint_residual": float(np.max(traj.diagnostics["constraint_residual"])),
        "tolerance": tol,
        "failing": failing,
        "pass": not failing,
        "notes": traj.notes,
    }
    out = _out_dir(cfg)
    if out:
        with open(os.path.join(out, "trajectory.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[_fmt(v) for v in row] for row in rows])
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
    else:
        w = csv.writer(stdout)
        w.writerow(header)
        w.writerows([[_fmt(v) for v in row] for row in rows])
    for name in failing:
        print(f"drift of {name} = {drift[name]:.3e} exceeds tolerance {tol:.1e}", file=sys.stderr)
    return 1 if failing else 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

DEFAULT_TOLERANCES = {
    "dynamical_condition": 1e-9,
    "reduced_dynamical_condition": 1e-9,
    "gauged_dynamics": 1e-8,
    "momentum_relation": 1e-7,
    "B_closed_form": 1e-8,
    "omega_mu_closed_form": 1e-7,
    "basic": 1e-7,
    "shift_pullback": 1e-7,
    "identification": 1e-6,
    "projection_consistency": 1e-8,
    "leaf_dynamics": 1e-8,
    "casimir": 1e-7,
}
CHECKS = tuple(DEFAULT_TOLERANCES)


def omega_mu_oracle(ex, leaf, c, xb) -> np.ndarray:
    """Closed-form ``omega_mu^B`` on the leaf coordinate basis."""
    o = ex.oracles
    m = leaf.m
    if "omega_mu" in o:
        return np.asarray(o["omega_mu"](xb[:m], xb[m:]), dtype=float)
    s = lifted_state(leaf, c, xb)
    coef = o["calB_bar_coefficient"](float(c[0]), s.q[6:9], o["omega"](s.q, s.pD))
    return phi_mu_pullback_matrix(leaf, c, xb) + coef * leaf_area_matrix(xb)


def B_closed_form_residual(ex, gauge, s) -> float:
    """Particle and snakeboard: B = 0.  Ball: B = mr^2 <Omega, dlambda>."""
    B = B_matrix(gauge, s)
    o = ex.oracles
    if o.get("B_zero"):
        return float(np.max(np.abs(B)))
    if "B_total" not in o:
        return float("nan")
    q = s.q
    g = q[:9].reshape(3, 3)
    E = ex.system.chart.frame(q)
    W = []
    for a in range(ex.system.n):
        A = g.T @ E[:9, a].reshape(3, 3)
        W.append(np.array([A[2, 1], A[0, 2], A[1, 0]]))
    Om = o["omega"](q, s.pD)
    n = ex.system.n
    ref = np.array([[o["B_total"](Om, W[a], W[b]) for b in range(n)] for a in range(n)])
    return float(np.max(np.abs(B - ref)))


def run_check(name: str, ex, gauge, leaf, c, samples: int, rng: np.random.Generator) -> dict:
    sysm = ex.system
    states = [sysm.random_state(rng) for _ in range(samples)]
    alphas = [reduce_state(sysm, ex.reduced, s) for s in states]
    leaf_pts = [leaf.sample(rng) for _ in range(samples)]
    if name == "dynamical_condition":
        vals = [dynamical_condition_residual(gauge, s) for s in states]
    elif name == "reduced_dynamical_condition":
        vals = [reduced_dynamical_condition_residual(gauge, a) for a in alphas]
    elif name == "gauged_dynamics":
        vals = [gauged_dynamics_residual(gauge, a) for a in alphas]
    elif name == "momentum_relation":
        vals = [verify_momentum_relation(gauge, [a]) for a in alphas]
    elif name == "B_closed_form":
        vals = [B_closed_form_residual(ex, gauge, s) for s in states]
    elif name == "omega_mu_closed_form":
        vals = [float(np.max(np.abs(omega_mu_matrix(leaf, c, x, gauge=gauge) - omega_mu_oracle(ex, leaf, c, x))))
                for x in leaf_pts]
    elif name == "basic":
        vals = [max(basic_residuals(leaf, c, x, rng, gauge)) for x in leaf_pts]
    elif name == "shift_pullback":
        vals = [shift_pullback_residual(gauge, a, c) for a in alphas]
    elif name == "identification":
        vals = [identification_residual(leaf, c, x) for x in leaf_pts]
    elif name == "projection_consistency":
        vals = [projection_consistency(sysm, ex.reduced, s) for s in states]
    elif name == "leaf_dynamics":
        vals = [leaf_dynamics_residual(leaf, c, x) for x in leaf_pts]
    elif name == "casimir":
        vals = [casimir_check(leaf, alphas[:2], n_functions=max(1, samples))]
    else:
        raise ConfigError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
    vals = [v for v in vals if not math.isnan(v)]
    tol = DEFAULT_TOLERANCES[name]
    worst = max(vals) if vals else float("nan")
    return {"check": name, "samples": len(vals), "max_residual": worst, "tolerance": tol,
            "pass": bool(vals) and worst <= tol}


def default_checks(ex) -> List[str]:
    names = list(CHECKS)
    if not ex.oracles.get("B_zero") and "B_total" not in ex.oracles:
        names.remove("B_closed_form")
    return names


def cmd_verify(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ex = _example(cfg)
    c = _level(cfg, ex)
    gauge = build_gauge(ex.system, ex.sections, ex.reduced, omit_gauge=cfg.omit_gauge)
    leaf = build_leaf(build_gauge(ex.system, ex.sections, ex.reduced))
    names = cfg.checks or default_checks(ex)
    for n in names:
        if n not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown check {n!r}; choose from {', '.join(CHECKS)}")
    rng = np.random.default_rng(cfg.seed)
    if cfg.omit_gauge:
        leaf = build_leaf(gauge)
    report = [run_check(n, ex, gauge, leaf, c, cfg.samples, rng) for n in names]
    print(f"{'check':<30}{'samples':>8}{'max residual':>16}{'tolerance':>12}  result", file=stdout)
    for r in report:
        print(f"{r['check']:<30}{r['samples']:>8}{r['max_residual']:>16.3e}{r['tolerance']:>12.1e}  "
              f"{'pass' if r['pass'] else 'FAIL'}", file=stdout)
    out = _out_dir(cfg)
    doc = {"system": cfg.system, "level": list(map(float, c)), "seed": cfg.seed,
           "omit_gauge": cfg.omit_gauge, "checks": report}
    if out:
        with open(os.path.join(out, "verify.json"), "w") as fh:
            json.dump(doc, fh, indent=2)
    else:
        print(json.dumps(doc), file=stdout)
    return 0 if all(r["pass"] for r in report) else 1


# ---------------------------------------------------------------------------
# reduce and momenta
# ---------------------------------------------------------------------------

QUOTIENT_RANGES = {
    "particle": [(-2.0, 2.0)],
    "snakeboard": [(0.5, math.pi - 0.5)],
    "chaplygin_ball": [(-0.6, 0.6), (-0.6, 0.6)],
    "solid_of_revolution": [(-0.9, 0.9)],
}


def cmd_reduce(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    """Table of ``omega_mu^B`` (upper triangle, leaf coordinate basis) on a grid."""
    ex = _example(cfg)
    c = _level(cfg, ex)
    leaf = build_leaf(build_gauge(ex.system, ex.sections, ex.reduced, omit_gauge=cfg.omit_gauge))
    m = leaf.m
    pm = np.full(m, 0.5) if cfg.leaf_momenta is None else cfg.leaf_momenta
    if len(pm) != m:
        raise ConfigError(f"leaf momenta need {m} entries")
    axes = [np.linspace(lo, hi, cfg.points) for lo, hi in QUOTIENT_RANGES[cfg.system]]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    names = [f"x_{i + 1}" for i in range(m)] + [f"p_{i + 1}" for i in range(m)]
    pairs = [(i, j) for i in range(2 * m) for j in range(i + 1, 2 * m)]
    header = names + [f"omega_{i + 1}{j + 1}" for i, j in pairs] + ["min_singular_value"]
    rows = []
    for qb in grid:
        xb = np.concatenate([qb, pm])
        W = omega_mu_matrix(leaf, c, xb)
        rows.append([*xb, *[W[i, j] for i, j in pairs], np.linalg.svd(W, compute_uv=False)[-1]])
    _write_table(cfg, "omega_mu.csv", header, rows, stdout)
    return 0


def cmd_momenta(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    """Assemble and solve the gauge-momentum ODE; table of ``F(gamma)``."""
    ex = _example(cfg)
    setup = ex.momentum_ode
    if setup is None:
        raise ConfigError(f"{cfg.system} has closed-form gauge symmetries and no momentum ODE")
    A = ex.oracles.get("momentum_A")
    F = ex.oracles.get("fundamental")
    if F is None:
        A = assemble_momentum_ode(ex.system, setup.xi_basis, setup.shape, setup.probe_point)
        F = solve_momentum_ode(A, setup.gamma_range, gamma0=setup.gamma0)
    k = setup.xi_basis.k
    header = (["gamma"] + [f"F_{i + 1}{j + 1}" for i in range(k) for j in range(k)]
              + [f"A_{i + 1}{j + 1}" for i in range(k) for j in range(k)] + ["det_F"])
    rows = []
    for g in np.linspace(*setup.gamma_range, cfg.points):
        Fg = F(g)
        rows.append([g, *Fg.ravel(), *np.asarray(A(g)).ravel(), np.linalg.det(Fg)])
    _write_table(cfg, "momenta.csv", header, rows, stdout)
    return 0


def _write_table(cfg, fname, header, rows, stdout):
    stdout = stdout or sys.stdout
    out = _out_dir(cfg)
    fh = open(os.path.join(out, fname), "w", newline="") if out else stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[_fmt(v) for v in row] for row in rows])
    finally:
        if out:
            fh.close()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", help=f"builtin system ({', '.join(NAMES)})")
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--level", help="momentum level c, comma separated")
    common.add_argument("--seed", type=int)
    common.add_argument("--output", help="output directory (default: standard output)")
    common.add_argument("--omit-gauge", action="store_true", dest="omit_gauge",
                        help="drop the gauge 2-form (negative control)")
    p = argparse.ArgumentParser(prog="nhreduce", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="integrate and export a trajectory")
    sim.add_argument("--dt", type=float)
    sim.add_argument("--t-final", type=float, dest="t_final")
    sim.add_argument("--tolerance", type=float, help="allowed relative drift")
    sim.add_argument("--adaptive", action="store_true", help="Dormand-Prince instead of RK4")
    ver = sub.add_parser("verify", parents=[common], help="run the verification checks")
    ver.add_argument("--samples", type=int)
    ver.add_argument("--checks", help=f"comma separated subset of: {', '.join(CHECKS)}")
    red = sub.add_parser("reduce", parents=[common], help="tabulate omega_mu on a grid")
    red.add_argument("--points", type=int)
    mom = sub.add_parser("momenta", parents=[common], help="solve the gauge-momentum ODE")
    mom.add_argument("--points", type=int)
    return p


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "reduce": cmd_reduce, "momenta": cmd_momenta}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
