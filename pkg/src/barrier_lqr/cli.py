"""Scenario configuration and batch execution.

Scenario files are flat key-value text (INI dialect) with sections for the
plant, costs, barrier, and solver; matrices are row-major number lists with
dimensions given explicitly.  Unknown sections or keys are rejected.  The
``solve``, ``audit``, ``sweep``, and ``dump-config`` subcommands write CSV
summaries, trajectory tables, and SVG plots into a scenario-scoped output
directory.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence
(best-effort artifacts are still written), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .barrier import conjugate, make_log_barrier
from .errors import BarrierLqrError, ConfigError, IntegrationDivergedError
from .figures import emit_barrier_figure, fmt12, phase_plot_svg, write_csv
from .lti import Grid, Plant, Problem, default_grid, violation_measure
from .shooting import ShootingConfig, ShootingResult, solve_tpbvp, unconstrained_reference
from .verify import DualityGridSpec, duality_audit, m_sweep, saddle_audit

MODES = ("constrained", "unconstrained_reference", "m_sweep", "audits")
DEFAULT_SEED = 2026

_SECTION_KEYS = {
    "scenario": {"name", "mode", "initial_state", "grid_n", "m_list", "seed", "output_dir"},
    "plant": {"n", "m", "a", "b"},
    "cost": {"horizon", "state_weight", "control_weight", "terminal_p", "terminal_target"},
    "barrier": {"kind", "radius", "truncation"},
    "solver": {"max_iters", "simplex_init_radius", "residual_tol", "restart_count",
               "fixed_point_damping"},
}


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: a problem instance plus execution settings."""

    name: str
    mode: str
    problem: Problem
    initial_state: np.ndarray
    grid_N: int | None
    M_list: tuple[float, ...] | None
    seed: int
    output_dir: str | None
    solver: ShootingConfig


def _floats(text: str, count: int, section: str, key: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(f"could not parse numbers: {exc}", section=section, key=key)
    if count >= 0 and vals.size != count:
        raise ConfigError(f"expected {count} numbers, got {vals.size}", section=section, key=key)
    return vals


def _get(cp, section: str, key: str, default=None) -> str | None:
    if cp.has_option(section, key):
        return cp.get(section, key)
    if default is not None:
        return default
    return None


def _require(cp, section: str, key: str) -> str:
    val = _get(cp, section, key)
    if val is None:
        raise ConfigError("missing required key", section=section, key=key)
    return val


def parse_scenario_text(text: str, origin: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"parse failure in {origin}: {exc}")
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError("unknown section", section=section)
        for key in cp.options(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigError("unknown key", section=section, key=key)
    for required in ("scenario", "plant", "cost", "barrier"):
        if not cp.has_section(required):
            raise ConfigError("missing required section", section=required)

    n = int(_require(cp, "plant", "n"))
    m = int(_require(cp, "plant", "m"))
    A = _floats(_require(cp, "plant", "a"), n * n, "plant", "a").reshape(n, n)
    B = _floats(_require(cp, "plant", "b"), n * m, "plant", "b").reshape(n, m)

    kind = _require(cp, "barrier", "kind").strip().lower()
    if kind != "log":
        raise ConfigError(f"unsupported barrier kind '{kind}' (scenario files support 'log')",
                          section="barrier", key="kind")
    radius = float(_require(cp, "barrier", "radius"))
    truncation = float(_require(cp, "barrier", "truncation"))

    horizon = float(_require(cp, "cost", "horizon"))
    K = float(_require(cp, "cost", "state_weight"))
    kappa = float(_require(cp, "cost", "control_weight"))
    P_t = _floats(_require(cp, "cost", "terminal_p"), n * n, "cost", "terminal_p").reshape(n, n)
    z = _floats(_require(cp, "cost", "terminal_target"), n, "cost", "terminal_target")

    name = _require(cp, "scenario", "name").strip()
    mode = _require(cp, "scenario", "mode").strip()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", section="scenario", key="mode")
    x0 = _floats(_require(cp, "scenario", "initial_state"), n, "scenario", "initial_state")
    grid_n_raw = _get(cp, "scenario", "grid_n")
    grid_N = int(grid_n_raw) if grid_n_raw is not None else None
    m_list_raw = _get(cp, "scenario", "m_list")
    M_list = tuple(float(v) for v in _floats(m_list_raw, -1, "scenario", "m_list")) \
        if m_list_raw is not None else None
    seed_raw = _get(cp, "scenario", "seed")
    seed = int(seed_raw) if seed_raw is not None else DEFAULT_SEED
    output_dir = _get(cp, "scenario", "output_dir")

    solver_kwargs = {}
    if cp.has_section("solver"):
        casts = {"max_iters": int, "simplex_init_radius": float, "residual_tol": float,
                 "restart_count": int, "fixed_point_damping": float}
        for key, cast in casts.items():
            raw = _get(cp, "solver", key)
            if raw is not None:
                solver_kwargs[key] = cast(raw)

    try:
        problem = Problem(
            plant=Plant(A=A, B=B), horizon=horizon, K=K, kappa=kappa,
            P_t=P_t, z=z, dual=conjugate(make_log_barrier(radius)), M=truncation,
        )
        solver = ShootingConfig(**solver_kwargs)
    except BarrierLqrError as exc:
        raise ConfigError(str(exc))
    if mode == "m_sweep" and M_list is None:
        raise ConfigError("m_sweep mode requires m_list", section="scenario", key="m_list")
    return Scenario(name=name, mode=mode, problem=problem, initial_state=x0,
                    grid_N=grid_N, M_list=M_list, seed=seed, output_dir=output_dir,
                    solver=solver)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}")
    return parse_scenario_text(text, origin=str(path))


def _nums(values) -> str:
    return " ".join(fmt12(v) for v in np.asarray(values).ravel())


def scenario_to_text(s: Scenario) -> str:
    """Canonical serialization; parsing its output reproduces the scenario."""
    p = s.problem
    lines = [
        "[scenario]",
        f"name = {s.name}",
        f"mode = {s.mode}",
        f"initial_state = {_nums(s.initial_state)}",
    ]
    if s.grid_N is not None:
        lines.append(f"grid_n = {s.grid_N}")
    if s.M_list is not None:
        lines.append(f"m_list = {_nums(s.M_list)}")
    lines.append(f"seed = {s.seed}")
    if s.output_dir is not None:
        lines.append(f"output_dir = {s.output_dir}")
    lines += [
        "",
        "[plant]",
        f"n = {p.plant.n}",
        f"m = {p.plant.m}",
        f"a = {_nums(p.plant.A)}",
        f"b = {_nums(p.plant.B)}",
        "",
        "[cost]",
        f"horizon = {fmt12(p.horizon)}",
        f"state_weight = {fmt12(p.K)}",
        f"control_weight = {fmt12(p.kappa)}",
        f"terminal_p = {_nums(p.P_t)}",
        f"terminal_target = {_nums(p.z)}",
        "",
        "[barrier]",
        "kind = log",
        f"radius = {fmt12(p.dual.spec.b)}",
        f"truncation = {fmt12(p.M)}",
        "",
        "[solver]",
        f"max_iters = {s.solver.max_iters}",
        f"simplex_init_radius = {fmt12(s.solver.simplex_init_radius)}",
        f"residual_tol = {fmt12(s.solver.residual_tol)}",
        f"restart_count = {s.solver.restart_count}",
        f"fixed_point_damping = {fmt12(s.solver.fixed_point_damping)}",
    ]
    return "\n".join(lines) + "\n"


# -- bundled scenarios -------------------------------------------------------


def _example_scenario(name: str, mode: str, *, z, P_t_scale: float,
                      M_list=None, seed: int = DEFAULT_SEED) -> Scenario:
    plant = Plant(A=np.array([[-1.0, 2.0], [-1.0, 1.0]]), B=np.array([[1.0], [0.0]]))
    problem = Problem(
        plant=plant, horizon=4.0, K=0.1, kappa=1.0,
        P_t=P_t_scale * np.eye(2), z=np.asarray(z, dtype=float),
        dual=conjugate(make_log_barrier(3.0)), M=50.0,
    )
    return Scenario(
        name=name, mode=mode, problem=problem,
        initial_state=np.array([1.6, -1.6]), grid_N=2000,
        M_list=tuple(M_list) if M_list else None, seed=seed, output_dir=None,
        solver=ShootingConfig(),
    )


def bundled_scenarios() -> dict[str, Scenario]:
    return {
        "case1_constrained": _example_scenario("case1_constrained", "constrained",
                                               z=[0.0, 0.0], P_t_scale=1.0),
        "case1_unconstrained": _example_scenario("case1_unconstrained", "unconstrained_reference",
                                                 z=[0.0, 0.0], P_t_scale=1.0),
        "case2": _example_scenario("case2", "constrained", z=[1.0, 1.0], P_t_scale=10.0),
        "case1_sweep": _example_scenario("case1_sweep", "m_sweep", z=[0.0, 0.0], P_t_scale=1.0,
                                         M_list=[5.0, 10.0, 25.0, 50.0, 100.0]),
        "case1_audit": _example_scenario("case1_audit", "audits", z=[0.0, 0.0], P_t_scale=1.0),
    }


# -- execution ---------------------------------------------------------------


def _write_solution_artifacts(scenario: Scenario, result: ShootingResult,
                              grid: Grid, out: Path) -> None:
    p = scenario.problem
    states = result.trajectory.states
    controls = result.control.samples
    norms = result.trajectory.norms()
    header = (["s"] + [f"xi_{i+1}" for i in range(p.plant.n)] + ["norm_xi"]
              + [f"u_{j+1}" for j in range(p.plant.m)] + ["alpha"])
    rows = [
        [grid.times[k], *states[k], norms[k], *controls[k], result.alpha[k]]
        for k in range(grid.N + 1)
    ]
    write_csv(out / "trajectory.csv", header, rows)
    mu = violation_measure(p, result.trajectory, grid)
    write_csv(
        out / "summary.csv",
        ["value", "residual", "max_alpha", "violation_measure", "iterations", "converged"],
        [[result.value, result.residual, float(np.max(result.alpha)), mu,
          result.iterations, int(result.converged)]],
    )
    phase_plot_svg(result.trajectory, p.b, grid, out / "phase.svg",
                   f"{scenario.name}: |state| vs constraint radius {fmt12(p.b)}")


def _execute(scenario: Scenario, *, out_dir=None, grid_N=None) -> int:
    problem = scenario.problem
    N = grid_N or scenario.grid_N
    grid = Grid(N=N, horizon=problem.horizon) if N else default_grid(problem.horizon)
    out = Path(out_dir or scenario.output_dir or f"{scenario.name}_out")
    out.mkdir(parents=True, exist_ok=True)

    if scenario.mode == "constrained":
        result = solve_tpbvp(problem, scenario.initial_state, scenario.solver, grid)
        _write_solution_artifacts(scenario, result, grid, out)
        if not result.converged:
            print(f"{scenario.name}: no convergence (residual {result.residual:.3g})",
                  file=sys.stderr)
            return 2
        return 0

    if scenario.mode == "unconstrained_reference":
        result = unconstrained_reference(problem, scenario.initial_state, grid)
        _write_solution_artifacts(scenario, result, grid, out)
        return 0

    if scenario.mode == "m_sweep":
        report = m_sweep(problem, scenario.initial_state, scenario.M_list,
                         grid=grid, config=scenario.solver)
        write_csv(out / "sweep.csv", ["M", "value", "violation_measure", "beta", "converged"],
                  [[r["M"], r["value"], r["violation_measure"], r["beta"], r["converged"]]
                   for r in report.rows()])
        (out / "sweep.txt").write_text(report.to_text())
        if not all(report.converged):
            print(f"{scenario.name}: sweep had non-converged solves", file=sys.stderr)
            return 2
        return 0

    # audits: a constrained solve feeds the saddle audit; the duality audit
    # runs on the scenario's barrier.
    seed = int(os.environ.get("BARRIER_LQR_SEED", scenario.seed))
    result = solve_tpbvp(problem, scenario.initial_state, scenario.solver, grid)
    saddle = saddle_audit(problem, result, trials=100, seed=seed, grid=grid)
    dual = problem.dual
    M_list = list(scenario.M_list) if scenario.M_list else [-dual.phi0, 5.0, problem.M]
    duality = duality_audit(dual, M_list, DualityGridSpec(rho_max=1.5 * dual.spec.b2))
    (out / "audit.txt").write_text(saddle.to_text() + "\n" + duality.to_text())
    write_csv(out / "saddle.csv", ["trial", "alpha_margin", "control_margin"],
              [[r["trial"], r["alpha_margin"], r["control_margin"]] for r in saddle.rows()])
    write_csv(out / "duality.csv", ["check", "deviation", "resolution_bound"],
              [[i, r["deviation"], r["resolution_bound"]]
               for i, r in enumerate(duality.rows())])
    emit_barrier_figure(dual, problem.M, out / "barrier_figure")
    if not result.converged:
        print(f"{scenario.name}: audit solve did not converge", file=sys.stderr)
        return 2
    return 0


def run(scenario_file, *, out_dir=None, grid_N=None, mode=None, M_list=None) -> int:
    """Execute one scenario file; returns the process exit code."""
    try:
        scenario = parse_scenario(scenario_file)
        if mode is not None:
            scenario = replace(scenario, mode=mode)
        if M_list is not None:
            scenario = replace(scenario, M_list=tuple(M_list))
        if scenario.mode == "m_sweep" and scenario.M_list is None:
            raise ConfigError("m_sweep mode requires m_list", section="scenario", key="m_list")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return _execute(scenario, out_dir=out_dir, grid_N=grid_N)
    except IntegrationDivergedError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except BarrierLqrError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="barrier-lqr",
                                     description="Constrained linear regulator solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run scenario files")
    p_solve.add_argument("scenarios", nargs="+")
    p_solve.add_argument("--jobs", type=int, default=1)
    p_solve.add_argument("--grid-N", type=int, default=None, dest="grid_N")
    p_solve.add_argument("--out", default=None)

    p_audit = sub.add_parser("audit", help="run saddle and duality audits for a scenario")
    p_audit.add_argument("scenario")
    p_audit.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="sweep truncation levels for a scenario")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--M", required=True, help="comma-separated increasing levels")
    p_sweep.add_argument("--out", default=None)

    p_dump = sub.add_parser("dump-config", help="print a bundled scenario file")
    p_dump.add_argument("name", choices=sorted(bundled_scenarios().keys()))
    p_dump.add_argument("--out", default=None)

    args = parser.parse_args(argv)

    if args.command == "solve":
        if args.jobs > 1 and len(args.scenarios) > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(
                    lambda f: run(f, out_dir=args.out, grid_N=args.grid_N), args.scenarios))
        else:
            codes = [run(f, out_dir=args.out, grid_N=args.grid_N) for f in args.scenarios]
        return max(codes)

    if args.command == "audit":
        return run(args.scenario, out_dir=args.out, mode="audits")

    if args.command == "sweep":
        levels = [float(v) for v in args.M.split(",")]
        return run(args.scenario, out_dir=args.out, mode="m_sweep", M_list=levels)

    if args.command == "dump-config":
        text = scenario_to_text(bundled_scenarios()[args.name])
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
