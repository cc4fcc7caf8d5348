"""Command-line entry point.

    capstrip <command> [--config PATH] [--out DIR] [--threads N] [--seed N]
                       [--backend exact|symbol]

Commands: simulate, dispersion, limit, dno, orders, linear, taylor, selftest.
Exit codes: 0 success, 1 configuration error, 2 aborted run, 3 property failure.
The environment variable CAPSTRIP_OUT overrides ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED, EXIT_PROPERTY = 0, 1, 2, 3
COMMANDS = ("simulate", "dispersion", "limit", "dno", "orders", "linear", "taylor", "selftest")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

log = logging.getLogger("capstrip")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out", default="capstrip_out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    common.add_argument("--seed", type=int, default=0, help="seed for random shapes and fields")
    common.add_argument("--backend", choices=("exact", "symbol"), default=None,
                        help="Dirichlet-Neumann backend (overrides physics.backend)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="capstrip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


class _Run:
    """Per-invocation context: configuration, output directory, timings."""

    def __init__(self, args, cfg):
        self.args = args
        self.cfg = cfg
        self.out = os.environ.get("CAPSTRIP_OUT") or args.out
        os.makedirs(self.out, exist_ok=True)
        self.t0 = time.perf_counter()
        self.timings: dict[str, float] = {}

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def grid_info(self) -> dict:
        c = self.cfg
        return {"d": c.int("domain.d"), "n": c.int("domain.n"), "L": c.float("domain.L"),
                "M": c.int("domain.M")}

    def finish(self, code: int, extra: dict | None = None) -> int:
        from .formats import write_manifest

        self.timings["total"] = time.perf_counter() - self.t0
        info = {"exit_code": code, "seed": self.args.seed, "threads": self.args.threads,
                "backend": self.backend}
        info.update(extra or {})
        write_manifest(self.path("manifest.json"), self.args.command, self.cfg.as_dict(),
                       self.grid_info(), self.timings, info)
        return code

    @property
    def backend(self) -> str:
        return self.args.backend or self.cfg.get("physics.backend")

    def report(self, results, name: str = "report.csv") -> int:
        from .experiments import REPORT_COLUMNS
        from .formats import write_csv

        write_csv(self.path(name), REPORT_COLUMNS, [r.row() for r in results])
        for r in results:
            log.info("%-40s %-14.6g %-14s %s", r.name, r.measured,
                     f"{r.relation} {r.threshold:g}", "PASS" if r.passed else "FAIL")
        return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


# ---------------------------------------------------------------------------
# construction helpers

def _grid(cfg):
    from .spectral import TorusGrid
    return TorusGrid(cfg.int("domain.d"), cfg.int("domain.n"), cfg.float("domain.L"))


def _field_from_file(cfg, key, grid):
    from .config import ConfigError
    from .formats import FormatError, read_field

    try:
        header, values = read_field(cfg.path(key))
    except (OSError, FormatError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    if header.d != grid.d or header.n != grid.n or not math.isclose(header.L, grid.L):
        raise ConfigError(f"{key}: field grid (d={header.d}, n={header.n}, L={header.L}) "
                          f"does not match the domain")
    return values


def _bottom(cfg, grid):
    import numpy as np
    if cfg.get("physics.bottom_file"):
        return _field_from_file(cfg, "physics.bottom_file", grid)
    return np.full(grid.shape, -cfg.float("physics.depth"))


def _params(cfg, backend, kappa=None):
    from .evolution import PhysParams
    from .geometry import StripSampling

    grid = _grid(cfg)
    return PhysParams(StripSampling(grid, cfg.int("domain.M")), _bottom(cfg, grid),
                      g=cfg.float("physics.g"),
                      kappa=cfg.float("physics.kappa") if kappa is None else kappa,
                      h0=cfg.float("physics.h0"), backend=backend,
                      c_cfl=cfg.float("integrator.c_cfl"))


def initial_state(cfg, grid):
    import numpy as np
    from .evolution import WaveState

    preset = cfg.get("initial.preset")
    amp = cfg.float("initial.amplitude")
    x = grid.x
    zero = np.zeros(grid.shape)
    if preset == "equilibrium":
        return WaveState(zero, zero.copy())
    if preset == "single_mode":
        k = cfg.int("initial.k") * 2 * math.pi / grid.L
        return WaveState(amp * np.cos(k * x[0]), zero)
    if preset == "gaussian_bump":
        w = cfg.float("initial.width")
        r2 = sum((xi - grid.L / 2) ** 2 for xi in x)
        bump = amp * np.exp(-r2 / (2 * w**2))
        return WaveState(bump - bump.mean(), zero)
    zeta = _field_from_file(cfg, "initial.zeta_file", grid)
    psi = _field_from_file(cfg, "initial.psi_file", grid) if cfg.get("initial.psi_file") else zero
    return WaveState(zeta, psi)


def _shape(cfg, seed: int):
    import numpy as np
    from .geometry import wavy_shape

    grid = _grid(cfg)
    amp = cfg.float("shape.amplitude")
    bamp = cfg.float("shape.bottom_amplitude")
    phase = 0.0
    if cfg.bool("shape.random"):
        rng = np.random.default_rng(seed)
        amp *= rng.uniform(0.5, 1.0)
        bamp *= rng.uniform(0.5, 1.0)
        phase = rng.uniform(0, 2 * math.pi)
    return wavy_shape(grid, amp, cfg.float("physics.depth"), bamp, phase)


def _need_1d(cfg, what: str):
    from .config import ConfigError
    if cfg.int("domain.d") != 1:
        raise ConfigError(f"{what} runs in one horizontal dimension (domain.d = 1)")


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(run: _Run) -> int:
    from .config import ConfigError
    from .evolution import DIAGNOSTIC_COLUMNS, SimulationError, check_admissible, simulate
    from .formats import write_csv, write_field
    from .geometry import GeometryError

    cfg = run.cfg
    try:
        params = _params(cfg, run.backend)
        U0 = initial_state(cfg, params.grid)
        check_admissible(U0, params)
    except (SimulationError, GeometryError, ValueError) as exc:
        raise ConfigError(f"inadmissible initial data: {exc}") from exc
    stride = cfg.int("integrator.stride")
    t = time.perf_counter()
    traj = simulate(U0, params, cfg.float("integrator.T"), cfg.dt(), snapshot_stride=stride)
    run.timings["simulate"] = time.perf_counter() - t
    write_csv(run.path("diagnostics.csv"), DIAGNOSTIC_COLUMNS, traj.diagnostics)
    L = params.grid.L
    for i, U in enumerate(traj.snapshots):
        write_field(run.path(f"zeta_{i:05d}.cfield"), U.zeta, L, "zeta", U.t)
        write_field(run.path(f"psi_{i:05d}.cfield"), U.psi, L, "psi", U.t)
    if traj.aborted:
        log.error("run aborted: %s", traj.reason)
        return run.finish(EXIT_ABORTED, {"aborted": True, "reason": traj.reason})
    return run.finish(EXIT_OK, {"aborted": False, "snapshots": len(traj.snapshots)})


def cmd_dispersion(run: _Run) -> int:
    from .config import ConfigError
    from .experiments import DISPERSION_COLUMNS, check, dispersion_experiment
    from .formats import write_csv

    cfg = run.cfg
    _need_1d(cfg, "dispersion")
    if cfg.get("physics.bottom_file"):
        raise ConfigError("dispersion needs a flat bottom")
    t = time.perf_counter()
    try:
        rows = dispersion_experiment(cfg.ints("dispersion.k"), cfg.floats("dispersion.kappa"),
                                     cfg.int("domain.n"), cfg.int("domain.M"),
                                     cfg.float("dispersion.amplitude"),
                                     cfg.float("dispersion.periods"), cfg.float("physics.g"),
                                     cfg.float("physics.depth"), cfg.float("domain.L"), run.backend)
    except ValueError as exc:
        log.error("frequency fit failed: %s", exc)
        return run.finish(EXIT_PROPERTY, {"error": str(exc)})
    run.timings["dispersion"] = time.perf_counter() - t
    write_csv(run.path("dispersion.csv"), DISPERSION_COLUMNS, rows)
    results = [check(f"dispersion_k{k}_kappa{kap:g}", err, "<=", 1e-2) for k, kap, _, _, err in rows]
    return run.finish(run.report(results))


def cmd_limit(run: _Run) -> int:
    from .experiments import LIMIT_COLUMNS, check, limit_experiment, limit_properties
    from .formats import write_csv

    cfg = run.cfg
    _need_1d(cfg, "limit")
    t = time.perf_counter()
    kappa0 = cfg.float("limit.kappa0")
    rows, summary = limit_experiment(kappa0, cfg.float("limit.amplitude"), cfg.float("limit.T"),
                                     cfg.int("domain.n"), cfg.int("domain.M"))
    run.timings["limit"] = time.perf_counter() - t
    write_csv(run.path("limit.csv"), LIMIT_COLUMNS, rows)
    if summary["aborted"]:
        log.error("member run aborted: %s", summary["reason"])
        return run.finish(EXIT_ABORTED, summary)
    if kappa0 == 0:
        results = [check("limit_delta_at_zero", max(r[1] for r in rows), "<=", 0.0)]
    else:
        results = limit_properties(rows, summary)
    return run.finish(run.report(results), summary)


def cmd_dno(run: _Run) -> int:
    from .experiments import dno_properties

    cfg = run.cfg
    shape = _shape(cfg, run.args.seed)
    results = dno_properties(cfg.int("domain.d"), cfg.int("domain.n"), cfg.int("domain.M"),
                             run.args.seed, shapes=[shape],
                             frequencies=cfg.floats("orders.frequencies"))
    return run.finish(run.report(results))


def cmd_orders(run: _Run) -> int:
    from .config import ConfigError
    from .experiments import order_properties

    cfg = run.cfg
    shape = _shape(cfg, run.args.seed)
    try:
        results = order_properties(cfg.int("domain.d"), cfg.int("domain.n"), cfg.int("domain.M"),
                                   cfg.floats("orders.frequencies"), shapes=[shape],
                                   seed=run.args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return run.finish(run.report(results, "orders.csv"))


def cmd_linear(run: _Run) -> int:
    from .experiments import ENERGY_COLUMNS, check, energy_run
    from .formats import write_csv

    cfg = run.cfg
    _need_1d(cfg, "linear")
    dt = cfg.dt("linear.dt")
    rows, fit, (c1, c2), (amin, _) = energy_run(
        cfg.float("linear.amplitude"), cfg.float("linear.T"), dt if dt else 0.05,
        cfg.int("domain.n"), cfg.int("domain.M"), cfg.float("physics.kappa"), run.args.seed)
    write_csv(run.path("energy.csv"), ENERGY_COLUMNS + ("fitted_lambda",),
              [r + (fit.rate,) for r in rows])
    results = [
        check("gronwall_rate_finite", fit.rate, "<", math.inf),
        check("log_energy_curvature", fit.curvature, "<=", 0.1),
        check("equivalence_ratio_c2_over_c1", c2 / c1, "<", 1e4),
        check("levy_min_a", amin, ">=", 0.5 * cfg.float("physics.g")),
    ]
    return run.finish(run.report(results))


def cmd_taylor(run: _Run) -> int:
    from .experiments import TAYLOR_COLUMNS, check, taylor_comparison
    from .formats import write_csv

    cfg = run.cfg
    _need_1d(cfg, "taylor")
    table, diff, disc, amin = taylor_comparison(cfg.float("taylor.amplitude"),
                                                cfg.float("taylor.kappa"), cfg.int("domain.n"),
                                                cfg.int("domain.M"))
    write_csv(run.path("taylor.csv"), TAYLOR_COLUMNS, table)
    results = [
        check("taylor_trace_vs_formula", diff, "<=", max(1e-3, 10 * disc)),
        check("taylor_min_over_half_g", amin / (0.5 * cfg.float("physics.g")), ">=", 1.0),
    ]
    return run.finish(run.report(results), {"discretisation_error": disc})


def cmd_selftest(run: _Run) -> int:
    from .experiments import selftest
    return run.finish(run.report(selftest(run.args.seed)))


_DISPATCH = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("capstrip: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .config import ConfigError, RunConfig

    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        run = _Run(args, cfg)
        return _DISPATCH[args.command](run)
    except ConfigError as exc:
        print(f"capstrip: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
