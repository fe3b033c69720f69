"""Command-line entry point.

Commands: ``simulate`` (one path), ``verify`` (identity and hypothesis
suites), ``ensemble`` (Monte Carlo plus statistical checks), ``constants``
(bilinear estimate probes only), ``bound`` (threshold algebra table).

Exit codes: 0 success/PASS, 1 configuration error, 2 simulate terminated in
overflow or blow-up, 3 a verification hypothesis failed, 4 a statistical
check failed, 5 I/O failure.  Every command is deterministic given the
config and seeds; output files are replaced atomically (temp file + rename)
and results are invariant under ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .checks import cancellation_check, oracle_check, spectral_checks
from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import evolve
from .ensemble import (
    VARIANT_HM,
    bound_value,
    check_probability_bound,
    check_supermartingale,
    delta_for_epsilon,
    derive_bound_params,
    run_ensemble,
)
from .noise import NoiseModel, path_rng, verify_hypotheses
from .nonlinear import PROBE_IDS, empirical_constants, probe_estimate
from .spectral import TorusGrid

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_OVERFLOW = 2
EXIT_HYPOTHESIS = 3
EXIT_STATISTICAL = 4
EXIT_IO = 5


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_files(out_dir: str, files: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        _write_atomic(os.path.join(out_dir, name), text)


def _np_default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_np_default)


def _calibrated_c1(cfg: ExperimentConfig, variant: str) -> float:
    consts = empirical_constants(
        cfg.grid,
        samples=500,
        seed=cfg.ensemble.base_seed if cfg.ensemble else 0,
        m=cfg.bound.m if cfg.bound else 3,
    )
    if variant == VARIANT_HM:
        return consts["c_hm"]
    if consts["eb1_degenerate"]:
        # gradient-energy production vanishes identically on the 2d torus, so
        # the probe cannot calibrate C1; any positive constant is admissible
        print("note: EB1 probe degenerate on this grid; using C1 = 1.0", file=sys.stderr)
        return 1.0
    return consts["c_hgp"]


# -- commands ----------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    base_seed = cfg.ensemble.base_seed if cfg.ensemble else 0
    rng = path_rng(base_seed, 0)
    u0 = cfg.initial.build(cfg.grid)
    # with an explicitly calibrated bound the path stops at the threshold
    stop_level = None
    if cfg.bound is not None and cfg.bound.c1 is not None:
        try:
            params = derive_bound_params(
                cfg.bound.a, cfg.bound.b, cfg.bound.c1, cfg.bound.c2,
                cfg.noise, variant=cfg.bound.variant, m=cfg.bound.m,
            )
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        stop_level = (params.norm_kind, params.threshold)
    record = evolve(
        u0, cfg.solver, cfg.noise, rng,
        m=cfg.bound.m if cfg.bound else 3,
        stop_level=stop_level,
    )
    try:
        _emit_files(out_dir, {"path_0.csv": record.csv_text()})
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    summary = {
        "status": record.status,
        "hits": record.hits,
        "terminal": {
            "t": record.t[-1],
            "norm_h": record.h[-1],
            "norm_v": record.v[-1],
            "blowup_functional": record.blowup[-1],
        },
        "samples": len(record.t),
        "seed": {"base": base_seed, "path": 0},
    }
    print(_json_line(summary))
    return EXIT_OK if record.status in ("survived", "stopped") else EXIT_OVERFLOW


def cmd_verify(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    base_seed = cfg.ensemble.base_seed if cfg.ensemble else 0
    m = cfg.bound.m if cfg.bound else 3
    report: dict = {"grid": {"d": cfg.grid.d, "N": cfg.grid.N}}

    spectral = spectral_checks(cfg.grid, samples=50, seed=base_seed)
    report["spectral"] = [c.to_json_dict() for c in spectral]

    oracle_grid = TorusGrid(cfg.grid.d, 4, cfg.grid.dealias_fraction)
    oracles = [oracle_check(oracle_grid, pairs=20, seed=base_seed)]
    if cfg.grid.N <= 16:
        oracles.append(oracle_check(cfg.grid, pairs=20, seed=base_seed))
    report["oracle"] = [c.to_json_dict() for c in oracles]

    cancel = cancellation_check(cfg.grid, pairs=100, seed=base_seed)
    report["cancellation"] = cancel.to_json_dict()

    noise_report = verify_hypotheses(cfg.noise, cfg.grid, trials=5, seed=base_seed, m=m)
    report["noise"] = noise_report.to_json_dict()

    probe_ids = [pid for pid in PROBE_IDS if not (pid == "EB-d2" and cfg.grid.d != 2)]
    probes = [probe_estimate(pid, 50, base_seed, cfg.grid, m=m) for pid in probe_ids]
    report["probes"] = [p.to_json_dict() for p in probes]

    failures: list[str] = []
    failures += [c.name for c in spectral if not c.passed]
    failures += [c.name for c in oracles if not c.passed]
    if not cancel.passed:
        failures.append(cancel.name)
    first_noise = noise_report.first_failure()
    if first_noise is not None:
        failures.append(first_noise.name)
    failures += [p.estimate_id for p in probes if not np.isfinite(p.max_ratio)]
    report["pass"] = not failures

    print(_json_line(report))
    if failures:
        print(f"hypothesis violated: {failures[0]}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_ensemble(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    if cfg.ensemble is None:
        print("config error: missing required key `ensemble`", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.ensemble.paths < 30:
        print("config error: key `ensemble.paths` must be >= 30 for statistical runs",
              file=sys.stderr)
        return EXIT_CONFIG

    bound = cfg.bound
    params = None
    if bound is not None:
        c1 = bound.c1 if bound.c1 is not None else _calibrated_c1(cfg, bound.variant)
        try:
            params = derive_bound_params(
                bound.a, bound.b, c1, bound.c2, cfg.noise, variant=bound.variant, m=bound.m
            )
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    u0 = cfg.initial.build(cfg.grid)
    result = run_ensemble(
        cfg.solver,
        cfg.noise,
        u0,
        cfg.ensemble.paths,
        cfg.ensemble.base_seed,
        threads=threads,
        norm_kind=params.norm_kind if params else "V",
        m=bound.m if bound else 3,
    )

    summary: dict = {
        "config": {
            "grid": {"d": cfg.grid.d, "N": cfg.grid.N},
            "solver": {
                "nu": cfg.solver.nu, "dt": cfg.solver.dt, "T": cfg.solver.T,
                "n": cfg.solver.n, "overflow_guard": cfg.solver.overflow_guard,
            },
        },
        "noise": {"K": cfg.noise.K, "sigma": list(cfg.noise.sigma), "kind": cfg.noise.kind},
        "paths": result.paths,
        "mean_u0_norm": result.mean_u0_norm,
        "seeds": {"base": cfg.ensemble.base_seed},
        "statuses": {
            status: sum(1 for r in result.records if r.status == status)
            for status in sorted({r.status for r in result.records})
        },
    }

    failed = False
    if params is not None:
        summary["bound_params"] = params.to_json_dict()
        survival = check_probability_bound(result, params)
        supermart = check_supermartingale(result, params)
        summary["survivors"] = survival.survivors
        summary["p_hat"] = survival.p_hat
        summary["ci"] = [survival.ci_low, survival.ci_high]
        summary["bound_value"] = survival.bound
        summary["survival"] = survival.to_json_dict()
        summary["supermartingale"] = supermart.to_json_dict()
        summary["delta_for_epsilon"] = delta_for_epsilon(bound.epsilon, params)
        summary["verdict_note"] = "discrete surrogate (finite dt, finite level, empirical constants)"
        failed = (not survival.vacuous and not survival.passed) or not supermart.passed

    files = {f"path_{i}.csv": rec.csv_text() for i, rec in enumerate(result.records)}
    files["summary.json"] = _json_line(summary) + "\n"
    try:
        _emit_files(out_dir, files)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_json_line(summary))
    return EXIT_STATISTICAL if failed else EXIT_OK


def cmd_constants(cfg: ExperimentConfig, out_dir: str, threads: int, samples: int) -> int:
    base_seed = cfg.ensemble.base_seed if cfg.ensemble else 0
    m = cfg.bound.m if cfg.bound else 3
    probe_ids = [pid for pid in PROBE_IDS if not (pid == "EB-d2" and cfg.grid.d != 2)]
    for pid in probe_ids:
        rep = probe_estimate(pid, samples, base_seed, cfg.grid, m=m)
        print(_json_line(rep.to_json_dict()))
    consts = empirical_constants(cfg.grid, samples=samples, seed=base_seed, m=m)
    consts.pop("reports")
    print(_json_line({"derived": consts}))
    return EXIT_OK


def cmd_bound(args) -> int:
    try:
        sigma = tuple(float(s) for s in args.sigma.split(",") if s.strip())
        model = NoiseModel(sigma=sigma)
        params = derive_bound_params(
            args.a, args.b, args.c1, args.c2, model, variant=args.variant, m=args.m
        )
        delta = delta_for_epsilon(args.epsilon, params)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    lines = ["quantity,value"]
    for key, val in (
        ("a", args.a), ("b", args.b), ("r", params.r), ("lambda", params.lam),
        ("xi", params.xi), ("alpha_sq", params.alpha_sq), ("beta_sq", params.beta_sq),
        ("C1", params.c1), ("C2", params.c2), ("threshold", params.threshold),
        ("epsilon", args.epsilon), ("delta", delta),
    ):
        lines.append(f"{key},{val:.17g}")
    if args.sweep_c2:
        lines.append("")
        lines.append("c2,lambda,delta")
        for c2 in (0.5, 1.0, 2.0, 4.0):
            p2 = derive_bound_params(args.a, args.b, args.c1, c2, model,
                                     variant=args.variant, m=args.m)
            lines.append(f"{c2:.17g},{p2.lam:.17g},{delta_for_epsilon(args.epsilon, p2):.17g}")
    lines.append("")
    lines.append("e_u0,bound_value,epsilon")
    grid_points = [delta * s for s in
                   (0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0)]
    grid_points += [params.threshold * s for s in (0.5, 1.0)]
    for e_u0 in grid_points:
        bnd = bound_value(params, e_u0)
        lines.append(f"{e_u0:.17g},{bnd:.17g},{1.0 - bnd:.17g}")
    print("\n".join(lines))
    return EXIT_OK


# -- wiring --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochns", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the flat JSON config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results are thread-count invariant)")
        return p

    add_config_command("simulate", "evolve one path, write its CSV, print a summary")
    add_config_command("verify", "run identity, oracle and hypothesis suites")
    add_config_command("ensemble", "Monte Carlo run plus statistical checks")
    pc = add_config_command("constants", "bilinear estimate probes only")
    pc.add_argument("--samples", type=int, default=500)

    pb = sub.add_parser("bound", help="print threshold algebra as CSV")
    pb.add_argument("--a", type=float, default=1.5)
    pb.add_argument("--b", type=float, default=1.5)
    pb.add_argument("--c1", type=float, default=1.0)
    pb.add_argument("--c2", type=float, default=1.0)
    pb.add_argument("--sigma", default="0.1,0.1", help="comma-separated noise coefficients")
    pb.add_argument("--epsilon", type=float, default=0.5)
    pb.add_argument("--variant", choices=("v", "hm"), default="v")
    pb.add_argument("--m", type=int, default=3)
    pb.add_argument("--sweep-c2", action="store_true", help="also print a C2 sensitivity block")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "bound":
        return cmd_bound(args)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "simulate":
        return cmd_simulate(cfg, args.out, args.threads)
    if args.command == "verify":
        return cmd_verify(cfg, args.out, args.threads)
    if args.command == "ensemble":
        return cmd_ensemble(cfg, args.out, args.threads)
    if args.command == "constants":
        return cmd_constants(cfg, args.out, args.threads, args.samples)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
