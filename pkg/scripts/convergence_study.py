#!/usr/bin/env python3
"""Timestep refinement study, deterministic and stochastic.

Deterministic mode integrates the unforced nonlinear system at a ladder of
timesteps against a shared fine reference and prints the terminal-state
errors with their halving ratios.  Stochastic mode refines a common Brownian
path by summing fine increments into coarse ones and prints strong errors
with observed orders.  Output is CSV on stdout.

Example:
    python3 scripts/convergence_study.py --mode both --paths 32
"""

import argparse

import numpy as np

from stochns.dynamics import SolverConfig, _StepPlan, _leray_inplace, _step_core
from stochns.noise import NoiseModel, path_rng
from stochns.spectral import make_grid, random_field


def terminal_state(u0, cfg, model=None, increments=None):
    plan = _StepPlan(u0.grid, cfg, model)
    u = _leray_inplace(u0.grid, plan.truncate(u0.coeffs.copy()))
    ustar = u.copy()
    for i in range(int(round(cfg.T / cfg.dt))):
        dW = increments[i] if increments is not None else np.zeros(0)
        u, ustar = _step_core(plan, u, ustar, dW, 1.0)
    return u


def deterministic(args) -> None:
    grid = make_grid(args.d, args.N)
    u0 = random_field(grid, np.random.default_rng(args.seed), decay=2.0, v_norm=1.0)
    dts = (4e-3, 2e-3, 1e-3)
    ref_dt = 2.5e-4
    states = {
        dt: terminal_state(u0, SolverConfig(nu=args.nu, dt=dt, T=args.T))
        for dt in dts + (ref_dt,)
    }
    errs = {dt: float(np.sqrt(np.sum(np.abs(states[dt] - states[ref_dt]) ** 2))) for dt in dts}
    print("# deterministic refinement, shared reference dt =", ref_dt)
    print("dt,error,ratio_to_next")
    for i, dt in enumerate(dts):
        ratio = errs[dt] / errs[dts[i + 1]] if i + 1 < len(dts) else float("nan")
        print(f"{dt:g},{errs[dt]:.6e},{ratio:.4f}")
    print(f"# per-halving ratio across the set: {(errs[dts[0]] / errs[dts[-1]]) ** 0.5:.4f}")


def stochastic(args) -> None:
    grid = make_grid(args.d, min(args.N, 16))
    u0 = random_field(grid, np.random.default_rng(args.seed), decay=2.0, v_norm=1.0)
    model = NoiseModel(sigma=(0.1, 0.1))
    T = 0.5
    levels = (5e-3, 2.5e-3, 1.25e-3)
    ref_dt = 3.125e-4
    nref = int(round(T / ref_dt))
    errs = {dt: [] for dt in levels}
    for p in range(args.paths):
        rng = path_rng(args.seed, p)
        fine = rng.normal(0.0, np.sqrt(ref_dt), size=(nref, model.K))
        uref = terminal_state(u0, SolverConfig(nu=args.nu, dt=ref_dt, T=T), model, fine)
        for dt in levels:
            f = int(round(dt / ref_dt))
            coarse = fine.reshape(nref // f, f, model.K).sum(axis=1)
            u = terminal_state(u0, SolverConfig(nu=args.nu, dt=dt, T=T), model, coarse)
            errs[dt].append(float(np.sqrt(np.sum(np.abs(u - uref) ** 2))))
    means = {dt: float(np.mean(errs[dt])) for dt in levels}
    print(f"# stochastic refinement, {args.paths} common Brownian paths, reference dt = {ref_dt}")
    print("dt,strong_error,observed_order_to_next")
    for i, dt in enumerate(levels):
        order = (
            float(np.log2(means[dt] / means[levels[i + 1]]))
            if i + 1 < len(levels)
            else float("nan")
        )
        print(f"{dt:g},{means[dt]:.6e},{order:.3f}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("deterministic", "stochastic", "both"), default="both")
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--nu", type=float, default=0.05)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--paths", type=int, default=32)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    if args.mode in ("deterministic", "both"):
        deterministic(args)
    if args.mode in ("stochastic", "both"):
        stochastic(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
