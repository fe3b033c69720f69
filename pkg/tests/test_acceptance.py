"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The statistical criteria
(9, 10) share one 2000-path ensemble; expect several minutes of total runtime.
"""

import time

import numpy as np
import pytest

from stochns.checks import cancellation_check, spectral_checks
from stochns.dynamics import (
    CUTOFF_W1INF,
    CutoffConfig,
    SolverConfig,
    coupled_evolve,
    evolve,
    heat_flow,
    heat_flow_balance,
)
from stochns.ensemble import (
    VARIANT_HM,
    bound_value,
    check_probability_bound,
    check_supermartingale,
    delta_for_epsilon,
    derive_bound_params,
    run_ensemble,
    wilson_interval,
)
from stochns.noise import NoiseModel, hs_norm, path_rng, verify_hypotheses
from stochns.nonlinear import bilinear_B, bilinear_B_oracle
from stochns.spectral import make_grid, norms, pairing, random_field

MODEL = NoiseModel(sigma=(0.1, 0.1))


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"{criterion}: {detail}"


# -- shared heavy fixtures -----------------------------------------------------


@pytest.fixture(scope="module")
def bound_setup():
    """Bound parameters for the statistical criteria.

    The probe that would calibrate C1 is identically zero on the 2d torus
    (advection is orthogonal to Au there), so the documented fallback
    C1 = 1.0 applies; C2 keeps its default 1.0.
    """
    return derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)


@pytest.fixture(scope="module")
def survival_ensemble(bound_setup):
    """2000 paths of the statistical-test configuration: d=2, N=32, nu=0.1."""
    params = bound_setup
    grid = make_grid(2, 32)
    u0 = random_field(grid, np.random.default_rng(2025), decay=2.0,
                      v_norm=0.1 * params.threshold)
    cfg = SolverConfig(nu=0.1, dt=0.01, T=2.0)
    t0 = time.time()
    result = run_ensemble(cfg, MODEL, u0, 2000, base_seed=7, threads=4, sample_every=4)
    elapsed = time.time() - t0
    print(f"\n[shared ensemble: 2000 paths in {elapsed:.0f}s]")
    return result, elapsed


# -- criteria --------------------------------------------------------------------


def test_c01_spectral_exactness():
    t0 = time.time()
    failures = []
    for d, N in ((2, 32), (3, 16)):
        for check in spectral_checks(make_grid(d, N), samples=100, seed=1):
            if not check.passed:
                failures.append(f"d={d} N={N} {check.name} worst={check.worst:.3e}")
    elapsed = time.time() - t0
    report(
        "1 (spectral exactness)",
        not failures and elapsed < 10.0,
        f"100 fields on d2/N32 and d3/N16 in {elapsed:.1f}s"
        + (f"; failures: {failures}" if failures else ""),
    )


def test_c02_oracle_equivalence():
    t0 = time.time()
    worst = 0.0
    for d in (2, 3):
        grid = make_grid(d, 8)
        rng = np.random.default_rng(2)
        for _ in range(100):
            u, v = random_field(grid, rng), random_field(grid, rng)
            fast = bilinear_B(u, v)
            ref = bilinear_B_oracle(u, v)
            scale = np.max(np.abs(ref.coeffs))
            if scale > 0:
                worst = max(worst, float(np.max(np.abs(fast.coeffs - ref.coeffs))) / scale)
    elapsed = time.time() - t0
    report(
        "2 (oracle equivalence)",
        worst <= 1e-10 and elapsed < 60.0,
        f"200 pairs, worst relative gap {worst:.3e}, {elapsed:.1f}s",
    )


def test_c03_cancellation():
    worst = 0.0
    for grid, pairs, seed in ((make_grid(2, 32), 300, 3), (make_grid(3, 16), 200, 4)):
        res = cancellation_check(grid, pairs=pairs, seed=seed)
        worst = max(worst, res.worst)
    report(
        "3 (advection cancellation)",
        worst <= 1e-10,
        f"500 dealiased pairs, worst |<B(u,v),v>| / (||u|| ||v||^2) = {worst:.3e}",
    )


def test_c04_heat_flow_identities():
    grid = make_grid(2, 32)
    u0 = random_field(grid, np.random.default_rng(5), v_norm=1.0)
    nu, T = 0.37, 1.7
    # per-mode closed form
    traj = heat_flow(u0, T, nu)
    expected = u0.coeffs * np.exp(-nu * grid.k2 * T)
    mode_gap = float(np.max(np.abs(traj.coeffs - expected))) / float(np.max(np.abs(expected)))
    # dissipation balance with its sharp constant, closed-form integrals
    bal = heat_flow_balance(u0, T, nu)
    drop = norms(u0).h ** 2 - norms(traj).h ** 2
    gap_h = abs(drop - bal["two_nu_int_v"]) / drop
    drop_v = norms(u0).v ** 2 - norms(traj).v ** 2
    gap_v = abs(drop_v - bal["two_nu_int_da"]) / drop_v
    half = bal["int_da"] <= norms(u0).v ** 2 / (2 * nu) * (1 + 1e-12)
    report(
        "4 (heat-flow identities)",
        mode_gap <= 1e-14 and gap_h <= 1e-12 and gap_v <= 1e-12 and half,
        f"mode gap {mode_gap:.2e}, energy balance gaps {gap_h:.2e}/{gap_v:.2e}, "
        f"dissipation integral within ||u0||^2/(2 nu)",
    )


def test_c05_deterministic_convergence():
    t0 = time.time()
    grid = make_grid(2, 32)
    u0 = random_field(grid, np.random.default_rng(7), decay=2.0, v_norm=1.0)
    terminals = {}
    for dt in (4e-3, 2e-3, 1e-3, 2.5e-4):
        cfg = SolverConfig(nu=0.05, dt=dt, T=1.0)
        rec_field = _terminal_state(u0, cfg)
        terminals[dt] = rec_field
    ref = terminals[2.5e-4]
    errs = {
        dt: float(np.sqrt(np.sum(np.abs(terminals[dt] - ref) ** 2)))
        for dt in (4e-3, 2e-3, 1e-3)
    }
    r1 = errs[4e-3] / errs[2e-3]
    r2 = errs[2e-3] / errs[1e-3]
    per_halving = (errs[4e-3] / errs[1e-3]) ** 0.5
    elapsed = time.time() - t0
    monotone = errs[4e-3] > errs[2e-3] > errs[1e-3]
    report(
        "5 (deterministic convergence)",
        1.7 <= per_halving <= 2.3 and monotone and elapsed < 120.0,
        f"errors {errs[4e-3]:.3e}/{errs[2e-3]:.3e}/{errs[1e-3]:.3e}, adjacent ratios "
        f"{r1:.3f}, {r2:.3f}, per-halving ratio across the set {per_halving:.3f}, {elapsed:.0f}s",
    )


def _terminal_state(u0, cfg, increments=None, model=None):
    from stochns.dynamics import _StepPlan, _leray_inplace, _step_core

    grid = u0.grid
    plan = _StepPlan(grid, cfg, model)
    u = _leray_inplace(grid, plan.truncate(u0.coeffs.copy()))
    ustar = u.copy()
    steps = int(round(cfg.T / cfg.dt))
    for i in range(steps):
        dW = increments[i] if increments is not None else np.zeros(0)
        u, ustar = _step_core(plan, u, ustar, dW, 1.0)
    return u


def test_c06_stochastic_self_convergence():
    t0 = time.time()
    grid = make_grid(2, 16)
    u0 = random_field(grid, np.random.default_rng(11), decay=2.0, v_norm=1.0)
    T, nu = 0.5, 0.1
    dt_ref = 3.125e-4
    levels = (5e-3, 2.5e-3, 1.25e-3)
    nref = int(round(T / dt_ref))
    errs = {dt: [] for dt in levels}
    for p in range(64):
        rng = path_rng(99, p)
        fine = rng.normal(0.0, np.sqrt(dt_ref), size=(nref, MODEL.K))
        cfg_ref = SolverConfig(nu=nu, dt=dt_ref, T=T)
        uref = _terminal_state(u0, cfg_ref, increments=fine, model=MODEL)
        for dt in levels:
            f = int(round(dt / dt_ref))
            coarse = fine.reshape(nref // f, f, MODEL.K).sum(axis=1)
            cfg = SolverConfig(nu=nu, dt=dt, T=T)
            u = _terminal_state(u0, cfg, increments=coarse, model=MODEL)
            errs[dt].append(float(np.sqrt(np.sum(np.abs(u - uref) ** 2))))
    means = {dt: float(np.mean(errs[dt])) for dt in levels}
    order1 = float(np.log2(means[levels[0]] / means[levels[1]]))
    order2 = float(np.log2(means[levels[1]] / means[levels[2]]))
    elapsed = time.time() - t0
    report(
        "6 (stochastic self-convergence)",
        order1 >= 0.4 and order2 >= 0.4 and elapsed < 300.0,
        f"64 common-path refinements, strong errors "
        f"{means[levels[0]]:.3e}/{means[levels[1]]:.3e}/{means[levels[2]]:.3e}, "
        f"orders {order1:.2f}, {order2:.2f}, {elapsed:.0f}s",
    )


def test_c07_noise_hypothesis_verifier():
    worst = 0.0
    for sigma in ((0.1, 0.1), (0.3,), (0.05, 0.2, 0.4)):
        model = NoiseModel(sigma=sigma)
        grid = make_grid(2, 16)
        rng = np.random.default_rng(13)
        for _ in range(10):
            u = random_field(grid, rng)
            for space in ("H", "V", "DA", "Hm"):
                nsq = pairing(space, u, u, m=3)
                lhs = hs_norm(u, model, space, m=3)
                worst = max(worst, abs(lhs - model.alpha_sq * nsq) / (model.alpha_sq * nsq))
        rep = verify_hypotheses(model, grid, trials=5, seed=13, m=3)
        assert rep.passed
        assert model.alpha_sq < 2 * model.beta_sq  # strict gap
    report(
        "7 (noise hypothesis verifier)",
        worst <= 1e-10,
        f"alpha^2 = beta^2 = sum(sigma^2) in H/V/DA/H3, worst gap {worst:.2e}; "
        f"gap condition strict for every model",
    )


def test_c08_bound_algebra():
    p = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    ok_r = p.r == pytest.approx(4.0, rel=1e-14)
    ok_lam = all(
        derive_bound_params(1.5, 1.5, 1.0, c2, MODEL).lam
        == pytest.approx(1.0 / (2.0 + 4.0 * c2), rel=1e-12)
        for c2 in (0.25, 0.5, 1.0, 2.0, 4.0)
    )
    worst = 0.0
    combos = 0
    for eps in (0.05, 0.25, 0.5, 0.75, 0.95):
        for c1, c2 in ((0.3, 0.5), (1.0, 1.0), (2.5, 2.0), (7.0, 4.0)):
            pp = derive_bound_params(1.5, 1.5, c1, c2, MODEL)
            delta = delta_for_epsilon(eps, pp)
            worst = max(worst, abs((1.0 - bound_value(pp, delta)) - eps) / eps)
            combos += 1
    report(
        "8 (bound algebra)",
        ok_r and ok_lam and worst <= 1e-12 and combos == 20,
        f"r(3/2,3/2)=4, lambda=1/(2+4C2), inversion worst {worst:.2e} over {combos} combos",
    )


def test_c09_supermartingale_check(survival_ensemble, bound_setup):
    result, elapsed = survival_ensemble
    rep = check_supermartingale(result, bound_setup)
    margin = rep.rhs + 3 * rep.stderr - rep.lhs
    sup_ok = rep.lhs_path_sup <= rep.rhs + 3 * rep.stderr + 1e-12
    report(
        "9 (stopped-norm moment bound)",
        rep.passed and sup_ok and elapsed < 900.0,
        f"2000 paths in {elapsed:.0f}s: stopped statistic {rep.lhs:.4f} "
        f"(path-sup {rep.lhs_path_sup:.4f}) vs (E||u0||)^lambda + 3 SE = "
        f"{rep.rhs:.4f} + {3 * rep.stderr:.4f}, margin {margin:.4f}",
    )


def test_c10_probability_bound_and_sweep(survival_ensemble, bound_setup):
    est = check_probability_bound(survival_ensemble[0], bound_setup)
    main_ok = est.passed and not est.vacuous

    # monotonicity sweep across initial amplitudes, smaller ensembles
    params = bound_setup
    grid = make_grid(2, 32)
    delta_half = delta_for_epsilon(0.5, params)
    cfg = SolverConfig(nu=0.1, dt=0.01, T=1.0)
    fractions = []
    intervals = []
    for scale in (0.1, 0.5, 1.0, 2.0):
        u0 = random_field(grid, np.random.default_rng(31), decay=2.0,
                          v_norm=scale * delta_half)
        res = run_ensemble(cfg, MODEL, u0, 200, base_seed=19, threads=4, sample_every=8)
        sub = check_probability_bound(res, params)
        fractions.append(sub.p_hat)
        intervals.append((sub.ci_low, sub.ci_high))
    monotone_within_ci = all(
        fractions[i + 1] <= fractions[i] or intervals[i + 1][0] <= intervals[i][1]
        for i in range(3)
    )
    report(
        "10 (survival probability bound)",
        main_ok and monotone_within_ci,
        f"2000 paths: p_hat {est.p_hat:.4f}, ci_low {est.ci_low:.4f} vs bound - 0.02 = "
        f"{est.bound - 0.02:.4f}; sweep fractions {fractions} nonincreasing within CI overlap",
    )


def test_c11_pathwise_determinism_and_uniqueness():
    grid = make_grid(2, 16)
    u0 = random_field(grid, np.random.default_rng(17), v_norm=0.2)
    cfg = SolverConfig(nu=0.1, dt=0.005, T=0.5)
    csv1 = evolve(u0, cfg, MODEL, path_rng(23, 0)).csv_text()
    csv2 = evolve(u0, cfg, MODEL, path_rng(23, 0)).csv_text()
    identical = csv1 == csv2
    coupled = coupled_evolve(u0, u0.copy(), cfg, MODEL, path_rng(23, 1))
    report(
        "11 (pathwise determinism/uniqueness)",
        identical and coupled.sup_w_v <= 1e-12,
        f"CSV byte-identical: {identical}; equal-data coupled gap sup ||w|| = "
        f"{coupled.sup_w_v:.2e} over t <= {cfg.T}",
    )


def test_c12_sobolev_variant():
    grid = make_grid(2, 16)
    # criterion 7 analogue in the Sobolev pairing
    model = NoiseModel(sigma=(0.1, 0.1))
    rng = np.random.default_rng(29)
    worst = 0.0
    for _ in range(10):
        u = random_field(grid, rng)
        nsq = pairing("Hm", u, u, m=3)
        worst = max(worst, abs(hs_norm(u, model, "Hm", m=3) - model.alpha_sq * nsq)
                    / (model.alpha_sq * nsq))
    hyp = verify_hypotheses(model, grid, trials=5, seed=29, m=3)

    # criterion 8 analogue with the Sobolev constants: r = 1, threshold xi/C3
    c3, c4 = 2.0, 1.5
    p = derive_bound_params(1.5, 1.5, c3, c4, model, variant=VARIANT_HM)
    ok_bound = True
    for eps in (0.2, 0.5, 0.8):
        delta = delta_for_epsilon(eps, p)
        direct = 1.0 - (4.0 * c3 * delta / (2 * model.beta_sq - model.alpha_sq)) ** p.lam
        ok_bound &= abs(direct - (1.0 - eps)) <= 1e-12
    ok_lam = p.lam == pytest.approx(
        (2 * model.beta_sq - model.alpha_sq) / (2 * model.beta_sq + 4 * c4 * model.alpha_sq),
        rel=1e-14,
    )

    # W^{1,inf} cut-off with huge radius matches the uncut system
    u0 = random_field(grid, np.random.default_rng(37), v_norm=0.3)
    base_cfg = SolverConfig(nu=0.1, dt=0.005, T=0.5)
    cut_cfg = SolverConfig(
        nu=0.1, dt=0.005, T=0.5,
        cutoff=CutoffConfig(kappa=1e12, norm_kind=CUTOFF_W1INF),
    )
    r0 = evolve(u0, base_cfg, model, path_rng(41, 0), sample_every=10)
    r1 = evolve(u0, cut_cfg, model, path_rng(41, 0), sample_every=10)
    gap = float(np.max(np.abs(r1.v - r0.v))) / float(np.max(r0.v))
    report(
        "12 (Sobolev-norm variant)",
        worst <= 1e-10 and hyp.passed and ok_bound and ok_lam and gap <= 1e-12,
        f"H3 intensity identity worst {worst:.2e}; Sobolev bound inversion exact; "
        f"huge-radius cut-off trajectory gap {gap:.2e} over T=0.5",
    )
