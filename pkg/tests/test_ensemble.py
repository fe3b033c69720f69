import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochns.dynamics import SolverConfig, evolve
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
from stochns.noise import NoiseModel, path_rng
from stochns.spectral import make_grid, random_field, zero_field

GRID = make_grid(2, 8)
MODEL = NoiseModel(sigma=(0.1, 0.1))


# -- bound algebra -------------------------------------------------------------


def test_exponent_r_for_flow_instance():
    p = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    assert p.r == pytest.approx(4.0)


def test_lambda_collapses_when_alpha_equals_beta():
    for c2 in (0.5, 1.0, 2.0, 4.0):
        p = derive_bound_params(1.5, 1.5, 1.0, c2, MODEL)
        assert p.lam == pytest.approx(1.0 / (2.0 + 4.0 * c2), rel=1e-12)


def test_xi_value():
    p = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    assert p.xi == pytest.approx((2 * MODEL.beta_sq - MODEL.alpha_sq) / 4, rel=1e-14)
    assert p.xi == pytest.approx(0.005, rel=1e-12)


def test_domain_rejections():
    with pytest.raises(ValueError):
        derive_bound_params(0.4, 2.0, 1.0, 1.0, MODEL)  # b = 2
    with pytest.raises(ValueError):
        derive_bound_params(0.5, 1.0, 1.0, 1.0, MODEL)  # a + b <= 2
    with pytest.raises(ValueError):
        derive_bound_params(1.5, 1.5, 0.0, 1.0, MODEL)
    with pytest.raises(ValueError):
        derive_bound_params(1.5, 1.5, 1.0, 1.0, NoiseModel(sigma=(0.0,)))


def test_scale_consistency_of_lambda():
    # scaling every coefficient leaves lambda unchanged when alpha^2 = beta^2
    p1 = derive_bound_params(1.5, 1.5, 1.0, 1.0, NoiseModel(sigma=(0.1, 0.1)))
    p2 = derive_bound_params(1.5, 1.5, 1.0, 1.0, NoiseModel(sigma=(0.3, 0.3)))
    assert p1.lam == pytest.approx(p2.lam, rel=1e-14)
    assert p2.xi == pytest.approx(9 * p1.xi, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    eps=st.floats(0.01, 0.99),
    c1=st.floats(0.05, 10.0),
    c2=st.floats(0.1, 8.0),
    a=st.floats(1.1, 2.5),
    b=st.floats(0.3, 1.9),
)
def test_delta_inversion_identity(eps, c1, c2, a, b):
    if a + b <= 2.01:
        return
    p = derive_bound_params(a, b, c1, c2, MODEL)
    delta = delta_for_epsilon(eps, p)
    assert 1.0 - bound_value(p, delta) == pytest.approx(eps, rel=1e-12)


def test_delta_monotone_and_limit():
    p = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    deltas = [delta_for_epsilon(e, p) for e in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert deltas == sorted(deltas)
    assert delta_for_epsilon(1 - 1e-12, p) == pytest.approx(p.threshold, rel=1e-9)
    with pytest.raises(ValueError):
        delta_for_epsilon(0.0, p)


def test_hm_variant_formulas():
    p = derive_bound_params(1.5, 1.5, 2.0, 1.0, MODEL, variant=VARIANT_HM)
    assert p.r == 1.0
    assert p.threshold == pytest.approx(p.xi / 2.0, rel=1e-14)
    e = 0.0007
    expected = 1.0 - (4.0 * 2.0 * e / (2 * MODEL.beta_sq - MODEL.alpha_sq)) ** p.lam
    assert bound_value(p, e) == pytest.approx(expected, rel=1e-12)
    assert p.norm_kind == "Hm"


def test_bound_value_edges():
    p = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    assert bound_value(p, 0.0) == 1.0
    assert bound_value(p, p.threshold) == pytest.approx(0.0, abs=1e-12)
    assert bound_value(p, 2 * p.threshold) < 0  # vacuous region


# -- Wilson interval -----------------------------------------------------------


def test_wilson_basic_properties():
    lo, hi = wilson_interval(30, 40)
    assert 0 <= lo <= 30 / 40 <= hi <= 1
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(5, 0)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)


def test_wilson_coverage():
    # empirical coverage of the 95% interval over 1e4 replications
    rng = np.random.default_rng(99)
    p_true, n = 0.3, 60
    draws = rng.binomial(n, p_true, size=10**4)
    covered = 0
    for k in draws:
        lo, hi = wilson_interval(int(k), n)
        covered += lo <= p_true <= hi
    rate = covered / 10**4
    assert 0.93 <= rate <= 0.97


# -- ensemble driver -----------------------------------------------------------


def _quick_cfg():
    return SolverConfig(nu=0.1, dt=0.01, T=0.2)


def test_single_path_matches_evolve():
    u0 = random_field(GRID, np.random.default_rng(0), v_norm=0.1)
    result = run_ensemble(_quick_cfg(), MODEL, u0, 1, base_seed=5)
    direct = evolve(u0, _quick_cfg(), MODEL, path_rng(5, 0))
    assert result.records[0].csv_text() == direct.csv_text()


def test_thread_count_invariance():
    u0 = random_field(GRID, np.random.default_rng(1), v_norm=0.1)
    r1 = run_ensemble(_quick_cfg(), MODEL, u0, 8, base_seed=9, threads=1)
    r4 = run_ensemble(_quick_cfg(), MODEL, u0, 8, base_seed=9, threads=4)
    for a, b in zip(r1.records, r4.records):
        assert a.csv_text() == b.csv_text()


def test_u0_factory_draws_before_stepping():
    def factory(rng):
        return random_field(GRID, rng, v_norm=0.05)

    r1 = run_ensemble(_quick_cfg(), MODEL, factory, 4, base_seed=3)
    r2 = run_ensemble(_quick_cfg(), MODEL, factory, 4, base_seed=3)
    assert np.array_equal(r1.u0_norms, r2.u0_norms)
    assert len(set(np.round(r1.u0_norms, 15))) == 1  # same target norm each path
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    assert r1.mean_u0_norm == pytest.approx(0.05, rel=1e-10)


def test_zero_initial_data_full_survival():
    # the zero-data bound is exactly 1, so the Wilson lower edge needs a few
    # hundred paths to climb within the statistical slack of it
    cfg = SolverConfig(nu=0.1, dt=0.01, T=0.05)
    result = run_ensemble(cfg, MODEL, zero_field(GRID), 400, base_seed=1)
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    est = check_probability_bound(result, params)
    assert est.survivors == 400
    assert est.p_hat == 1.0
    assert est.bound == 1.0
    assert est.passed and not est.vacuous


# -- statistical checks ---------------------------------------------------------


def test_supermartingale_refuses_small_ensembles():
    u0 = random_field(GRID, np.random.default_rng(2), v_norm=0.01)
    result = run_ensemble(_quick_cfg(), MODEL, u0, 10, base_seed=2)
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    with pytest.raises(ValueError):
        check_supermartingale(result, params)


def test_supermartingale_zero_initial_data():
    result = run_ensemble(_quick_cfg(), MODEL, zero_field(GRID), 30, base_seed=4)
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    rep = check_supermartingale(result, params)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


def test_supermartingale_decay_dominated():
    # negligible noise, strong dissipation, threshold far above the data:
    # the stopped statistic sits strictly below the initial norm
    tiny_noise = NoiseModel(sigma=(1e-8, 1e-8))
    u0 = random_field(GRID, np.random.default_rng(5), v_norm=0.01)
    cfg = SolverConfig(nu=2.0, dt=0.01, T=0.5)
    result = run_ensemble(cfg, tiny_noise, u0, 30, base_seed=6)
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)  # sane threshold
    rep = check_supermartingale(result, params)
    assert rep.passed
    assert rep.lhs < rep.rhs
    assert rep.lhs_path_sup >= rep.lhs


def test_supermartingale_immediate_stop_degenerate_equality():
    # data already beyond the threshold: every path stops at time zero and
    # both sides agree exactly
    tiny_noise = NoiseModel(sigma=(1e-8, 1e-8))
    u0 = random_field(GRID, np.random.default_rng(5), v_norm=0.01)
    cfg = SolverConfig(nu=2.0, dt=0.01, T=0.1)
    result = run_ensemble(cfg, tiny_noise, u0, 30, base_seed=6)
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, tiny_noise)  # tiny threshold
    assert params.threshold < 0.01
    rep = check_supermartingale(result, params)
    assert rep.passed
    assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)


def test_supermartingale_reference_value():
    # deterministic data of norm 0.01 at lambda = 0.1: rhs = 0.01^0.1
    u0 = random_field(GRID, np.random.default_rng(7), v_norm=0.01)
    result = run_ensemble(_quick_cfg(), MODEL, u0, 30, base_seed=8)
    params = derive_bound_params(1.5, 1.5, 1.0, 0.2, MODEL)  # lambda = 1/2.8
    rep = check_supermartingale(result, params)
    assert rep.rhs == pytest.approx(result.mean_u0_norm**params.lam, rel=1e-12)
    lam01 = 0.01**0.1
    assert lam01 == pytest.approx(0.63096, rel=1e-4)  # reference arithmetic


def test_probability_bound_at_delta_is_one_minus_eps():
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    for eps in (0.25, 0.5, 0.8):
        delta = delta_for_epsilon(eps, params)
        assert bound_value(params, delta) == pytest.approx(1 - eps, rel=1e-12)


def test_probability_bound_vacuous_region():
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    u0 = random_field(GRID, np.random.default_rng(9), v_norm=2 * params.threshold)
    cfg = SolverConfig(nu=5.0, dt=0.01, T=0.1)
    result = run_ensemble(cfg, MODEL, u0, 30, base_seed=10)
    est = check_probability_bound(result, params)
    assert est.vacuous and est.bound <= 0
    assert est.passed  # vacuous bound tests nothing


def test_hm_variant_ensemble_monitors_sobolev_norm():
    # the Sobolev variant thresholds and stops on the H^m series
    params = derive_bound_params(1.5, 1.5, 0.01, 1.0, MODEL, variant=VARIANT_HM)
    assert params.norm_kind == "Hm"
    rng = np.random.default_rng(12)
    base = random_field(GRID, rng)
    from stochns.spectral import SpectralField, pairing

    target = 0.1 * params.threshold
    scale = target / np.sqrt(pairing("Hm", base, base, m=3))
    u0 = SpectralField(GRID, base.coeffs * scale)
    cfg = SolverConfig(nu=0.5, dt=0.01, T=0.2)
    result = run_ensemble(cfg, MODEL, u0, 30, base_seed=13, norm_kind="Hm", m=3)
    assert result.mean_u0_norm == pytest.approx(target, rel=1e-10)
    est = check_probability_bound(result, params)
    assert est.p_hat == 1.0 and est.passed
    rep = check_supermartingale(result, params)
    assert rep.passed and rep.rhs == pytest.approx(target**params.lam, rel=1e-12)


def test_probability_bound_json_shape():
    params = derive_bound_params(1.5, 1.5, 1.0, 1.0, MODEL)
    result = run_ensemble(_quick_cfg(), MODEL, zero_field(GRID), 30, base_seed=11)
    est = check_probability_bound(result, params)
    obj = est.to_json_dict()
    assert set(obj) == {"paths", "survivors", "p_hat", "ci", "bound_value", "pass", "vacuous"}
    assert obj["ci"][0] <= obj["p_hat"] <= obj["ci"][1]
