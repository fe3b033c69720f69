import numpy as np
import pytest

from stochns.noise import (
    NoiseModel,
    apply_G,
    hs_norm,
    path_rng,
    sample_increment,
    verify_hypotheses,
)
from stochns.spectral import make_grid, norms, pairing, random_field


GRID = make_grid(2, 8)


def test_model_constants():
    model = NoiseModel(sigma=(0.1, 0.1))
    assert model.K == 2
    assert model.alpha_sq == pytest.approx(0.02)
    assert model.beta_sq == pytest.approx(0.02)


def test_model_rejects_bad_coefficients():
    with pytest.raises(ValueError):
        NoiseModel(sigma=(-0.1,))
    with pytest.raises(ValueError):
        NoiseModel(sigma=(float("nan"),))
    with pytest.raises(ValueError):
        NoiseModel(sigma=(0.1,), kind="colored")


def test_model_json_round_trip():
    model = NoiseModel(sigma=(0.1, 0.2, 0.0))
    back = NoiseModel.from_json(model.to_json())
    assert back == model
    with pytest.raises(ValueError):
        NoiseModel.from_json('{"K": 5, "sigma": [0.1], "kind": "linear-diagonal"}')


def test_sample_increment_determinism_and_independence():
    rng = path_rng(77, 0)
    a = sample_increment(rng, 0.01, 4)
    b = sample_increment(rng, 0.01, 4)
    assert not np.array_equal(a.dW, b.dW)  # advancing the stream gives fresh draws
    rng2 = path_rng(77, 0)
    a2 = sample_increment(rng2, 0.01, 4)
    assert np.array_equal(a.dW, a2.dW)  # same seed, bit-identical


def test_sample_increment_edge_cases():
    rng = path_rng(0, 0)
    empty = sample_increment(rng, 0.5, 0)
    assert empty.dW.shape == (0,)
    with pytest.raises(ValueError):
        sample_increment(rng, 0.0, 2)


def test_increment_variance_band():
    # 1e6 draws at dt = 0.01: sample variance within the 4-sigma band
    rng = path_rng(5, 0)
    draws = rng.normal(0.0, np.sqrt(0.01), size=10**6)
    assert 0.0099 <= np.var(draws) <= 0.0101


def test_stream_cross_correlation():
    n = 10**5
    x = path_rng(9, 0).standard_normal(n)
    y = path_rng(9, 1).standard_normal(n)
    corr = float(np.corrcoef(x, y)[0, 1])
    assert abs(corr) < 4.0 / np.sqrt(n)


def test_apply_G_scaling_and_bounds():
    model = NoiseModel(sigma=(0.0, 0.3))
    u = random_field(GRID, np.random.default_rng(1))
    zero = apply_G(u, model, 0)
    assert np.all(zero.coeffs == 0)
    scaled = apply_G(u, model, 1)
    assert np.allclose(scaled.coeffs, 0.3 * u.coeffs)
    with pytest.raises(IndexError):
        apply_G(u, model, 2)


@pytest.mark.parametrize("space", ["H", "V", "DA", "Hm"])
def test_hs_norm_diagonal_identity(space):
    model = NoiseModel(sigma=(0.1, 0.25))
    u = random_field(GRID, np.random.default_rng(2))
    expected = model.alpha_sq * pairing(space, u, u, m=3)
    assert hs_norm(u, model, space, m=3) == pytest.approx(expected, rel=1e-12)


def test_hs_norm_homogeneity_and_zero():
    u = random_field(GRID, np.random.default_rng(3))
    single = NoiseModel(sigma=(0.1, 0.1))
    double = NoiseModel(sigma=(0.2, 0.2))
    assert hs_norm(u, double, "V") == pytest.approx(4 * hs_norm(u, single, "V"), rel=1e-12)
    from stochns.spectral import zero_field

    assert hs_norm(zero_field(GRID), single, "V") == 0.0


def test_verify_hypotheses_passes_for_positive_model():
    model = NoiseModel(sigma=(0.1, 0.1))
    report = verify_hypotheses(model, GRID, trials=5, seed=0)
    assert report.passed
    assert model.alpha_sq == pytest.approx(0.02)
    names = {c.name for c in report.checks}
    assert "(G-H1)" in names and "(G-H3)" in names and "(GPSm-H4)" in names


def test_verify_hypotheses_rejects_zero_variance():
    report = verify_hypotheses(NoiseModel(sigma=()), GRID, trials=1, seed=0)
    assert not report.passed
    first = report.first_failure()
    assert first is not None and "G-H1" in first.name and "positivity" in first.name


def test_verify_hypotheses_all_zero_sigma():
    report = verify_hypotheses(NoiseModel(sigma=(0.0, 0.0)), GRID, trials=1, seed=0)
    assert not report.passed
    assert "G-H1" in report.first_failure().name


def test_gap_condition_automatic():
    # alpha^2 = beta^2 < 2 beta^2 holds for any positive linear-diagonal model
    for sigma in ((0.1,), (0.1, 0.1), (0.5, 0.2, 0.1)):
        report = verify_hypotheses(NoiseModel(sigma=sigma), GRID, trials=2, seed=1)
        gh3 = [c for c in report.checks if c.name == "(G-H3)"]
        assert gh3 and all(c.passed for c in gh3)


def test_lipschitz_ratio_equals_envelope():
    model = NoiseModel(sigma=(0.3, 0.4))
    rng = np.random.default_rng(4)
    u, v = random_field(GRID, rng), random_field(GRID, rng)
    from stochns.spectral import SpectralField

    diff = SpectralField(GRID, u.coeffs - v.coeffs)
    ratio = np.sqrt(hs_norm(diff, model, "V")) / norms(diff).v
    assert ratio == pytest.approx(np.sqrt(model.alpha_sq), rel=1e-12)
