import numpy as np
import pytest
from hypothesis import given, strategies as st

from rnnpuf import (Environment, MismatchParams, RnnConfig, crp_space, empirical_reliability,
                    generate_dataset, r_cascade, r_lower_bound, r_model, r_xor, sample_device,
                    secure_space, uniformity_metrics)
from rnnpuf.core import Dataset, RandomizedAnyPair, RandomizedFinalPair
from rnnpuf.reliability import (ReliabilityReport, estimate_secure_space, reliability_report,
                                reliability_stats)

fractions = st.floats(0.0, 1.0)


def test_hand_values():
    assert r_xor(0.9, 0.9) == pytest.approx(0.82, abs=1e-12)
    assert r_cascade(0.9, 0.9) == pytest.approx(0.81, abs=1e-12)
    assert r_lower_bound(1, 1, 0.925) == pytest.approx(0.855625, abs=1e-12)
    assert r_lower_bound(2, 1, 0.925) == pytest.approx(0.925 ** 3, abs=1e-12)
    assert r_lower_bound(2, 1, 0.925) == pytest.approx(0.791453, abs=5e-7)
    assert r_model(2, 1, 0.925) == pytest.approx(0.863640625, abs=1e-12)


def test_base_cases_and_special_values():
    assert r_xor(0.9, 1.0) == pytest.approx(0.9)
    assert r_cascade(1.0, 0.7) == 0.7
    for n in range(1, 5):
        assert r_lower_bound(n, 0, 0.8) == 0.8
        assert r_model(n, 0, 0.8) == 0.8
    # cascading a stage with its own XOR against a perfect bit squares it
    assert r_cascade(0.9, r_xor(0.9, 1.0)) == pytest.approx(0.81)


def test_split_final_stage():
    # with v_ctrl filtering only the final compare, the last factor is r_final
    assert r_lower_bound(2, 1, 0.9, 0.95) == pytest.approx(0.9 ** 2 * 0.95)
    assert r_model(2, 1, 0.9, 0.95) == pytest.approx(0.81 * 0.95 + 0.5 * 0.19)
    assert r_lower_bound(1, 2, 0.9, 0.9) == r_lower_bound(1, 2, 0.9)


@pytest.mark.parametrize("call", [lambda: r_xor(1.1, 0.5), lambda: r_cascade(0.5, -0.1),
                                  lambda: r_lower_bound(0, 1, 0.9), lambda: r_model(1, -1, 0.9),
                                  lambda: r_model(1, 1, 0.9, 1.5)])
def test_out_of_range_rejected(call):
    with pytest.raises(ValueError):
        call()


@given(fractions, fractions)
def test_xor_symmetry(a, b):
    assert r_xor(a, b) == pytest.approx(r_xor(b, a))
    assert r_xor(a, 1.0) == pytest.approx(a)
    assert r_xor(a, 0.0) == pytest.approx(1.0 - a)
    assert r_xor(0.5, a) == pytest.approx(0.5)


def test_bound_below_model_grid():
    for n in range(1, 5):
        for theta in range(0, 5):
            for r in np.linspace(0.5, 1.0, 11):
                lo, mid = r_lower_bound(n, theta, r), r_model(n, theta, r)
                assert lo <= mid + 1e-15 and mid <= 1.0 + 1e-15


@given(st.floats(0.5001, 0.9999), st.integers(1, 4), st.integers(1, 4))
def test_model_degrades_with_n_and_theta(r, n, theta):
    assert r_model(n, theta + 1, r) <= r_model(n, theta, r) + 1e-12
    assert r_model(n + 1, theta, r) <= r_model(n, theta, r) + 1e-12


def test_identical_conditions_give_full_reliability(small_device, golden):
    cfg = RnnConfig(16, 8, 2, 1)
    assert empirical_reliability(small_device, cfg, 500, golden, golden, 3) == 1.0
    noiseless_corner = Environment(25.0, noisy=False)
    assert empirical_reliability(small_device, cfg, 500, golden, noiseless_corner, 2) == 1.0


def test_too_high_v_ctrl_is_an_error(small_device, golden, corner):
    with pytest.raises(ValueError, match="v_ctrl"):
        reliability_stats(small_device, RnnConfig(16, 8, v_ctrl=100.0), 200, golden, corner)


def test_corner_trials_degrade_and_are_deterministic(corner, golden):
    d = sample_device(3, 64, 8)
    cfg = RnnConfig(64, 8)
    a = reliability_stats(d, cfg, 2000, golden, corner, 3, 4)
    b = reliability_stats(d, cfg, 2000, golden, corner, 3, 4)
    assert a == b
    assert 0.5 < a.reliability < 1.0 and a.std_error > 0


def test_rnn_sandwich_on_small_device(corner, golden):
    d = sample_device(2, 64, 8)
    for n, theta in [(1, 1), (2, 1), (2, 2)]:
        rep = reliability_report(d, RnnConfig(64, 8, n, theta), 3000, golden, corner, 3, 0,
                                 RandomizedFinalPair(), 500)
        assert rep.r_empirical >= rep.r_eq3_lower - 2 * rep.std_error
        assert rep.r_eq3_lower <= rep.r_eq4_model


def test_report_lines_are_flat(corner, golden):
    d = sample_device(2, 16, 8)
    rep = reliability_report(d, RnnConfig(16, 8, 2, 1, v_ctrl=0.005), 500, golden, corner, 2, 0,
                             RandomizedFinalPair(), 200)
    assert isinstance(rep, ReliabilityReport)
    lines = rep.to_lines()
    assert all("=" in line and "\n" not in line for line in lines)
    assert lines[0].startswith("r_empirical=")
    assert 0 <= rep.discard_fraction <= 1


def test_secure_space_at_zero_threshold():
    d = sample_device(4, 32, 8)
    discard, space = secure_space(d, RnnConfig(32, 8), 0.0, 5000)
    assert discard < 0.001
    assert space >= crp_space(32, 8) * 999 // 1000
    with pytest.raises(ValueError):
        secure_space(d, RnnConfig(32, 8), 0.0, 50)


def test_secure_space_arithmetic():
    assert estimate_secure_space(16, 8, 0.0) == 262_144
    assert estimate_secure_space(32, 8, 0.25) == crp_space(32, 8) * 3 // 4
    assert 1.2e10 <= estimate_secure_space(32, 8, 0.25) <= 1.4e10


def _fake_dataset(template, responses):
    return Dataset(template.config, template.device_seed, template.env, template.pair_policy,
                   template.challenge_seed, template.row_bits, template.pairs, np.asarray(responses),
                   template.margins, template.valid)


def test_uniformity_examples(small_device, golden):
    data = generate_dataset(small_device, RnnConfig(16, 8), 10_000, RandomizedFinalPair(), 1, golden)
    ones, hd = uniformity_metrics(_fake_dataset(data, np.ones(len(data), dtype=int)))
    assert ones == 1.0 and hd is None
    gen = np.random.default_rng(0)
    coins = [_fake_dataset(data, gen.integers(0, 2, len(data))) for _ in range(2)]
    assert abs(uniformity_metrics(coins)[1] - 0.5) <= 0.02
    with pytest.raises(ValueError):
        uniformity_metrics([])


def test_unbiased_randomized_pairs_are_uniform(golden):
    params = MismatchParams(sigma_bias=0.05)
    for seed in (1, 2):
        d = sample_device(seed, 64, 16, params)
        data = generate_dataset(d, RnnConfig(64, 16), 10_000, RandomizedAnyPair(), 3, golden)
        assert 0.45 <= uniformity_metrics(data)[0] <= 0.55


def test_inter_device_hd_needs_same_challenges(golden):
    a = generate_dataset(sample_device(1, 16, 8), RnnConfig(16, 8), 200, RandomizedFinalPair(), 1, golden)
    b = generate_dataset(sample_device(2, 16, 8), RnnConfig(16, 8), 200, RandomizedFinalPair(), 2, golden)
    with pytest.raises(ValueError):
        uniformity_metrics([a, b])
    c = generate_dataset(sample_device(2, 16, 8), RnnConfig(16, 8), 200, RandomizedFinalPair(), 1, golden)
    assert 0.2 < uniformity_metrics([a, c])[1] < 0.8
