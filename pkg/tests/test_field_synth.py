import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aniscale import covariance_oracle as co
from aniscale import field_synth as fs
from aniscale import scaling_lab as lab
from aniscale.spectral_models import FlatSpectrum, SpectralModel

LRD = SpectralModel.make("LRD", 0.5, 1.2)


@pytest.fixture(scope="module")
def coeffs():
    return fs.ma_coefficients(LRD, 256)


@pytest.fixture(scope="module")
def replicas(coeffs):
    return [fs.synthesize(coeffs, "gaussian", 7, 24, 24, replica=r) for r in range(200)]


def test_flat_coefficients_are_a_unit_impulse():
    c = fs.ma_coefficients(FlatSpectrum(), 64)
    assert c.a(0, 0) == pytest.approx(1.0, abs=1e-12)
    v = c.values.copy()
    v[c.half, c.half] = 0.0
    assert np.abs(v).max() < 1e-12
    assert c.l2_mass_captured == pytest.approx(1.0, abs=1e-12)


def test_coefficients_are_exactly_even(coeffs):
    v = coeffs.values
    assert v.shape == (255, 255)
    assert np.array_equal(v, v[::-1, ::-1])
    assert coeffs.a(200, 0) == 0.0


@pytest.mark.parametrize("spec", [("LRD", 0.5, 1.2, {}), ("ND", 0.5, 0.5, {}),
                                  ("Hyperbolic", 0.4, -0.2, {}), ("LRND2", 0.5, 0.8, {"mu": 0.3})])
def test_captured_l2_mass_at_default_window(spec):
    m = SpectralModel.make(*spec[:3], **spec[3])
    c = fs.ma_coefficients(m)
    assert c.N == 1024
    assert abs(c.l2_mass_captured - 1) <= 0.02


def test_window_must_be_power_of_two():
    with pytest.raises(ValueError):
        fs.ma_coefficients(LRD, 100)
    with pytest.raises(ValueError):
        fs.ma_coefficients(LRD, 32)


def test_synthesis_is_deterministic_and_linear(coeffs):
    a = fs.synthesize(coeffs, "rademacher", 11, 10, 6, replica=3)
    b = fs.synthesize(coeffs, "rademacher", 11, 10, 6, replica=3)
    c = fs.synthesize(coeffs, "rademacher", 11, 10, 6, replica=3, negate=True)
    d = fs.synthesize(coeffs, "rademacher", 11, 10, 6, replica=4)
    assert a.values.shape == (10, 6)
    assert np.array_equal(a.values, b.values)
    assert np.allclose(c.values, -a.values, atol=1e-12)
    assert not np.allclose(a.values, d.values)
    with pytest.raises(fs.GeometryError):
        fs.synthesize(coeffs, "gaussian", 0, 0, 5)


def test_field_matches_direct_moving_average_sum():
    m = SpectralModel.make("ND", 0.5, 0.5)
    c = fs.ma_coefficients(m, 64)
    f = fs.synthesize(c, "uniform", 5, 3, 4, replica=2)
    N = c.N
    eps = fs.innovations("uniform", fs.replica_rng(5, 2), (3 + N, 4 + N))
    h, off = c.half, N // 2
    t1, t2 = 1, 2
    direct = sum(c.a(t1 + off - s1, t2 + off - s2) * eps[s1, s2]
                 for s1 in range(t1 + off - h, t1 + off + h + 1)
                 for s2 in range(t2 + off - h, t2 + off + h + 1))
    assert f.values[t1, t2] == pytest.approx(direct, abs=1e-10)


def test_rademacher_values_are_signs():
    x = fs.innovations("rademacher", fs.replica_rng(1, 0), (1001,))
    assert set(np.unique(x)) == {-1.0, 1.0}
    with pytest.raises(ValueError):
        fs.innovations("cauchy", fs.replica_rng(1, 0), (3,))


@pytest.mark.parametrize("law,kurt", [("gaussian", 0.0), ("rademacher", -2.0), ("uniform", -1.2)])
def test_innovation_laws_are_standardized(law, kurt):
    n = 10 ** 6
    x = fs.innovations(law, fs.replica_rng(2024, 1), (n,))
    assert abs(x.mean()) <= 4 / math.sqrt(n)
    # Var of the sample variance is (mu4 - 1) / n
    assert abs(np.mean(x * x) - 1) <= 4 * math.sqrt((kurt + 2) / n) + 1e-12
    m4 = np.mean(x ** 4) - 3
    assert m4 == pytest.approx(kurt, abs=0.05)


def test_replica_streams_do_not_overlap():
    a = fs.replica_rng(9, 0).standard_normal(1000)
    b = fs.replica_rng(9, 1).standard_normal(1000)
    c = fs.replica_rng(10, 0).standard_normal(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15 and abs(np.corrcoef(a, c)[0, 1]) < 0.15


def test_save_load_round_trip(tmp_path, coeffs):
    f = fs.synthesize(coeffs, "gaussian", 3, 5, 7, replica=1)
    p = str(tmp_path / "field.bin")
    f.save(p)
    g = fs.LatticeField.load(p)
    assert np.array_equal(f.values, g.values)
    assert (g.master_seed, g.replica, g.innovation_law, g.N) == (3, 1, "gaussian", 256)
    assert g.coeff_digest == LRD.digest
    f.to_csv(str(tmp_path / "field.csv"))
    assert np.array_equal(np.loadtxt(tmp_path / "field.csv", delimiter=","), f.values)


def test_empirical_autocovariance_matches_table(replicas):
    tab = co.autocovariance_table(LRD, K_max=8, resolution=1024)
    F = np.array([f.values for f in replicas])
    n = F.shape[1]
    for k1, k2 in [(0, 0), (1, 0), (0, 1), (2, 3)]:
        per = (F[:, :n - k1, :n - k2] * F[:, k1:, k2:]).mean(axis=(1, 2))
        se = per.std(ddof=1) / math.sqrt(len(per))
        assert abs(per.mean() - tab.r(k1, k2)) <= 5 * se


def test_periodogram_matches_density(replicas):
    u = [(2 * math.pi * a / 24, 2 * math.pi * b / 24) for a, b in [(3, 5), (6, 2), (9, 9), (4, 11)]]
    res = fs.periodogram_check(replicas, LRD, u)
    for r in res:
        # the leakage bias of a 24x24 periodogram is a few percent of f
        assert abs(r["mean"] - r["f"]) <= 5 * r["stderr"] + 0.1 * r["f"]
    with pytest.raises(fs.InsufficientReplicasError):
        fs.periodogram_check(replicas[:10], LRD, u)


def test_lindeberg_ratio_decreases(coeffs):
    from aniscale import scaling_theory as th
    c = fs.ma_coefficients(LRD, 1024)
    ratios = [fs.lindeberg_ratio(c, lam, 1.0, th.normalization(LRD, 1.0, lam)) for lam in (16, 32, 64, 128)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    with pytest.raises(ValueError):
        fs.lindeberg_ratio(c, 16, 1.0, 0.0)


def test_lindeberg_ratio_flat_is_one_over_norm():
    c = fs.ma_coefficients(FlatSpectrum(), 64)
    assert fs.lindeberg_ratio(c, 10, 1.0, 10.0) == pytest.approx(0.1, abs=1e-12)


def test_rect_weights_reproduce_field_sums(coeffs):
    sides = [(5, 3), (12, 9), (20, 20)]
    S, _ = lab.mc_samples(LRD, 20, 1.0, [(a / 20, b / 20) for a, b in sides], 3, "gaussian", 17,
                          coeffs=coeffs, threads=1)
    for r in range(3):
        f = fs.synthesize(coeffs, "gaussian", 17, 20, 20, replica=r).values
        for j, (a, b) in enumerate(sides):
            assert S[r, j] == pytest.approx(f[:a, :b].sum(), abs=1e-9)


def test_truncated_variance_below_full_variance(coeffs):
    full = co.rect_variance(LRD, 16, 16).value
    trunc = fs.truncated_rect_variance(coeffs, 16, 16)
    assert 0.9 * full < trunc < full * 1.001


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 50), st.integers(1, 12), st.integers(1, 12))
def test_synthesis_reproducible_for_any_key(seed, replica, n1, n2):
    c = fs.ma_coefficients(FlatSpectrum(), 64)
    a = fs.synthesize(c, "gaussian", seed, n1, n2, replica=replica).values
    eps = fs.innovations("gaussian", fs.replica_rng(seed, replica), (n1 + 64, n2 + 64))
    assert np.allclose(a, eps[32:32 + n1, 32:32 + n2], atol=1e-12)
