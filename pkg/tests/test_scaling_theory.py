import json
import math
import pathlib
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aniscale import scaling_theory as th
from aniscale.spectral_models import SpectralModel

SNAP = json.loads((pathlib.Path(__file__).parent / "fixtures" / "kappa_snapshots.json").read_text())


def lrd(a, b):
    return SpectralModel.make("LRD", a, b)


def test_lrd_hurst_values():
    m = lrd(0.5, 1.2)
    assert th.gamma0(m) == pytest.approx(0.5 / 1.2)
    assert th.hurst_pair(m, "plus").as_list() == pytest.approx([0.75, 0.5])
    assert th.hurst_pair(m, "minus").as_list() == pytest.approx([0.5 + 0.5 / 12, 1.0])
    assert th.H_of_gamma(m, 1.0) == pytest.approx(1.25)
    assert th.H_of_gamma(m, 0.2) == pytest.approx(0.741666666666, rel=1e-10)


def test_nd_hurst_values_and_gamma0():
    m = SpectralModel.make("ND", 0.5, 1.5)
    assert th.gamma0(m) == pytest.approx(0.5)
    assert th.hurst_pair(m, "plus").as_list() == pytest.approx([0.25, 0.5])
    assert th.hurst_pair(m, "minus").as_list() == pytest.approx([0.5, 0.0])


def test_lrnd_hurst_values():
    m = SpectralModel.make("LRND2", 0.5, 0.8, mu=0.3)
    assert th.hurst_pair(m, "plus").as_list() == pytest.approx([0.84375, 0.35])
    assert th.gamma0(m) == pytest.approx(0.625)
    # minus side coincides with the LRD formulas
    assert th.hurst_pair(m, "minus").as_list() == pytest.approx(th.hurst_pair(lrd(0.5, 0.8), "minus").as_list())
    m1 = SpectralModel.make("LRND1", 0.8, 0.5, mu=0.3)
    assert th.hurst_pair(m1, "minus").as_list() == pytest.approx([0.35, 0.84375])
    assert th.H_of_gamma(m1, 2.0) == pytest.approx(2 * th.H_of_gamma(m, 0.5))


def test_hyperbolic_is_linear_without_transition():
    m = SpectralModel.make("Hyperbolic", 0.4, -0.2)
    assert th.gamma0(m) is None
    for g in (0.5, 1.0, 2.0, 3.0):
        assert th.H_of_gamma(m, g) == pytest.approx(0.7 + 0.4 * g)
    assert th.predict(m, with_kappa=False).to_dict()["transition"] is False


def test_lrnd_exclusions():
    with pytest.raises(th.ExcludedParameterError) as ei:
        th.check_supported(SpectralModel.make("LRND2", 1.0, 0.8, mu=0.3))
    assert "upsilon1 != 1" in ei.value.condition
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        with pytest.raises(th.ExcludedParameterError):
            # upsilon1 + upsilon1/upsilon2 = 1
            th.check_supported(SpectralModel.make("LRND2", 0.25, 1.0 / 3.0, mu=0.3))


def test_side_of_is_exact_at_rational_gamma0():
    from fractions import Fraction
    m = lrd(0.5, 1.2)
    assert th.side_of(m, Fraction(5, 12)) == "balanced"
    assert th.side_of(m, 0.5) == "plus"
    assert th.side_of(m, 0.4) == "minus"


def test_normalization_and_log_rules():
    m = lrd(1.0, 1.25)
    lam = math.e ** 3
    assert th.log_factor(m, 2.0)
    assert th.normalization(m, 2.0, lam) == pytest.approx(lam ** th.H_of_gamma(m, 2.0) * math.sqrt(3))
    nd = SpectralModel.make("ND", 0.5, 1.5)
    assert th.log_factor(nd, 0.3, "statement")
    assert not th.log_factor(nd, 0.3, "proof")
    assert th.normalization(nd, 0.3, math.e ** 2) == pytest.approx(math.e * math.sqrt(2))
    with pytest.raises(ValueError):
        th.normalization(m, 1.0, 0.5)


@pytest.mark.parametrize("snap", SNAP["snapshots"], ids=lambda s: f"{s['regime']}-{s['side']}")
def test_kappa_snapshots(snap):
    m = SpectralModel.make(snap["regime"], *snap["upsilon"])
    auto = th.kappa_detail(m, snap["gamma"], snap["side"], "auto", snap["quad_rtol"])
    quad = th.kappa_detail(m, snap["gamma"], snap["side"], "quadrature", snap["quad_rtol"])
    assert auto.value == pytest.approx(snap["value"], rel=max(snap["rtol"], 1e-12))
    assert quad.value == pytest.approx(snap["value"], rel=max(snap["rtol"], 1e-6))


def test_kappa_lrnd_closed_against_quadrature():
    m = SpectralModel.make("LRND2", 0.5, 0.8, mu=0.3)
    a = th.kappa_detail(m, 1.5, "plus")
    b = th.kappa_detail(m, 1.5, "plus", "quadrature")
    assert b.value == pytest.approx(a.value, rel=1e-4)
    assert abs(a.value - b.value) <= 3 * b.abs_error + 1e-9 * a.value


def test_kappa_lrd_above_one_dual_route():
    m = lrd(1.5, 0.7)
    g = 1.0
    a = th.kappa_detail(m, g, "plus")
    b = th.kappa_detail(m, g, "plus", "quadrature")
    assert a.method != b.method
    assert b.value == pytest.approx(a.value, rel=1e-7)


def test_fbm_constant_closed_vs_quadrature():
    for H in (0.25, 0.5, 0.75):
        assert th.fbm_spectral_quadrature(H).value == pytest.approx(th.fbm_spectral_constant(H), rel=1e-7)
    # H = 1/2 gives 2 pi
    assert th.fbm_spectral_constant(0.5) == pytest.approx(2 * math.pi)


def test_limit_cov_nd_sum_of_independent_sheets():
    m = SpectralModel.make("ND", 1.0, 1.0)
    # 8 pi * (x1 ^ y1 ...) : plus part 8 pi * 1 * 1, minus part 8 pi * 1/2
    assert th.limit_cov(m, 1.0, (1, 2), (1, 1)) == pytest.approx(12 * math.pi, rel=1e-9)


def test_limit_cov_off_transition_is_scaled_sheet():
    m = lrd(0.5, 1.2)
    k = th.kappa_limit(m, 1.0, "plus")
    pair = th.hurst_pair(m, "plus")
    assert th.limit_cov(m, 1.0, (1, 2), (2, 1)) == pytest.approx(k * th.fbs_cov(pair, (1, 2), (2, 1)))


def test_well_balanced_symmetry_and_scaling():
    m = lrd(0.5, 0.5)
    a = th.well_balanced_cov(m, (1, 2), (2, 1)).value
    b = th.well_balanced_cov(m, (2, 1), (1, 2)).value
    assert a == pytest.approx(b, rel=1e-7)
    # operator self-similarity at gamma0 = 1: V0(lam x) has variance lam^(2 H) times V0(x)
    H = th.H_of_gamma(m, 1.0)
    v1 = th.well_balanced_cov(m, (1, 1), (1, 1)).value
    v2 = th.well_balanced_cov(m, (2, 2), (2, 2)).value
    assert v2 == pytest.approx(2 ** (2 * H) * v1, rel=1e-6)


def test_predict_json_shape():
    d = th.predict(lrd(0.5, 1.2)).to_dict()
    for key in ("regime", "gamma0", "H_plus", "H_minus", "H_curve", "kappa", "model_digest"):
        assert key in d
    assert d["kappa"]["plus"] == pytest.approx(41.99895985525978, rel=1e-9)
    json.loads(th.predict(lrd(0.5, 1.2)).to_json())


H_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]


@pytest.mark.parametrize("H1", H_GRID)
@pytest.mark.parametrize("H2", H_GRID)
def test_fbs_covariance_is_psd(H1, H2):
    pts = [(a, b) for a in (0.5, 1.0, 1.5, 2.0) for b in (0.5, 1.0, 1.5, 2.0)]
    pair = th.HurstPair(H1, H2)
    C = np.array([[th.fbs_cov(pair, x, y) for y in pts] for x in pts])
    assert np.allclose(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-8 * np.trace(C)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.1, 10), st.floats(0.1, 10),
       st.tuples(st.floats(0.1, 3), st.floats(0.1, 3)), st.tuples(st.floats(0.1, 3), st.floats(0.1, 3)))
def test_fbs_dilation_identity(H1, H2, a, b, x, y):
    pair = th.HurstPair(H1, H2)
    lhs = th.fbs_cov(pair, (a * x[0], b * x[1]), (a * y[0], b * y[1]))
    rhs = a ** (2 * H1) * b ** (2 * H2) * th.fbs_cov(pair, x, y)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


models = st.one_of(
    st.tuples(st.just("LRD"), st.floats(0.2, 2.5), st.floats(0.2, 2.5)).filter(lambda t: 1 / t[1] + 1 / t[2] > 1.05),
    st.tuples(st.just("ND"), st.floats(0.2, 2.5), st.floats(0.2, 2.5)),
)


@settings(max_examples=80, deadline=None)
@given(models)
def test_H_is_continuous_at_gamma0(spec):
    m = SpectralModel.make(*spec)
    g0 = th.gamma0(m)
    h0 = th.H_of_gamma(m, g0)
    assert abs(th.H_of_gamma(m, g0 * (1 + 1e-9)) - h0) < 1e-5
    assert abs(th.H_of_gamma(m, g0 * (1 - 1e-9)) - h0) < 1e-5


@settings(max_examples=80, deadline=None)
@given(models, st.floats(0.05, 5.0))
def test_swap_principle(spec, gamma):
    m = SpectralModel.make(*spec)
    s = m.swapped()
    assert th.H_of_gamma(m, gamma) == pytest.approx(gamma * th.H_of_gamma(s, 1 / gamma), rel=1e-12)
    assert th.gamma0(m) == pytest.approx(1 / th.gamma0(s), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(models)
def test_hurst_indices_in_unit_interval(spec):
    m = SpectralModel.make(*spec)
    for side in ("plus", "minus"):
        p = th.hurst_pair(m, side)
        assert 0 <= p.H1 <= 1 and 0 <= p.H2 <= 1


def test_log_case_constant_matches_finite_scale_extrapolation():
    # exact normalized variances drift like c / log(lambda); a quadratic fit in
    # 1 / log(lambda) extrapolates them to the limit constant
    from aniscale import covariance_oracle as co
    m = lrd(1.0, 1.25)
    lams = [2.0 ** k for k in range(8, 16)]
    vals = [co.finite_cov(m, lam, 2.0, (1, 1), (1, 1)) for lam in lams]
    limit = np.polyfit(1 / np.log(lams), vals, 2)[-1]
    assert th.kappa_limit(m, 2.0, "plus") == pytest.approx(6 * math.pi, rel=1e-12)
    assert limit == pytest.approx(6 * math.pi, rel=0.01)
