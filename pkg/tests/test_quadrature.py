import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from aniscale.quadrature import (AxisSpec, NonConvergenceError, PreconditionError, RectKernel,
                                 SingularIntegrand2D, dirichlet, dirichlet_kernel,
                                 fejer_line_kernel, integrate_line, integrate_singular_2d)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 300), st.floats(-math.pi, math.pi))
def test_dirichlet_closed_form_matches_direct_sum(n, u):
    direct = np.exp(1j * u * np.arange(1, n + 1)).sum()
    assert abs(dirichlet(n, u) - direct) <= 1e-10 * n


def test_dirichlet_near_zero_branches():
    assert dirichlet(5, 0.0) == 5
    assert dirichlet(10 ** 6, 1e-14) == pytest.approx(10 ** 6 + 1j * 1e-14 * 10 ** 6 * (10 ** 6 + 1) / 2)
    with pytest.raises(ValueError):
        dirichlet(0, 0.1)


def test_fejer_kernel_integrates_to_two_pi():
    res = integrate_line(lambda u: np.ones_like(u), kernel=fejer_line_kernel())
    assert res.value == pytest.approx(2 * math.pi, rel=1e-9)


@pytest.mark.parametrize("x,y", [(1.0, 1.0), (2.0, 0.5), (3.0, 1.5)])
def test_rect_kernel_product_form(x, y):
    k = RectKernel(x, y, "line")
    u = np.linspace(0.01, 30, 200)
    direct = (1 - np.exp(1j * u * x)) * (1 - np.exp(-1j * u * y)) / u ** 2
    re, im = k.exact(u)
    assert np.allclose(re, direct.real, atol=1e-12)
    assert np.allclose(im, direct.imag, atol=1e-12)


def test_circle_kernel_is_dirichlet_product():
    k = dirichlet_kernel(4, 7)
    u = np.linspace(0.003, math.pi, 100)
    direct = dirichlet(4, u) * np.conj(dirichlet(7, u))
    re, im = k.exact(u)
    assert np.allclose(re + 1j * im, direct, atol=1e-10)


def test_line_integral_with_interior_singularity():
    # |u|^-1/2 e^{-|u|} over R = 2 Gamma(1/2)
    res = integrate_line(lambda u: np.abs(u) ** -0.5 * np.exp(-np.abs(u)), decay=3.0)
    assert res.value == pytest.approx(2 * math.sqrt(math.pi), rel=1e-8)


def test_line_integral_against_scipy_on_finite_range():
    g = lambda u: np.abs(u) ** 0.3 * np.cos(3 * u)
    ref = 2 * integrate.quad(lambda v: v ** 0.3 * math.cos(3 * v), 0, 2, epsabs=1e-13)[0]
    assert integrate_line(g, lower=-2.0, upper=2.0).value == pytest.approx(ref, rel=1e-9)


def test_kernel_integral_with_singular_weight_matches_scipy():
    # Fejer kernel against |u|^-0.5 on R, computed independently on [0, inf)
    h = lambda v: 2 * (1 - math.cos(v)) / v ** 2
    tail = 2 * (1 / 1.5) - 2 * integrate.quad(lambda v: v ** -2.5, 1, np.inf, weight="cos", wvar=1.0)[0]
    ref = 2 * (integrate.quad(lambda v: h(v) * v ** -0.5, 0, 1, epsabs=1e-14, limit=200)[0] + tail)
    res = integrate_line(lambda u: np.abs(u) ** -0.5, kernel=fejer_line_kernel())
    assert res.value == pytest.approx(ref, rel=1e-7)


def test_tail_requires_decay():
    with pytest.raises(PreconditionError):
        integrate_line(lambda u: 1 / (1 + u * u), decay=1.0)


def test_2d_gaussian_over_plane():
    g = SingularIntegrand2D(lambda a, b: np.exp(-a * a - b * b), AxisSpec(decay=4.0),
                            AxisSpec(decay=4.0), even_each=True)
    assert integrate_singular_2d(g, rtol=1e-10).value == pytest.approx(math.pi, rel=1e-9)


def test_2d_torus_singular_mass_matches_scipy():
    # integral of 1/(|u1|^0.5 + |u2|^0.5) over [-pi, pi]^2
    f = lambda b, a: 1.0 / (a ** 0.5 + b ** 0.5)
    ref = 4 * integrate.dblquad(f, 0, math.pi, 0, math.pi, epsabs=1e-12, epsrel=1e-11)[0]
    g = SingularIntegrand2D(lambda a, b: 1.0 / (np.abs(a) ** 0.5 + np.abs(b) ** 0.5),
                            AxisSpec(end=math.pi), AxisSpec(end=math.pi), even_each=True)
    assert integrate_singular_2d(g, rtol=1e-9).value == pytest.approx(ref, rel=1e-7)


def test_2d_non_separable_weight_uses_imaginary_terms():
    # weight even under u -> -u but not in u2 alone, checked against scipy on a box
    w = lambda a, b: np.exp(-(a * a + b * b + a * b))
    kx, ky = RectKernel(1.0, 2.0), RectKernel(1.5, 0.5)
    g = SingularIntegrand2D(w, AxisSpec(kx, decay=2.0), AxisSpec(ky, decay=2.0))

    def integrand(b, a):
        a = a if a != 0 else 1e-12
        b = b if b != 0 else 1e-12
        r1, i1 = kx.exact(np.array([a]))
        r2, i2 = ky.exact(np.array([b]))
        return float((r1 * r2 - i1 * i2)[0] * w(a, b))
    ref = integrate.dblquad(integrand, -8, 8, -8, 8, epsabs=1e-10)[0]
    assert integrate_singular_2d(g, rtol=1e-9).value == pytest.approx(ref, rel=1e-6)


def test_2d_precondition_rejects_non_integrable_singularity():
    g = SingularIntegrand2D(lambda a, b: a * 0 + 1, AxisSpec(end=math.pi), AxisSpec(end=math.pi),
                            singular_exponent=4.0, upsilon=(0.5, 0.5))
    with pytest.raises(PreconditionError):
        integrate_singular_2d(g)


def test_2d_reports_non_convergence():
    g = SingularIntegrand2D(lambda a, b: np.cos(50 * a) + 0 * b, AxisSpec(end=math.pi),
                            AxisSpec(end=math.pi))
    with pytest.raises(NonConvergenceError):
        integrate_singular_2d(g, max_level=0)


def test_trace_file(tmp_path, monkeypatch):
    path = tmp_path / "trace.csv"
    integrate_line(lambda u: np.exp(-u * u), trace=str(path))
    assert path.read_text().count("\n") >= 2


def test_dirichlet_decay_bound_constant():
    # |D_n(u)| <= min(n, pi/|u|) <= (1 + pi) n / (1 + n|u|); the constant 2 is too small
    assert abs(dirichlet(3, math.pi)) == pytest.approx(1.0)
    assert abs(dirichlet(3, math.pi)) > 2 * 3 / (1 + 3 * math.pi)
    rng = np.random.default_rng(0)
    for n in [1, 2, 3, 7, 64, 1000, 2 ** 14]:
        u = np.concatenate([rng.uniform(-math.pi, math.pi, 4000), np.linspace(-math.pi, math.pi, 4001)])
        ratio = np.abs(dirichlet(n, u)) * (1 + n * np.abs(u)) / n
        assert ratio.max() <= 1 + math.pi + 1e-9
