"""Closed-form scaling predictions: transition point, Hurst pairs, H(gamma),
normalization, long-range variances and limit covariances.

Minus-side quantities are obtained from the plus side of the model with the
coordinates exchanged: a rectangle [lam x1] x [lam^g x2] for X is the rectangle
[mu x2] x [mu^(1/g) x1] for the swapped field with mu = lam^g, so
H(g) = g H'(1/g), gamma0 = 1/gamma0' and the plus/minus sides trade places.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn

from .quadrature import (AxisSpec, QuadratureResult, RectKernel, SingularIntegrand2D,
                         fejer_line_kernel, integrate_line, integrate_singular_2d)
from .spectral_models import SpectralModel

EQ_TOL = 1e-12
KAPPA_RTOL = 1e-6
LOG_RULES = ("statement", "proof")


class ExcludedParameterError(ValueError):
    """Parameter combination outside the proved cases; carries the violated condition."""

    def __init__(self, message: str, condition: str = ""):
        super().__init__(message)
        self.condition = condition


class LrndBoundaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HurstPair:
    H1: float
    H2: float

    def __post_init__(self):
        for h in (self.H1, self.H2):
            if not (-1e-15 <= h <= 1 + 1e-15):
                raise ValueError(f"Hurst index {h} outside [0, 1]")

    def swapped(self) -> "HurstPair":
        return HurstPair(self.H2, self.H1)

    def as_list(self) -> List[float]:
        return [self.H1, self.H2]


def _eq(a: float, b: float) -> bool:
    return abs(a - b) <= EQ_TOL * max(1.0, abs(a), abs(b))


def _other(side: str) -> str:
    return {"plus": "minus", "minus": "plus"}[side]


def _check_side(side: str):
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")


# ------------------------------------------------------------ transition point


def gamma0(model: SpectralModel) -> Optional[float]:
    """Transition point; None for the hyperbolic regime (see crossover)."""
    v1, v2 = model.upsilon
    if model.regime == "Hyperbolic":
        return None
    if model.regime == "ND":
        return min(v1, 1.0) / min(v2, 1.0)
    return v1 / v2


def crossover(model: SpectralModel) -> Optional[float]:
    """|v1|/|v2| for the hyperbolic regime, where the limit changes form but not its law."""
    if model.regime != "Hyperbolic":
        return None
    v1, v2 = model.upsilon
    return abs(v1) / abs(v2)


def _exact_gamma0(model: SpectralModel) -> Fraction:
    v1, v2 = (Fraction(repr(v)) for v in model.upsilon)
    if model.regime == "ND":
        return min(v1, Fraction(1)) / min(v2, Fraction(1))
    if model.regime == "Hyperbolic":
        return abs(v1) / abs(v2)
    return v1 / v2


def side_of(model: SpectralModel, gamma) -> str:
    """'plus', 'minus' or 'balanced' relative to the transition (or crossover) point.

    A Fraction gamma is compared exactly against the decimal values of the
    exponents; floats use a relative tolerance of 1e-12.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if isinstance(gamma, Fraction):
        g0 = _exact_gamma0(model)
        return "plus" if gamma > g0 else "minus" if gamma < g0 else "balanced"
    g0 = gamma0(model) if model.regime != "Hyperbolic" else crossover(model)
    g = float(gamma)
    if abs(g - g0) <= EQ_TOL * max(1.0, g0):
        return "balanced"
    return "plus" if g > g0 else "minus"


# ----------------------------------------------------------------- exclusions


def check_supported(model: SpectralModel):
    """Raise for LRND parameter sets without a proved limit."""
    if model.regime == "LRND1":
        try:
            check_supported(model.swapped())
        except ExcludedParameterError as exc:
            raise ExcludedParameterError(
                f"{exc} (after exchanging coordinates of the LRND1 model)", exc.condition) from None
        return
    if model.regime != "LRND2":
        return
    v1, v2 = model.upsilon
    if _eq(v1, 1.0):
        raise ExcludedParameterError("LRND requires upsilon1 != 1 (upsilon1 = 1 excluded)",
                                     "upsilon1 != 1")
    if _eq(v1 + v2 / v1, 1.0):
        raise ExcludedParameterError(
            "LRND excludes upsilon1 + upsilon2/upsilon1 = 1", "upsilon1 + upsilon2/upsilon1 != 1")
    if _eq(v1 + v1 / v2, 1.0):
        warnings.warn("the stated LRND exclusion reads upsilon1 + upsilon2/upsilon1 != 1 but the "
                      "proof splits on upsilon1 + upsilon1/upsilon2; both boundaries are excluded",
                      LrndBoundaryWarning, stacklevel=2)
        raise ExcludedParameterError(
            "LRND excludes upsilon1 + upsilon1/upsilon2 = 1", "upsilon1 + upsilon1/upsilon2 != 1")
    if v1 < 1 and _eq(model.mu, v2 / v1 - v2):
        raise ExcludedParameterError(
            "LRND with mu = upsilon2/upsilon1 - upsilon2 is a boundary case without a proved limit",
            "mu != upsilon2/upsilon1 - upsilon2")


# -------------------------------------------------------------- Hurst indices


def _plus_pair(model: SpectralModel) -> HurstPair:
    v1, v2 = model.upsilon
    r = model.regime
    if r == "LRD":
        return HurstPair(0.5 * (1 + min(v1, 1.0)), 0.5 * (1 + v2 - v2 / max(v1, 1.0)))
    if r == "ND":
        return HurstPair(0.5 * (1 - min(v1, 1.0)), 0.5)
    if r == "LRND2":
        mu = model.mu
        h1 = 0.5 * (1 + min(v1 + mu * v1 / v2, 1.0))
        h2 = 0.5 * (1 - min(mu, v2 / v1 - v2))
        return HurstPair(h1, h2)
    raise AssertionError(r)


def hurst_pair(model: SpectralModel, side: str) -> HurstPair:
    _check_side(side)
    check_supported(model)
    r = model.regime
    if r == "Hyperbolic":
        v1, v2 = model.upsilon
        return HurstPair(0.5 * (1 + v1), 0.5 * (1 + v2))
    if r == "LRND1":
        return hurst_pair(model.swapped(), _other(side)).swapped()
    if side == "plus":
        return _plus_pair(model)
    sw = model.swapped()
    if r == "LRND2":
        # minus side is the LRD one with identical parameters
        v1, v2 = model.upsilon
        return HurstPair(0.5 * (1 + v1 - v1 / max(v2, 1.0)), 0.5 * (1 + min(v2, 1.0)))
    return _plus_pair(sw).swapped()


def H_of_gamma(model: SpectralModel, gamma: float) -> float:
    """Exponent of the normalization; at the transition both branches agree."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if model.regime == "Hyperbolic":
        p = hurst_pair(model, "plus")
        return p.H1 + gamma * p.H2
    s = side_of(model, gamma)
    p = hurst_pair(model, "minus" if s == "minus" else "plus")
    return p.H1 + gamma * p.H2


def log_factor(model: SpectralModel, gamma: float, log_rule: str = "statement") -> bool:
    """Whether the normalization carries (log+ lambda)^(1/2).

    log_rule="statement" puts a log factor on every log-critical case; "proof"
    drops it for ND when an exponent exceeds 1.
    """
    if log_rule not in LOG_RULES:
        raise ValueError(f"log_rule must be one of {LOG_RULES}")
    v1, v2 = model.upsilon
    r = model.regime
    if r in ("Hyperbolic", "LRND1", "LRND2"):
        if r != "Hyperbolic":
            check_supported(model)
        return False
    s = side_of(model, gamma)
    if r == "LRD":
        return (s == "plus" and _eq(v1, 1.0)) or (s == "minus" and _eq(v2, 1.0))
    # ND
    if log_rule == "statement":
        plus_hit = v1 >= 1.0 - EQ_TOL
        minus_hit = v2 >= 1.0 - EQ_TOL
    else:
        plus_hit = _eq(v1, 1.0)
        minus_hit = _eq(v2, 1.0)
    return (s in ("plus", "balanced") and plus_hit) or (s in ("minus", "balanced") and minus_hit)


def log_plus(lam: float) -> float:
    return max(1.0, math.log(lam)) if lam > 0 else 1.0


def normalization(model: SpectralModel, gamma: float, lam: float,
                  log_rule: str = "statement") -> float:
    """d = lam^H(gamma), times (log+ lam)^(1/2) when the regime's log rule fires."""
    if not lam >= 1:
        raise ValueError("lambda must be >= 1")
    d = lam ** H_of_gamma(model, gamma)
    if log_factor(model, gamma, log_rule):
        d *= math.sqrt(log_plus(lam))
    return d


# ------------------------------------------------------------------------ FBS


def r_fbm(H: float, x: float, y: float) -> float:
    if H == 0:
        return 1.0 if x == y else 0.5
    return 0.5 * (x ** (2 * H) + y ** (2 * H) - abs(x - y) ** (2 * H))


def fbs_cov(pair: HurstPair, x: Sequence[float], y: Sequence[float]) -> float:
    """Covariance of the fractional Brownian sheet with Hurst pair `pair`."""
    if min(x[0], x[1], y[0], y[1]) < 0:
        raise ValueError("points must lie in the positive quadrant")
    return r_fbm(pair.H1, x[0], y[0]) * r_fbm(pair.H2, x[1], y[1])


def fbm_spectral_constant(H: float) -> float:
    """Integral over R of |(1 - e^{iu})/u|^2 |u|^(1 - 2H), for H in (0, 1)."""
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    return math.pi / (H * gamma_fn(2 * H) * math.sin(H * math.pi))


def kappa_closed(pair: HurstPair) -> float:
    """Squared FBS spectral constant: product of the per-axis constants."""
    if not (0 < pair.H1 < 1 and 0 < pair.H2 < 1):
        raise ValueError("closed form needs both Hurst indices in (0, 1)")
    return fbm_spectral_constant(pair.H1) * fbm_spectral_constant(pair.H2)


def fbm_spectral_quadrature(H: float, rtol: float = KAPPA_RTOL) -> QuadratureResult:
    """The same constant by quadrature (independent check of the closed form)."""
    return integrate_line(lambda u: np.abs(u) ** (1 - 2 * H), kernel=fejer_line_kernel(),
                          decay=1 + 2 * H, tol=0.0, rtol=rtol)


def kappa_product_quadrature(pair: HurstPair, amplitude: float = 1.0,
                             rtol: float = KAPPA_RTOL) -> QuadratureResult:
    """2-D quadrature of amplitude * prod_j |(1-e^{iu_j})/u_j|^2 |u_j|^(1-2H_j)."""
    k = fejer_line_kernel()
    b1, b2 = 1 - 2 * pair.H1, 1 - 2 * pair.H2
    g = SingularIntegrand2D(lambda a, b: amplitude * np.abs(a) ** b1 * np.abs(b) ** b2,
                            AxisSpec(k, decay=2 - b1), AxisSpec(k, decay=2 - b2), even_each=True)
    return integrate_singular_2d(g, tol=0.0, rtol=rtol)


# ----------------------------------------------------------------- kappa cases


@dataclass(frozen=True)
class KappaValue:
    value: float
    method: str
    abs_error: float = 0.0


def _line_axis_f0_integral(model: SpectralModel, rtol: float) -> QuadratureResult:
    """Integral over u of f0(u, 1) (finite when f0 decays faster than 1/|u| along axis 1)."""
    v1, v2 = model.upsilon
    decay = v1
    if model.regime == "LRND2":
        decay = v1 * (1 + model.mu / v2)
    if not decay > 1:
        raise ExcludedParameterError("f0(u, 1) is not integrable in u", "integrable f0(., 1)")
    return integrate_line(lambda u: model.density(u, np.ones_like(u)), even=True, decay=decay,
                          singular_points=(0.0,), tol=0.0, rtol=rtol)


def _kappa_plus_lrd_like(model: SpectralModel, gamma: float, method: str, rtol: float) -> KappaValue:
    """Plus-side constant of the LRD theory (also the LRND minus side after swapping)."""
    v1, v2 = model.upsilon
    L10 = model.L_axis(1)
    if _eq(v1, 1.0):
        # the log comes from lam^-(gamma v2) < |u1| < lam^-1, where the kernel in u1
        # is already flat and f0 ~ L(1,0)/|u1|: a band of width (gamma v2 - 1) log lam
        return KappaValue(4 * math.pi * L10 * (gamma * v2 - 1), "closed:log-case")
    if v1 < 1:
        h1 = 0.5 * (1 + v1)
        if method == "quadrature":
            q = kappa_product_quadrature(HurstPair(h1, 0.5), L10, rtol)
            return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
        val = L10 * (2 * math.pi) ** 2 / (gamma_fn(2 + v1) * math.sin((1 + v1) * math.pi / 2))
        return KappaValue(val, "closed")
    # v1 > 1: kernel only on axis 2, f0 integrated over the whole plane
    h2 = 0.5 * (1 + v2 - v2 / v1)
    if method == "quadrature":
        g = SingularIntegrand2D(lambda a, b: model.density(a, b), AxisSpec(None, decay=v1),
                                AxisSpec(fejer_line_kernel(), decay=2.0),
                                even_each=model.separately_even, singular_exponent=1.0,
                                upsilon=(v1, v2))
        q = integrate_singular_2d(g, tol=0.0, rtol=rtol)
        return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
    q = _line_axis_f0_integral(model, rtol)
    return KappaValue(fbm_spectral_constant(h2) * q.value, "product:1d",
                      fbm_spectral_constant(h2) * q.abs_error_estimate)


def _kappa_plus_nd(model: SpectralModel, method: str, rtol: float) -> KappaValue:
    v1, _ = model.upsilon
    L10 = model.L_axis(1)
    if _eq(v1, 1.0):
        if method == "quadrature":
            q = integrate_line(lambda u: np.ones_like(u), kernel=fejer_line_kernel(),
                               tol=0.0, rtol=rtol)
            return KappaValue(4 * L10 * q.value, "quadrature:1d", 4 * L10 * q.abs_error_estimate)
        return KappaValue(8 * math.pi * L10, "closed")
    if v1 < 1:
        h1 = 0.5 * (1 - v1)
        if method == "quadrature":
            q = kappa_product_quadrature(HurstPair(h1, 0.5), L10, rtol)
            return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
        return KappaValue(L10 * fbm_spectral_constant(h1) * 2 * math.pi, "closed")
    # v1 > 1: depends on f along the whole axis, not only near the origin
    q = integrate_line(lambda v: model.density(v, np.zeros_like(v)) / (4 * np.sin(v / 2) ** 2),
                       lower=-math.pi, upper=math.pi, even=True, tol=0.0, rtol=rtol)
    return KappaValue(4 * math.pi * q.value, "quadrature:1d", 4 * math.pi * q.abs_error_estimate)


def _kappa_plus_lrnd2(model: SpectralModel, method: str, rtol: float) -> KappaValue:
    v1, v2 = model.upsilon
    mu = model.mu
    if v1 > 1:
        return _kappa_plus_lrd_like(model, 1.0, method, rtol)
    pair = _plus_pair(model)
    # leading constant of the vanishing factor along the axis s2 = 0
    ell_eff = model.ell * float(model._profile(1.0, 0.0))
    if mu < v2 / v1 - v2:
        if method == "quadrature":
            q = kappa_product_quadrature(pair, ell_eff, rtol)
            return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
        return KappaValue(ell_eff * kappa_closed(pair), "closed")
    if method == "quadrature":
        g = SingularIntegrand2D(lambda a, b: model.density(a, b), AxisSpec(None, decay=v1 * (1 + mu / v2)),
                                AxisSpec(fejer_line_kernel(), decay=2.0),
                                even_each=model.separately_even)
        q = integrate_singular_2d(g, tol=0.0, rtol=rtol)
        return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
    q = _line_axis_f0_integral(model, rtol)
    c = fbm_spectral_constant(pair.H2)
    return KappaValue(c * q.value, "product:1d", c * q.abs_error_estimate)


def kappa_detail(model: SpectralModel, gamma: float, side: str, method: str = "auto",
                 rtol: float = KAPPA_RTOL) -> KappaValue:
    """Squared long-range variance for the given side, with the route used.

    method "auto" prefers closed forms, "quadrature" evaluates the defining
    integral even when a closed form exists.
    """
    _check_side(side)
    if method not in ("auto", "quadrature"):
        raise ValueError("method must be 'auto' or 'quadrature'")
    check_supported(model)
    r = model.regime
    if r == "Hyperbolic":
        p = hurst_pair(model, "plus")
        L = model.L_axis(1 if side == "plus" else 2)
        if method == "quadrature":
            q = kappa_product_quadrature(p, L, rtol)
            return KappaValue(q.value, "quadrature:2d", q.abs_error_estimate)
        return KappaValue(L * kappa_closed(p), "closed")
    if r == "LRND1":
        return kappa_detail(model.swapped(), 1.0 / gamma, _other(side), method, rtol)
    if side == "plus":
        if r == "LRD":
            return _kappa_plus_lrd_like(model, gamma, method, rtol)
        if r == "ND":
            return _kappa_plus_nd(model, method, rtol)
        return _kappa_plus_lrnd2(model, method, rtol)
    # minus side: plus side of the swapped model; in the log cases that model's
    # normalization carries log(lam^gamma) = gamma log(lam), hence the factor gamma
    sw = model.swapped()
    if r == "ND":
        return _kappa_plus_nd(sw, method, rtol)
    kv = _kappa_plus_lrd_like(sw, 1.0 / gamma, method, rtol)
    if _eq(model.upsilon[1], 1.0):
        kv = KappaValue(kv.value * gamma, kv.method, kv.abs_error * gamma)
    return kv


def kappa_limit(model: SpectralModel, gamma: float, side: str, method: str = "auto",
                rtol: float = KAPPA_RTOL) -> float:
    return kappa_detail(model, gamma, side, method, rtol).value


# ------------------------------------------------------------ limit covariance


def well_balanced_cov(model: SpectralModel, x: Sequence[float], y: Sequence[float],
                      rtol: float = KAPPA_RTOL, tol: float = 0.0) -> QuadratureResult:
    """Real part of the spectral integral of the interval kernels against f0 on R^2."""
    v1, v2 = model.upsilon
    r = model.regime
    if r == "ND":
        d1, d2 = 2 - v1, 2 - v2
        sing = None
    elif r == "Hyperbolic":
        d1, d2 = 2 + v1, 2 + v2
        sing = None
    else:
        d1 = d2 = 2.0
        sing = 1.0
    g = SingularIntegrand2D(lambda a, b: model.density(a, b),
                            AxisSpec(RectKernel(float(x[0]), float(y[0]), "line"), decay=d1),
                            AxisSpec(RectKernel(float(x[1]), float(y[1]), "line"), decay=d2),
                            even_each=model.separately_even, singular_exponent=sing,
                            upsilon=None if sing is None else (v1, v2))
    return integrate_singular_2d(g, tol=tol, rtol=rtol)


def _side_cov(model, gamma, side, x, y, rtol):
    pair = hurst_pair(model, side)
    return kappa_limit(model, gamma, side, rtol=rtol) * fbs_cov(pair, x, y)


def limit_cov(model: SpectralModel, gamma: float, x: Sequence[float], y: Sequence[float],
              log_rule: str = "statement", rtol: float = KAPPA_RTOL) -> float:
    """Covariance of the scaling limit at (x, y).

    Off the transition: kappa^2 times the FBS covariance of that side. At the
    transition: the well-balanced spectral integral, or for ND with a zero Hurst
    index the sum of the two independent unbalanced limits. With
    log_rule="proof" the ND sum keeps only the components that survive the
    proof's normalization.
    """
    check_supported(model)
    s = side_of(model, gamma)
    if s != "balanced":
        return _side_cov(model, gamma, s, x, y, rtol)
    if model.regime == "ND":
        hp = hurst_pair(model, "plus").H1
        hm = hurst_pair(model, "minus").H2
        if min(hp, hm) > 0:
            return well_balanced_cov(model, x, y, rtol).value
        v1, v2 = model.upsilon
        keep_plus = keep_minus = True
        if log_rule == "proof":
            keep_plus = not (_eq(v2, 1.0) and not _eq(v1, 1.0))
            keep_minus = not (_eq(v1, 1.0) and not _eq(v2, 1.0))
        tot = 0.0
        if keep_plus:
            tot += _side_cov(model, gamma, "plus", x, y, rtol)
        if keep_minus:
            tot += _side_cov(model, gamma, "minus", x, y, rtol)
        return tot
    return well_balanced_cov(model, x, y, rtol).value


def limit_kind(model: SpectralModel, gamma: float) -> Dict:
    s = side_of(model, gamma)
    if model.regime == "Hyperbolic":
        p = hurst_pair(model, "plus")
        if s == "balanced":
            return {"kind": "NoTransition", "pair": p.as_list(), "form": "spectral-integral"}
        return {"kind": "NoTransition", "pair": p.as_list(),
                "kappa2": kappa_limit(model, gamma, s)}
    if s == "balanced":
        if model.regime == "ND":
            hp = hurst_pair(model, "plus").H1
            hm = hurst_pair(model, "minus").H2
            if min(hp, hm) == 0:
                return {"kind": "WellBalanced", "form": "sum-of-independent-FBS"}
            return {"kind": "WellBalanced", "form": "spectral-integral-rho"}
        return {"kind": "WellBalanced", "form": "spectral-integral-inverse-rho"}
    return {"kind": "UnbalancedFBS", "side": s, "pair": hurst_pair(model, s).as_list(),
            "kappa2": kappa_limit(model, gamma, s)}


# ----------------------------------------------------------------- prediction


@dataclass(frozen=True)
class ScalingPrediction:
    model: SpectralModel
    gamma0: Optional[float]
    crossover: Optional[float]
    plus_pair: HurstPair
    minus_pair: HurstPair
    kappa_plus: Optional[float]
    kappa_minus: Optional[float]
    log_rule: str = "statement"

    def H_of_gamma(self, gamma: float) -> float:
        return H_of_gamma(self.model, gamma)

    def log_flag(self, gamma: float) -> str:
        return "sqrt-log" if log_factor(self.model, gamma, self.log_rule) else "none"

    def limit_kind(self, gamma: float) -> Dict:
        return limit_kind(self.model, gamma)

    def to_dict(self, gamma_grid: Optional[Sequence[float]] = None) -> Dict:
        if gamma_grid is None:
            gamma_grid = default_gamma_grid(self.gamma0 or self.crossover)
        curve = [[float(g), self.H_of_gamma(g), self.log_flag(g)] for g in gamma_grid]
        return {
            "regime": self.model.regime,
            "gamma0": self.gamma0,
            "transition": self.model.regime != "Hyperbolic",
            "crossover": self.crossover,
            "H_plus": self.plus_pair.as_list(),
            "H_minus": self.minus_pair.as_list(),
            "H_curve": curve,
            "kappa": {"plus": self.kappa_plus, "minus": self.kappa_minus},
            "log_rule": self.log_rule,
            "model_digest": self.model.digest,
        }

    def to_json(self, gamma_grid: Optional[Sequence[float]] = None) -> str:
        return json.dumps(self.to_dict(gamma_grid), indent=2, sort_keys=False)


def default_gamma_grid(center: Optional[float]) -> List[float]:
    grid = sorted(set([0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0]
                      + ([float(center)] if center else [])))
    return grid


def predict(model: SpectralModel, log_rule: str = "statement", with_kappa: bool = True,
            gamma_ref: Tuple[float, float] = (None, None)) -> ScalingPrediction:
    """Bundle every closed-form prediction for a model.

    Kappa values that depend on gamma (the log cases) are reported at
    gamma_ref (defaults: 2*gamma0 on the plus side, gamma0/2 on the minus side).
    """
    check_supported(model)
    g0 = gamma0(model)
    cr = crossover(model)
    center = g0 if g0 is not None else cr
    gp = gamma_ref[0] or 2 * center
    gm = gamma_ref[1] or center / 2
    kp = km = None
    if with_kappa:
        kp = kappa_limit(model, gp, "plus")
        km = kappa_limit(model, gm, "minus")
    return ScalingPrediction(model, g0, cr, hurst_pair(model, "plus"), hurst_pair(model, "minus"),
                             kp, km, log_rule)
