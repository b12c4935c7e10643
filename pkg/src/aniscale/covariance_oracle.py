"""Exact second-order quantities at finite scale: autocovariances, rectangle-sum
variances and normalized covariances of anisotropic partial sums.

Everything here is deterministic; it is the reference against which the limit
theory and the Monte Carlo runs are compared.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import scaling_theory as th
from .quadrature import (AxisSpec, QuadratureResult, SingularIntegrand2D, _taper,
                         dirichlet_kernel, gauss_legendre, integrate_singular_2d)
from .spectral_models import FlatSpectrum

FINITE_RTOL = 1e-7


class DivergenceError(ValueError):
    """The spectral density is not integrable on the torus."""


class LagRangeError(ValueError):
    pass


def _check_integrable(model):
    if isinstance(model, FlatSpectrum):
        return
    if model.regime in ("LRD", "LRND1", "LRND2") and not model.exponents.index > 1:
        raise DivergenceError("1/rho is not integrable near the origin")


def side_lengths(lam: float, gamma: float, x: Sequence[float]) -> Tuple[int, int]:
    """[lam x1], [lam^gamma x2] with a guard against floating round-off below an integer."""
    a = lam * x[0]
    b = lam ** gamma * x[1]
    return int(math.floor(a + 1e-9 * max(1.0, a))), int(math.floor(b + 1e-9 * max(1.0, b)))


# --------------------------------------------------------------- rectangle sums


def rect_cov(model, n: Sequence[int], m: Sequence[int], rtol: float = FINITE_RTOL,
             tol: float = 0.0) -> QuadratureResult:
    """Covariance of the sums over [1..n1]x[1..n2] and [1..m1]x[1..m2] (unnormalized)."""
    _check_integrable(model)
    n1, n2 = int(n[0]), int(n[1])
    m1, m2 = int(m[0]), int(m[1])
    if min(n1, n2, m1, m2) < 1:
        raise ValueError("rectangle sides must be >= 1")
    even = getattr(model, "separately_even", True)
    g = SingularIntegrand2D(lambda a, b: model.density(a, b),
                            AxisSpec(dirichlet_kernel(n1, m1)), AxisSpec(dirichlet_kernel(n2, m2)),
                            even_each=even)
    return integrate_singular_2d(g, tol=tol, rtol=rtol)


def rect_variance(model, n1: int, n2: int, rtol: float = FINITE_RTOL) -> QuadratureResult:
    return rect_cov(model, (n1, n2), (n1, n2), rtol)


def default_norm(model, gamma: float, lam: float, log_rule: str = "statement") -> float:
    if isinstance(model, FlatSpectrum):
        return lam ** ((1 + gamma) / 2)
    return th.normalization(model, gamma, lam, log_rule)


def finite_cov(model, lam: float, gamma: float, x: Sequence[float], y: Sequence[float],
               log_rule: str = "statement", norm: Optional[float] = None,
               rtol: float = FINITE_RTOL, with_error: bool = False):
    """Normalized covariance of the partial sums at x and y for scale lam.

    Side lengths are floor(lam x1) and floor(lam^gamma x2), so small lam shows
    staircase effects by design. `norm` overrides the theoretical d.
    """
    if not lam >= 1:
        raise ValueError("lambda must be >= 1")
    n = side_lengths(lam, gamma, x)
    m = side_lengths(lam, gamma, y)
    if min(n + m) < 1:
        raise ValueError(f"empty rectangle at lambda={lam}, gamma={gamma}: sides {n}, {m}")
    d = default_norm(model, gamma, lam, log_rule) if norm is None else float(norm)
    q = rect_cov(model, n, m, rtol)
    val = q.value / d ** 2
    if with_error:
        return val, q.abs_error_estimate / d ** 2
    return val


# ----------------------------------------------------------- autocovariances


@dataclass
class CovarianceTable:
    """r(k1, k2) for |k_i| <= K_max, indexed values[k1 + K, k2 + K]."""
    values: np.ndarray
    K_max: int
    grid_resolution: int
    tolerance: float
    errors: np.ndarray
    model_digest: str
    strip_cells: int = 64

    def r(self, k1: int, k2: int) -> float:
        K = self.K_max
        if abs(k1) > K or abs(k2) > K:
            raise LagRangeError(f"lag ({k1}, {k2}) outside the table (K_max={K})")
        return float(self.values[k1 + K, k2 + K])

    def to_csv(self, path: str, k_limit: Optional[int] = None):
        K = self.K_max
        kl = K if k_limit is None else min(K, k_limit)
        with open(path, "w", newline="") as fh:
            fh.write(f"# model_digest={self.model_digest}\n# K_max={K}\n"
                     f"# resolution={self.grid_resolution}\n# tolerance={self.tolerance!r}\n")
            w = csv.writer(fh)
            w.writerow(["k1", "k2", "r"])
            for k1 in range(-kl, kl + 1):
                for k2 in range(-kl, kl + 1):
                    w.writerow([k1, k2, f"{self.values[k1 + K, k2 + K]:.17g}"])


def _graded_rule(lo: float, hi: float, m: int = 10, ratio: float = 2.0, floor: float = 1e-15):
    """Gauss-Legendre nodes on [lo, hi] (lo >= 0) graded geometrically toward lo = 0."""
    x, w = gauss_legendre(m)
    pts = [hi]
    v = hi
    if lo == 0.0:
        while v > floor * hi:
            v /= ratio
            pts.append(v)
        pts.append(0.0)
    else:
        pts.append(lo)
    pts = np.array(sorted(set(pts)))
    a, b = pts[:-1], pts[1:]
    h = (b - a) / 2
    nodes = ((a + b) / 2)[:, None] + h[:, None] * x[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def _uniform_panels(lo: float, hi: float, width: float, m: int = 10):
    x, w = gauss_legendre(m)
    npan = max(1, int(math.ceil((hi - lo) / width)))
    pts = np.linspace(lo, hi, npan + 1)
    a, b = pts[:-1], pts[1:]
    h = (b - a) / 2
    nodes = ((a + b) / 2)[:, None] + h[:, None] * x[None, :]
    return nodes.ravel(), (h[:, None] * w[None, :]).ravel()


def _line_rule(W: float, K: int):
    """Nodes on [-pi, pi]: graded toward 0 inside [-W/2, W/2], panels resolving lag K outside."""
    gn, gw = _graded_rule(0.0, W / 2)
    un, uw = _uniform_panels(W / 2, math.pi, min(2 * math.pi / max(K, 1), W / 16))
    pos_n = np.concatenate([gn, un])
    pos_w = np.concatenate([gw, uw])
    return np.concatenate([-pos_n[::-1], pos_n]), np.concatenate([pos_w[::-1], pos_w])


def _strip_rule(W: float, K: int):
    """Nodes on (0, W): graded toward 0, then panels through the cutoff transition."""
    gn, gw = _graded_rule(0.0, W / 2)
    un, uw = _uniform_panels(W / 2, W, min(2 * math.pi / max(K, 1), W / 16))
    return np.concatenate([gn, un]), np.concatenate([gw, uw])


def _cutoff(u, W: float):
    """Smooth even bump: 1 on |u| <= W/2, 0 on |u| >= W."""
    return _taper(np.abs(u), W / 2)


def _cos_sin(k: np.ndarray, u: np.ndarray):
    arg = np.outer(k, u)
    return np.cos(arg), np.sin(arg)


def _weighted_transform(model, u1, w1, u2, w2, mult, K: int) -> np.ndarray:
    """Sum of w1 w2 mult f cos(k.u) for k1 in 0..K, k2 in -K..K."""
    k1 = np.arange(0, K + 1)
    k2 = np.arange(-K, K + 1)
    F = model.density(u1[:, None], u2[None, :]) * mult
    Fw = np.where(np.isfinite(F), F, 0.0) * w1[:, None] * w2[None, :]
    C1, S1 = _cos_sin(k1, u1)
    C2, S2 = _cos_sin(k2, u2)
    return C1 @ Fw @ C2.T - S1 @ Fw @ S2.T


def _near_axes(model, W: float, K: int) -> np.ndarray:
    """Integral of [1 - (1 - phi(u1))(1 - phi(u2))] f cos(k.u) by graded quadrature.

    Only u1 > 0 (or u2 > 0) is sampled; the other half follows from f(-u) = f(u)
    and is accounted for by the factor 2.
    """
    a_n, a_w = _strip_rule(W, K)
    b_n, b_w = _line_rule(W, K)
    pa = _cutoff(a_n, W)
    pb = _cutoff(b_n, W)
    s1 = _weighted_transform(model, a_n, a_w, b_n, b_w, pa[:, None] * (1 - pb[None, :]), K)
    s2 = _weighted_transform(model, b_n, b_w, a_n, a_w, (1 - pb[:, None]) * pa[None, :], K)
    sb = _weighted_transform(model, a_n, a_w, np.concatenate([-a_n[::-1], a_n]),
                             np.concatenate([a_w[::-1], a_w]),
                             pa[:, None] * np.concatenate([pa[::-1], pa])[None, :], K)
    return 2.0 * (s1 + s2 + sb)


def _midpoint_fft(model, M: int, K: int, W: float, stripe: int = 256) -> np.ndarray:
    """Midpoint rule for (1 - phi(u1))(1 - phi(u2)) f on the half-cell offset grid."""
    h = 2 * math.pi / M
    c = -math.pi + (np.arange(M) + 0.5) * h
    keep = 1.0 - _cutoff(c, W)
    k1 = np.arange(0, K + 1)
    k2 = np.arange(-K, K + 1)
    # sum_j F_ij e^{i k2 c_j} = e^{i k2 (h/2 - pi)} * sum_j F_ij e^{2 pi i k2 j / M}
    ph = np.exp(1j * k2 * (h / 2 - math.pi))
    idx = np.mod(k2, M)
    out = np.zeros((K + 1, 2 * K + 1))
    C1, S1 = _cos_sin(k1, c)
    for s in range(0, M, stripe):
        rows = slice(s, min(M, s + stripe))
        F = model.density(c[rows, None], c[None, :]) * keep[rows, None] * keep[None, :]
        G = np.fft.ifft(F, axis=1)[:, idx] * M * ph[None, :]
        out += C1[:, rows] @ G.real - S1[:, rows] @ G.imag
    return out * h * h


def _table_half(model, M: int, K: int, strip_cells: int) -> np.ndarray:
    W = strip_cells * 2 * math.pi / M
    return _midpoint_fft(model, M, K, W) + _near_axes(model, W, K)


def _mirror(half: np.ndarray, K: int, even_each: bool = False) -> np.ndarray:
    full = np.empty((2 * K + 1, 2 * K + 1))
    half = half.copy()
    if even_each:
        half = 0.5 * (half + half[:, ::-1])
    else:
        half[0] = 0.5 * (half[0] + half[0, ::-1])      # r(0, k) = r(0, -k) exactly
    full[K:, :] = half
    full[:K, :] = half[1:, ::-1][::-1, :]
    return full


def autocovariance_table(model, K_max: int = 1024, resolution: int = 2 ** 13,
                         strip_cells: int = 64) -> CovarianceTable:
    """Autocovariances by a midpoint rule with graded quadrature near the axes.

    A smooth cutoff of width strip_cells grid cells separates the axis strips,
    where the density may be singular or non-smooth, from the bulk, where the
    offset-grid midpoint rule (one FFT per row stripe) is accurate.

    The quoted tolerance is the largest change against the same computation at
    half the resolution; `errors` keeps that change per lag.
    """
    _check_integrable(model)
    M = int(resolution)
    if M & (M - 1) or M < max(8 * K_max, 4 * strip_cells):
        raise ValueError("resolution must be a power of two, at least 8 * K_max "
                         "and 4 * strip_cells")
    K = int(K_max)
    even = getattr(model, "separately_even", True)
    fine = _mirror(_table_half(model, M, K, strip_cells), K, even)
    coarse = _mirror(_table_half(model, M // 2, K, strip_cells), K, even)
    err = np.abs(fine - coarse)
    digest = model.digest
    return CovarianceTable(fine, K, M, float(err.max()), err, digest, strip_cells)


def rect_sum_variance(table: CovarianceTable, n1: int, n2: int, with_error: bool = False):
    """Sum over |k_i| < n_i of (n1 - |k1|)(n2 - |k2|) r(k): variance of a rectangle sum."""
    K = table.K_max
    if n1 < 1 or n2 < 1:
        raise ValueError("sides must be >= 1")
    if n1 - 1 > K or n2 - 1 > K:
        raise LagRangeError(f"sides ({n1}, {n2}) need lags beyond K_max={K}")
    k1 = np.arange(-(n1 - 1), n1)
    k2 = np.arange(-(n2 - 1), n2)
    w1 = (n1 - np.abs(k1)).astype(float)
    w2 = (n2 - np.abs(k2)).astype(float)
    block = table.values[k1[:, None] + K, k2[None, :] + K]
    val = float(w1 @ block @ w2)
    if with_error:
        eb = table.errors[k1[:, None] + K, k2[None, :] + K]
        return val, float(w1 @ eb @ w2)
    return val


# ------------------------------------------------------------ convergence scan


@dataclass
class ConvergenceScan:
    gamma: float
    rows: List[Dict] = field(default_factory=list)
    top_octave_change: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_csv(self, path: str, regime: str):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["regime", "gamma", "lambda", "x1", "x2", "y1", "y2", "finite_cov",
                        "quad_err", "limit_cov", "rel_delta"])
            for r in self.rows:
                w.writerow([regime, f"{self.gamma:.17g}", f"{r['lambda']:.17g}",
                            *[f"{v:.17g}" for v in (*r["x"], *r["y"])],
                            f"{r['finite_cov']:.17g}", f"{r['quad_err']:.17g}",
                            f"{r['limit_cov']:.17g}", f"{r['rel_delta']:.17g}"])


def convergence_scan(model, gamma: float, lambda_list: Sequence[float],
                     xy_pairs: Sequence[Tuple[Sequence[float], Sequence[float]]],
                     log_rule: str = "statement") -> ConvergenceScan:
    """finite_cov along a lambda list against the limit covariance."""
    lams = [float(l) for l in lambda_list]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda list must be increasing")
    scan = ConvergenceScan(float(gamma))
    for x, y in xy_pairs:
        lim = th.limit_cov(model, gamma, x, y, log_rule=log_rule)
        series = []
        for lam in lams:
            v, e = finite_cov(model, lam, gamma, x, y, log_rule=log_rule, with_error=True)
            series.append(v)
            scan.rows.append({"lambda": lam, "x": tuple(map(float, x)), "y": tuple(map(float, y)),
                              "finite_cov": v, "quad_err": e, "limit_cov": lim,
                              "rel_delta": v / lim - 1 if lim != 0 else float("nan")})
        key = f"{tuple(x)}|{tuple(y)}"
        top = [i for i, l in enumerate(lams) if l >= lams[-1] / 2]
        if len(series) < 2 or len(top) < 2:
            scan.top_octave_change[key] = None
        else:
            scan.top_octave_change[key] = max(abs(series[i] - series[i - 1]) / abs(series[i])
                                              for i in top[1:])
    return scan
