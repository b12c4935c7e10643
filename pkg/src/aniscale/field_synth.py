"""Moving-average synthesis of linear random fields on finite lattices.

X(t) = sum_s a(t - s) eps(s) with a obtained from the spectral density through
a real nonnegative square root of f. Innovations come from a counter-based
generator keyed by (seed, replica), so output never depends on scheduling.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy import fft as sfft

from .covariance_oracle import _check_integrable
from .quadrature import AxisSpec, SingularIntegrand2D, integrate_singular_2d

LAWS = ("gaussian", "rademacher", "uniform")


class GeometryError(ValueError):
    pass


class InsufficientReplicasError(ValueError):
    pass


def torus_mass(model, rtol: float = 1e-8) -> float:
    """Integral of f over [-pi, pi]^2."""
    if not hasattr(model, "regime") or model.regime == "Flat":
        return float(model.density(0.5, 0.5)) * (2 * math.pi) ** 2
    g = SingularIntegrand2D(lambda a, b: model.density(a, b), AxisSpec(end=math.pi),
                            AxisSpec(end=math.pi), even_each=getattr(model, "separately_even", True))
    return integrate_singular_2d(g, rtol=rtol).value


@dataclass
class MACoefficients:
    """a(t) for |t_i| <= N/2 - 1, indexed values[t1 + N/2 - 1, t2 + N/2 - 1]."""
    values: np.ndarray
    N: int
    model_digest: str
    l2_mass_captured: float
    total_mass: float

    @property
    def half(self) -> int:
        return self.N // 2 - 1

    def a(self, t1: int, t2: int) -> float:
        h = self.half
        if abs(t1) > h or abs(t2) > h:
            return 0.0
        return float(self.values[t1 + h, t2 + h])


def ma_coefficients(model, N: int = 1024) -> MACoefficients:
    """Coefficients from ahat = sqrt(f) / (2 pi) sampled on the half-cell offset grid.

    The offset grid never hits the origin or the axes. The alias row t = N/2 is
    dropped so that the window is symmetric and a(t) = a(-t) holds exactly.
    """
    _check_integrable(model)
    if N < 64 or N & (N - 1):
        raise ValueError("N must be a power of two >= 64")
    h = 2 * math.pi / N
    c = -math.pi + (np.arange(N) + 0.5) * h
    ahat = np.sqrt(model.density(c[:, None], c[None, :])) / (2 * math.pi)
    t = np.arange(N)
    t = np.where(t < N // 2, t, t - N)
    # a(t) = h^2 sum_j ahat_j e^{i t.u_j}, with u_j = -pi + h/2 + j h
    ph = np.exp(1j * t * (h / 2 - math.pi))
    full = (sfft.ifft2(ahat) * (N * N * h * h) * ph[:, None] * ph[None, :]).real
    half = N // 2 - 1
    idx = np.r_[np.arange(N - half, N), np.arange(0, half + 1)]
    win = full[np.ix_(idx, idx)]
    win = 0.5 * (win + win[::-1, ::-1])
    mass = torus_mass(model)
    return MACoefficients(win, N, model.digest, float(np.sum(win ** 2) / mass), mass)


def innovations(law: str, rng: np.random.Generator, shape) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "rademacher":
        n = int(np.prod(shape))
        bits = np.unpackbits(np.frombuffer(rng.bytes((n + 7) // 8), dtype=np.uint8))[:n]
        return (bits.astype(float) * 2.0 - 1.0).reshape(shape)
    if law == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
    raise ValueError(f"unknown innovation law {law!r}; expected one of {LAWS}")


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    key = np.array([int(seed) & (2 ** 64 - 1), int(replica) & (2 ** 64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class LatticeField:
    values: np.ndarray
    innovation_law: str
    master_seed: int
    replica: int
    coeff_digest: str
    N: int

    def save(self, path: str):
        """Row-major float64 binary plus a JSON sidecar at path + '.json'."""
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        meta = {"dims": list(self.values.shape), "dtype": "float64-le", "order": "row-major",
                "seed": self.master_seed, "replica": self.replica, "law": self.innovation_law,
                "model_digest": self.coeff_digest, "N": self.N}
        with open(path + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    def to_csv(self, path: str):
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")

    @staticmethod
    def load(path: str) -> "LatticeField":
        with open(path + ".json") as fh:
            meta = json.load(fh)
        vals = np.fromfile(path, dtype="<f8").reshape(meta["dims"])
        return LatticeField(vals, meta["law"], meta["seed"], meta["replica"],
                            meta["model_digest"], meta["N"])


def _torus_kernel(coeffs: MACoefficients, P1: int, P2: int) -> np.ndarray:
    h = coeffs.half
    K = np.zeros((P1, P2))
    r = np.arange(-h, h + 1)
    K[np.ix_(r % P1, r % P2)] = coeffs.values
    return sfft.rfft2(K)


def synthesize(coeffs: MACoefficients, law: str, seed: int, n1: int, n2: int,
               replica: int = 0, negate: bool = False) -> LatticeField:
    """One n1 x n2 field by circular convolution on an (n1+N) x (n2+N) torus.

    Only the part of the torus output that never sees wrapped innovations is kept.
    """
    if n1 < 1 or n2 < 1:
        raise GeometryError("field sides must be >= 1")
    N = coeffs.N
    P1, P2 = n1 + N, n2 + N
    eps = innovations(law, replica_rng(seed, replica), (P1, P2))
    if negate:
        eps = -eps
    Y = sfft.irfft2(sfft.rfft2(eps) * _torus_kernel(coeffs, P1, P2), s=(P1, P2))
    off = N // 2
    X = np.ascontiguousarray(Y[off:off + n1, off:off + n2])
    return LatticeField(X, law, int(seed), int(replica), coeffs.model_digest, N)


def rect_weights(coeffs: MACoefficients, n1: int, n2: int, P1: int, P2: int) -> np.ndarray:
    """w(s) with sum_s w(s) eps(s) equal to the sum of the synthesized field over [0, n1) x [0, n2).

    Uses the same torus layout as synthesize (field origin at torus index N/2),
    so a field drawn on a P1 x P2 torus and this functional see the same innovations.
    """
    N = coeffs.N
    if P1 < n1 + N or P2 < n2 + N:
        raise GeometryError("torus too small for the rectangle and coefficient window")
    off = N // 2
    box = np.zeros((P1, P2))
    box[off:off + n1, off:off + n2] = 1.0
    # w(s) = sum_t box(t) a(t - s): box convolved with a, since a is even
    return sfft.irfft2(sfft.rfft2(box) * _torus_kernel(coeffs, P1, P2), s=(P1, P2))


def truncated_rect_variance(coeffs: MACoefficients, n1: int, n2: int) -> float:
    """Exact variance of a rectangle sum for the truncated moving average."""
    N = coeffs.N
    w = rect_weights(coeffs, n1, n2, n1 + N, n2 + N)
    return float(np.sum(w * w))


def lindeberg_ratio(coeffs: MACoefficients, lam: float, gamma: float, norm: float) -> float:
    """max over shifts u of |sum_{t in rectangle} a(t - u)| / norm.

    Uses 2-D prefix sums of a, so it is exact for the truncated coefficients;
    shifts outside the reach of the window give zero.
    """
    n1 = int(math.floor(lam + 1e-9 * lam))
    n2 = int(math.floor(lam ** gamma + 1e-9 * lam ** gamma))
    if n1 < 1 or n2 < 1:
        raise GeometryError("empty rectangle")
    if not norm > 0:
        raise ValueError("norm must be positive")
    A = coeffs.values
    W = A.shape[0]
    # pad so every shift touching the window is represented
    P = np.zeros((W + 2 * n1, W + 2 * n2))
    P[n1:n1 + W, n2:n2 + W] = A
    C = np.zeros((P.shape[0] + 1, P.shape[1] + 1))
    C[1:, 1:] = P.cumsum(0).cumsum(1)
    sums = C[n1:, n2:] - C[:-n1, n2:] - C[n1:, :-n2] + C[:-n1, :-n2]
    return float(np.max(np.abs(sums)) / norm)


def periodogram_check(fields: Sequence[LatticeField], model, freq_list) -> List[Dict]:
    """Averaged periodogram at the given frequencies against f.

    Each field's periodogram |sum_t X(t) e^{-i t.u}|^2 / (n1 n2 (2 pi)^2) has mean
    close to f(u) away from the origin; z = (mean - f) / stderr over replicas.
    """
    if len(fields) < 30:
        raise InsufficientReplicasError("periodogram_check needs at least 30 replicas")
    out = []
    n1, n2 = fields[0].values.shape
    t1 = np.arange(n1)
    t2 = np.arange(n2)
    for u in freq_list:
        e1 = np.exp(-1j * u[0] * t1)
        e2 = np.exp(-1j * u[1] * t2)
        vals = np.array([abs(e1 @ fl.values @ e2) ** 2 for fl in fields]) / (n1 * n2 * (2 * math.pi) ** 2)
        mean = vals.mean()
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        target = float(model.density(u[0], u[1]))
        out.append({"u": tuple(map(float, u)), "mean": float(mean), "stderr": float(se),
                    "f": target, "z": float((mean - target) / se) if se > 0 else 0.0})
    return out
