"""Singular spectral densities on the 2-D torus.

A model is a regime tag plus anisotropic exponents and an angular profile.
The density is defined exactly by its leading form on all of [-pi, pi]^2.
"""
from __future__ import annotations

import ast
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

REGIMES = ("LRD", "ND", "LRND1", "LRND2", "Hyperbolic")

_REGIME_ALIASES = {
    "lrd": "LRD",
    "nd": "ND",
    "lrnd1": "LRND1",
    "lrnd2": "LRND2",
    "lrnd": "LRND2",
    "hyperbolic": "Hyperbolic",
    "hyp": "Hyperbolic",
}

_ALLOWED_FUNCS = {
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "cos": np.cos,
    "sin": np.sin,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "minimum": np.minimum,
    "maximum": np.maximum,
}
_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}

INVARIANCE_TOL = 1e-8


class ModelError(ValueError):
    """Invalid model parameters or angular profile."""


def canonical_regime(name: str) -> str:
    if name in REGIMES:
        return name
    key = name.strip().lower()
    if key not in _REGIME_ALIASES:
        raise ModelError(f"unknown regime {name!r}; expected one of {REGIMES}")
    return _REGIME_ALIASES[key]


@dataclass(frozen=True)
class RadialExponents:
    upsilon1: float
    upsilon2: float

    @property
    def index(self) -> float:
        """Integrability index 1/u1 + 1/u2."""
        return 1.0 / self.upsilon1 + 1.0 / self.upsilon2

    def absolute(self) -> "RadialExponents":
        return RadialExponents(abs(self.upsilon1), abs(self.upsilon2))

    def swapped(self) -> "RadialExponents":
        return RadialExponents(self.upsilon2, self.upsilon1)


def rho(u, e: RadialExponents):
    """Radial function |u1|^v1 + |u2|^v2 (vectorized over the last axis of u)."""
    u = np.asarray(u, dtype=float)
    return np.abs(u[..., 0]) ** e.upsilon1 + np.abs(u[..., 1]) ** e.upsilon2


def rho_p(u, e: RadialExponents, p: float):
    """(|u1|^(p v1) + |u2|^(p v2))^(1/p), equivalent to rho up to constants."""
    if not p > 0:
        raise ModelError("p must be positive")
    u = np.asarray(u, dtype=float)
    s = np.abs(u[..., 0]) ** (p * e.upsilon1) + np.abs(u[..., 1]) ** (p * e.upsilon2)
    return s ** (1.0 / p)


def _rho2(u1, u2, e: RadialExponents, p: float = 1.0):
    if p == 1.0:
        return np.abs(u1) ** e.upsilon1 + np.abs(u2) ** e.upsilon2
    s = np.abs(u1) ** (p * e.upsilon1) + np.abs(u2) ** (p * e.upsilon2)
    return s ** (1.0 / p)


def check_integrability(e: RadialExponents, w: float) -> Tuple[str, str]:
    """Where rho^(-w) is integrable: near 0 iff w < index, at infinity iff w > index."""
    if not (e.upsilon1 > 0 and e.upsilon2 > 0):
        raise ModelError("exponents must be positive")
    if not w > 0:
        raise ModelError("w must be positive")
    idx = e.index
    near = "integrable-near-0" if w < idx else "divergent-near-0"
    far = "integrable-at-infinity" if w > idx else "divergent-at-infinity"
    return near, far


def _compile_expression(expr: str) -> Callable:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ModelError(f"angular expression does not parse: {expr!r}") from exc
    allowed_nodes = (
        ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
        ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub,
        ast.UAdd, ast.Mod,
    )
    for node in ast.walk(tree):
        if not isinstance(node, allowed_nodes):
            raise ModelError(f"disallowed syntax in angular expression: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in ("s1", "s2") \
                and node.id not in _ALLOWED_FUNCS and node.id not in _ALLOWED_CONSTS:
            raise ModelError(f"unknown name {node.id!r} in angular expression")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                               and node.func.id in _ALLOWED_FUNCS):
            raise ModelError("only whitelisted functions may be called")
    code = compile(tree, "<angular>", "eval")
    env = {"__builtins__": {}}
    env.update(_ALLOWED_FUNCS)
    env.update(_ALLOWED_CONSTS)

    def fn(s1, s2):
        out = eval(code, env, {"s1": s1, "s2": s2})
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(s1, s2).shape)

    return fn


@dataclass(frozen=True)
class AngularProfile:
    """Angular function on the unit sphere {rho = 1}.

    ``expr`` is "const:<c>" or an expression in the normalized coordinates s1, s2.
    For LRND regimes the canonical vanishing factor ell*|s_i|^mu is applied on top.
    """
    expr: str = "const:1"

    def compiled(self) -> Callable:
        if self.expr.startswith("const:"):
            c = float(self.expr.split(":", 1)[1])
            return lambda s1, s2: np.full(np.broadcast(s1, s2).shape, c)
        return _compile_expression(self.expr)


@dataclass(frozen=True)
class SpectralModel:
    regime: str
    exponents: RadialExponents
    angular: AngularProfile = field(default_factory=AngularProfile)
    mu: Optional[float] = None
    ell: Optional[float] = None
    p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "regime", canonical_regime(self.regime))
        _validate(self)
        object.__setattr__(self, "_profile", self.angular.compiled())
        const = None
        if self.angular.expr.startswith("const:") and not self.regime.startswith("LRND"):
            const = float(self.angular.expr.split(":", 1)[1])
        object.__setattr__(self, "_const", const)
        _check_profile(self)
        object.__setattr__(self, "_sep_even", _is_separately_even(self))

    # convenience constructor
    @classmethod
    def make(cls, regime: str, upsilon1: float, upsilon2: float, *, angular: str = "const:1",
             mu: Optional[float] = None, ell: Optional[float] = None, p: float = 1.0):
        regime = canonical_regime(regime)
        if regime.startswith("LRND") and ell is None:
            ell = 1.0
        return cls(regime, RadialExponents(float(upsilon1), float(upsilon2)),
                   AngularProfile(angular), None if mu is None else float(mu),
                   None if ell is None else float(ell), float(p))

    @property
    def upsilon(self) -> Tuple[float, float]:
        return self.exponents.upsilon1, self.exponents.upsilon2

    @property
    def radial(self) -> RadialExponents:
        """Exponents of the radial function (absolute values for the hyperbolic regime)."""
        return self.exponents.absolute() if self.regime == "Hyperbolic" else self.exponents

    def profile(self, s1, s2):
        """Angular function on the unit sphere, including the LRND vanishing factor."""
        val = self._profile(s1, s2)
        if self.regime == "LRND2":
            val = self.ell * np.abs(s2) ** self.mu * val
        elif self.regime == "LRND1":
            val = self.ell * np.abs(s1) ** self.mu * val
        return val

    def L(self, u1, u2):
        """Generalized invariant angular function at (u1, u2) != 0."""
        e = self.radial
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        r = _rho2(u1, u2, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = u1 / r ** (1.0 / e.upsilon1)
            s2 = u2 / r ** (1.0 / e.upsilon2)
        return self.profile(s1, s2)

    def L_axis(self, axis: int) -> float:
        """L(1,0) for axis=1, L(0,1) for axis=2."""
        return float(self.L(1.0, 0.0) if axis == 1 else self.L(0.0, 1.0))

    def density(self, u1, u2):
        """Vectorized density f(u1, u2); also valid on R^2 as the limit form."""
        e = self.radial
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            Lv = self._const if self._const is not None else self.L(u1, u2)
            if self.regime == "Hyperbolic":
                v1, v2 = self.exponents.upsilon1, self.exponents.upsilon2
                out = Lv * np.abs(u1) ** (-v1) * np.abs(u2) ** (-v2)
            elif self.regime == "ND":
                out = Lv * _rho2(u1, u2, e, self.p)
                out = np.where((u1 == 0) & (u2 == 0), 0.0, out)
            else:
                out = Lv / _rho2(u1, u2, e, self.p)
                out = np.where((u1 == 0) & (u2 == 0), np.inf, out)
        return out

    @property
    def separately_even(self) -> bool:
        """True when f(u1, -u2) = f(u1, u2), so a quadrant suffices."""
        return self._sep_even

    def swapped(self) -> "SpectralModel":
        """The same model with coordinates exchanged."""
        expr = self.angular.expr
        if not expr.startswith("const:"):
            expr = _swap_names(expr)
        regime = {"LRND1": "LRND2", "LRND2": "LRND1"}.get(self.regime, self.regime)
        return SpectralModel(regime, self.exponents.swapped(), AngularProfile(expr),
                             self.mu, self.ell, self.p)

    def total_mass_hint(self) -> float:
        return float(self.density(1.0, 1.0))

    def serialize(self) -> str:
        return serialize(self)

    @property
    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]


def _swap_names(expr: str) -> str:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ModelError(f"angular expression does not parse: {expr!r}") from exc
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id in ("s1", "s2"):
            node.id = "s2" if node.id == "s1" else "s1"
    return ast.unparse(tree)


def _validate(m: SpectralModel):
    v1, v2 = m.exponents.upsilon1, m.exponents.upsilon2
    if not (math.isfinite(v1) and math.isfinite(v2)):
        raise ModelError("exponents must be finite")
    if not m.p > 0:
        raise ModelError("p must be positive")
    if m.regime == "Hyperbolic":
        if not (abs(v1) < 1 and abs(v2) < 1):
            raise ModelError("hyperbolic regime requires |upsilon_i| < 1")
        if v1 == 0 or v2 == 0:
            raise ModelError("hyperbolic exponents must be nonzero")
    else:
        if not (v1 > 0 and v2 > 0):
            raise ModelError("exponents must be positive")
        if m.regime in ("LRD", "LRND1", "LRND2") and not m.exponents.index > 1:
            raise ModelError("LRD/LRND require 1/upsilon1 + 1/upsilon2 > 1 (integrability)")
    if m.regime.startswith("LRND"):
        if m.mu is None or not (0 < m.mu < 1):
            raise ModelError("LRND requires mu in (0, 1)")
        if m.ell is None or not m.ell > 0:
            raise ModelError("LRND requires ell > 0")
    elif m.mu is not None:
        raise ModelError("mu is only meaningful for LRND regimes")


def _sphere_samples(m: SpectralModel, n: int = 181):
    e = m.radial
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False) + 0.0123
    c, s = np.cos(th), np.sin(th)
    # map the circle to the anisotropic sphere |s1|^v1 + |s2|^v2 = 1
    r = np.abs(c) ** e.upsilon1 + np.abs(s) ** e.upsilon2
    s1 = c / r ** (1.0 / e.upsilon1)
    s2 = s / r ** (1.0 / e.upsilon2)
    return s1, s2


def _check_profile(m: SpectralModel):
    s1, s2 = _sphere_samples(m)
    with np.errstate(all="ignore"):
        vals = m.profile(s1, s2)
        neg = m.profile(-s1, -s2)
    if not np.all(np.isfinite(vals)):
        raise ModelError("angular profile must be finite on the unit sphere")
    if np.max(np.abs(vals - neg)) > INVARIANCE_TOL * max(1.0, np.max(np.abs(vals))):
        raise ModelError("angular profile must be even: L(x) = L(-x)")
    if m.regime.startswith("LRND"):
        axis_coord = s2 if m.regime == "LRND2" else s1
        off = np.abs(axis_coord) > 1e-6
        if np.any(vals[off] <= 0):
            raise ModelError("LRND profile must be positive off its vanishing axis")
        base = m._profile(s1, s2)
        if np.any(base <= 0):
            raise ModelError("LRND positive factor must be strictly positive "
                             "(doubly-vanishing profiles are not supported)")
        # a positive base factor means only the declared axis can vanish
    else:
        if np.any(vals <= 0):
            raise ModelError("angular profile must be strictly positive")
    # generalized invariance under anisotropic dilation, sampled
    e = m.radial
    rng = np.random.default_rng(12345)
    u1 = rng.uniform(-3, 3, 64)
    u2 = rng.uniform(-3, 3, 64)
    base = m.L(u1, u2)
    for lam in (0.1, 10.0):
        d = m.L(lam ** (1 / e.upsilon1) * u1, lam ** (1 / e.upsilon2) * u2)
        if np.max(np.abs(d - base)) > INVARIANCE_TOL * max(1.0, np.max(np.abs(base))):
            raise ModelError("angular function is not invariant under anisotropic dilation")


def _is_separately_even(m: SpectralModel) -> bool:
    if m.angular.expr.startswith("const:"):
        return True
    s1, s2 = _sphere_samples(m)
    with np.errstate(all="ignore"):
        a = m.profile(s1, s2)
        b = m.profile(s1, -s2)
    return bool(np.max(np.abs(a - b)) <= 1e-14 * max(1.0, np.max(np.abs(a))))


def angular_eval(model: SpectralModel, u) -> float:
    u = np.asarray(u, dtype=float)
    if np.all(u == 0):
        raise ModelError("angular function undefined at the origin")
    return float(model.L(u[0], u[1]))


def spectral_density(model: SpectralModel, u) -> float:
    """Density at a point of [-pi, pi]^2; +inf at singular points."""
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > np.pi * (1 + 1e-12)):
        raise ModelError("point outside [-pi, pi]^2")
    return float(model.density(u[0], u[1]))


def classify_spectrum(model: SpectralModel) -> str:
    if model.regime == "LRD":
        return "spectrum-LRD"
    if model.regime == "ND":
        return "spectrum-ND"
    if model.regime.startswith("LRND"):
        return "spectrum-LRND"
    v1, v2 = model.upsilon
    if v1 > 0 and v2 > 0:
        return "spectrum-LRD"
    if v1 < 0 and v2 < 0:
        return "spectrum-ND"
    return "spectrum-LRND"


# ---------------------------------------------------------------- model file

_KEYS = ("regime", "upsilon1", "upsilon2", "mu", "ell", "angular", "p")


def serialize(model: SpectralModel) -> str:
    rows = [
        ("regime", model.regime),
        ("upsilon1", repr(model.exponents.upsilon1)),
        ("upsilon2", repr(model.exponents.upsilon2)),
        ("mu", "none" if model.mu is None else repr(model.mu)),
        ("ell", "none" if model.ell is None else repr(model.ell)),
        ("angular", model.angular.expr),
        ("p", repr(model.p)),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows)


def parse(text: str) -> SpectralModel:
    vals: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelError(f"line {lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _KEYS:
            raise ModelError(f"line {lineno}: unknown key {k!r}")
        vals[k] = v
    for k in ("regime", "upsilon1", "upsilon2"):
        if k not in vals:
            raise ModelError(f"missing key {k!r}")

    def num(key):
        v = vals.get(key, "none")
        if v.lower() == "none":
            return None
        try:
            return float(v)
        except ValueError as exc:
            raise ModelError(f"{key}: not a number: {v!r}") from exc

    regime = canonical_regime(vals["regime"])
    return SpectralModel(regime, RadialExponents(num("upsilon1"), num("upsilon2")),
                         AngularProfile(vals.get("angular", "const:1")), num("mu"), num("ell"),
                         num("p") if "p" in vals else 1.0)


def load(path) -> SpectralModel:
    with open(path) as fh:
        return parse(fh.read())


class FlatSpectrum:
    """Constant density level on the torus; level (2 pi)^-2 is unit white noise."""

    regime = "Flat"
    p = 1.0

    def __init__(self, level: float = 1.0 / (2 * np.pi) ** 2):
        self.level = float(level)

    def density(self, u1, u2):
        return np.full(np.broadcast(np.asarray(u1), np.asarray(u2)).shape, self.level)

    def serialize(self) -> str:
        return f"regime = Flat\nlevel = {self.level!r}\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]
