"""Scaling experiments: partial sums, Monte Carlo moments, exponent fits and kink detection."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import covariance_oracle as co
from . import field_synth as fs
from . import scaling_theory as th

DEFAULT_X_GRID = tuple((a, b) for a in (0.5, 1.0, 1.5, 2.0) for b in (0.5, 1.0, 1.5, 2.0))
KINK_FLOOR = 0.05


class ConfigError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


# ------------------------------------------------------------------ partial sums


@dataclass
class PartialSumGrid:
    x_grid: List[Tuple[float, float]]
    values: np.ndarray
    lam: float
    gamma: float
    normalized: bool


def partial_sum_grid(field_values, lam: float, gamma: float,
                     x_grid: Sequence[Tuple[float, float]] = DEFAULT_X_GRID,
                     norm: Optional[float] = None) -> PartialSumGrid:
    """Sums over [1..[lam x1]] x [1..[lam^gamma x2]] from one prefix-sum pass."""
    X = np.asarray(getattr(field_values, "values", field_values), dtype=float)
    n1, n2 = X.shape
    sides = [co.side_lengths(lam, gamma, x) for x in x_grid]
    if max(s[0] for s in sides) > n1 or max(s[1] for s in sides) > n2:
        raise fs.GeometryError(f"rectangles up to {max(sides)} exceed the {n1}x{n2} field")
    C = np.zeros((n1 + 1, n2 + 1))
    C[1:, 1:] = X.cumsum(0).cumsum(1)
    vals = np.array([C[a, b] for a, b in sides])
    if norm is not None:
        vals = vals / norm
    return PartialSumGrid([tuple(map(float, x)) for x in x_grid], vals, float(lam), float(gamma),
                          norm is not None)


# ------------------------------------------------------------------ Monte Carlo


def _jackknife(values: np.ndarray, stat) -> Tuple[float, float]:
    """Delete-one jackknife standard error; stat maps an (n, k) sample to a scalar per row-set."""
    n = values.shape[0]
    full = stat(values, None)
    loo = stat(values, np.arange(n))
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(full), se


def _central_moments(x: np.ndarray, drop: Optional[np.ndarray]):
    """Mean, variance (ddof=1), skewness and excess kurtosis, optionally leaving out each index."""
    s1, s2, s3, s4 = (np.sum(x ** k) for k in (1, 2, 3, 4))
    n = x.size
    if drop is None:
        sums = [np.array(s) for s in (s1, s2, s3, s4)]
        m = n
    else:
        xd = x[drop]
        sums = [s1 - xd, s2 - xd ** 2, s3 - xd ** 3, s4 - xd ** 4]
        m = n - 1
    a1, a2, a3, a4 = (s / m for s in sums)
    c2 = a2 - a1 ** 2
    c3 = a3 - 3 * a1 * a2 + 2 * a1 ** 3
    c4 = a4 - 4 * a1 * a3 + 6 * a1 ** 2 * a2 - 3 * a1 ** 4
    return a1, c2 * m / (m - 1), c3 / c2 ** 1.5, c4 / c2 ** 2 - 3.0


@dataclass
class MomentTable:
    x_points: List[Tuple[float, float]]
    lam: float
    gamma: float
    replicas: int
    law: str
    seed: int
    norm: float
    variance: List[Tuple[float, float]]
    skewness: List[Tuple[float, float]]
    excess_kurtosis: List[Tuple[float, float]]
    covariance: Dict[Tuple[int, int], Tuple[float, float]]
    l2_mass_captured: float
    truncated_variance: List[float]
    window: int
    samples: Optional[np.ndarray] = None


def default_window(max_side: int) -> int:
    N = 64
    while N < 8 * max_side:
        N *= 2
    return N


def _rect_functionals(model, lam, gamma, x_points, N, coeffs):
    sides = [co.side_lengths(lam, gamma, x) for x in x_points]
    if min(min(s) for s in sides) < 1:
        raise fs.GeometryError("empty rectangle among the x points")
    if coeffs is None:
        coeffs = fs.ma_coefficients(model, N or default_window(max(max(s) for s in sides)))
    Nw = coeffs.N
    P1 = max(s[0] for s in sides) + Nw
    P2 = max(s[1] for s in sides) + Nw
    W = np.stack([fs.rect_weights(coeffs, a, b, P1, P2).ravel() for a, b in sides])
    return W, coeffs


def _draw(W: np.ndarray, replicas: int, law: str, seed: int, threads: Optional[int]) -> np.ndarray:
    def run(r):
        eps = fs.innovations(law, fs.replica_rng(seed, r), (W.shape[1],))
        return W @ eps

    workers = threads or os.cpu_count() or 1
    if workers == 1:
        out = [run(r) for r in range(replicas)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(run, range(replicas)))
    return np.array(out)


def mc_samples(model, lam: float, gamma: float, x_points, replicas: int, law: str, seed: int,
               N: Optional[int] = None, threads: Optional[int] = None,
               coeffs: Optional[fs.MACoefficients] = None):
    """Unnormalized rectangle sums S(x) for each replica, shape (replicas, len(x_points)).

    Each S(x) is a fixed linear functional of the innovations, so the fields are
    never formed; the result equals summing synthesize() output with the same
    seed and replica index.
    """
    W, coeffs = _rect_functionals(model, lam, gamma, x_points, N, coeffs)
    return _draw(W, replicas, law, seed, threads), coeffs


def mc_moments(model, lam: float, gamma: float, x_points, replicas: int, law: str = "gaussian",
               seed: int = 0, N: Optional[int] = None, threads: Optional[int] = None,
               log_rule: str = "statement", norm: Optional[float] = None,
               keep_samples: bool = False) -> MomentTable:
    """Moments of d^-1 S(x) over Monte Carlo replicas with jackknife standard errors.

    truncated_variance is the exact variance of d^-1 S(x) for the simulated
    (window-truncated) field; its gap to the oracle variance is truncation bias,
    not Monte Carlo noise.
    """
    if replicas < 100:
        raise ConfigError("mc_moments needs at least 100 replicas")
    x_points = [tuple(map(float, x)) for x in x_points]
    W, coeffs = _rect_functionals(model, lam, gamma, x_points, N, None)
    S = _draw(W, replicas, law, seed, threads)
    d = co.default_norm(model, gamma, lam, log_rule) if norm is None else float(norm)
    Z = S / d
    var, skew, kurt = [], [], []
    for j in range(Z.shape[1]):
        z = Z[:, j]
        var.append(_jackknife(z, lambda v, drop: _central_moments(v, drop)[1]))
        skew.append(_jackknife(z, lambda v, drop: _central_moments(v, drop)[2]))
        kurt.append(_jackknife(z, lambda v, drop: _central_moments(v, drop)[3]))
    cov = {}
    n = Z.shape[0]
    for i in range(Z.shape[1]):
        for j in range(i + 1, Z.shape[1]):
            a, b = Z[:, i], Z[:, j]

            def c(_, drop, a=a, b=b):
                sa, sb, sab = a.sum(), b.sum(), (a * b).sum()
                if drop is None:
                    return (sab - sa * sb / n) / (n - 1)
                m = n - 1
                ta, tb, tab = sa - a[drop], sb - b[drop], sab - a[drop] * b[drop]
                return (tab - ta * tb / m) / (m - 1)
            cov[(i, j)] = _jackknife(Z, c)
    trunc = [float(v) for v in np.einsum("ij,ij->i", W, W) / d ** 2]
    return MomentTable(x_points, float(lam), float(gamma), replicas, law, int(seed), d,
                       var, skew, kurt, cov, coeffs.l2_mass_captured, trunc, coeffs.N,
                       S if keep_samples else None)


# ------------------------------------------------------------------ exponent fits


@dataclass
class HEstimate:
    H: float
    half_width: float
    slope: float
    intercept: float
    log_corrected: bool
    n: int


def estimate_H(rows: Sequence[Tuple[float, float]], log_corrected: bool = False,
               level: float = 0.95) -> HEstimate:
    """Half the least-squares slope of log variance against log lambda.

    With log_corrected=True the known log log lambda term is removed first, i.e.
    the fit is log Var = 2H log lambda + log log+ lambda + c.
    """
    lams = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    if len(np.unique(lams)) < 4:
        raise DegenerateInputError("estimate_H needs at least 4 distinct lambda values")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DegenerateInputError("variances must be positive and finite")
    if np.all(v == v[0]):
        raise DegenerateInputError("constant variances carry no exponent")
    x = np.log(lams)
    y = np.log(v)
    if log_corrected:
        y = y - np.log([th.log_plus(l) for l in lams])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    res = y - (intercept + slope * x)
    dof = len(x) - 2
    s2 = float(res @ res) / dof if dof > 0 else 0.0
    se = math.sqrt(s2 / sxx)
    q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else float("inf")
    return HEstimate(slope / 2, q * se / 2, slope, intercept, log_corrected, len(x))


@dataclass
class KinkResult:
    gamma0_hat: Optional[float]
    half_width: float
    kink_strength: float
    slopes: Tuple[float, float]
    intercepts: Tuple[float, float]
    threshold: float
    kink: bool
    split: int
    sse: float


def _line_fit(x, y):
    xc = x - x.mean()
    sxx = float(xc @ xc)
    b = float(xc @ (y - y.mean())) / sxx
    a = float(y.mean() - b * x.mean())
    r = y - (a + b * x)
    return a, b, float(r @ r), sxx


def detect_kink(samples: Sequence[Tuple[float, float]], floor: float = KINK_FLOOR) -> KinkResult:
    """Best two-segment least-squares fit over all splits with two or more points per side.

    The kink location is where the two lines cross, kept inside the gap between
    the segments. No kink is declared when the slope difference is below
    max(floor, 3 * pooled slope stderr).
    """
    pts = sorted((float(g), float(h)) for g, h in samples)
    if len(pts) < 6:
        raise ConfigError("detect_kink needs at least 6 gamma points")
    g = np.array([p[0] for p in pts])
    h = np.array([p[1] for p in pts])
    if len(np.unique(g)) != len(g):
        raise ConfigError("gamma points must be distinct")
    best = None
    for k in range(2, len(g) - 1):
        a1, b1, s1, x1 = _line_fit(g[:k], h[:k])
        a2, b2, s2, x2 = _line_fit(g[k:], h[k:])
        sse = s1 + s2
        if best is None or sse < best[0] - 1e-15 * max(1.0, best[0]):
            best = (sse, k, a1, b1, a2, b2, x1, x2)
    sse, k, a1, b1, a2, b2, x1, x2 = best
    dof = len(g) - 4
    s2 = sse / dof if dof > 0 else 0.0
    pooled = math.sqrt(s2 / x1 + s2 / x2)
    strength = abs(b2 - b1)
    thr = max(floor, 3 * pooled)
    lo, hi = g[k - 1], g[k]
    if strength > 0:
        cross = (a1 - a2) / (b2 - b1)
        g0 = min(max(cross, lo), hi)
    else:
        g0 = 0.5 * (lo + hi)
    kink = strength >= thr
    return KinkResult(g0 if kink else None, float(hi - lo), strength, (b1, b2), (a1, a2), thr,
                      kink, k, sse)


# ------------------------------------------------------------------ reports


@dataclass
class ScanConfig:
    gamma_grid: Sequence[float]
    lambda_grid: Sequence[float] = (64, 128, 256, 512)
    x: Tuple[float, float] = (1.0, 1.0)
    mode: str = "oracle"
    replicas: int = 200
    law: str = "gaussian"
    seed: int = 0
    log_rule: str = "statement"
    threads: Optional[int] = None
    H_tol: float = 0.05
    gamma0_tol: float = 0.1

    def validate(self):
        if len(self.gamma_grid) == 0:
            raise ConfigError("empty gamma grid")
        if len(self.lambda_grid) < 4:
            raise ConfigError("lambda grid needs at least 4 values")
        if self.mode not in ("oracle", "mc", "both"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode != "oracle" and self.replicas < 100:
            raise ConfigError("Monte Carlo mode needs at least 100 replicas")
        if self.law not in fs.LAWS:
            raise ConfigError(f"unknown innovation law {self.law!r}")


@dataclass
class ScanReport:
    regime: str
    rows: List[Dict] = field(default_factory=list)
    fits: List[Dict] = field(default_factory=list)
    kink: Optional[Dict] = None
    theory: Dict = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    config: Dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["regime", "gamma", "lambda", "stat", "value", "err"])
        for r in self.rows:
            w.writerow([self.regime, f"{r['gamma']:.17g}", f"{r['lambda']:.17g}", r["stat"],
                        f"{r['value']:.17g}", f"{r['err']:.17g}"])
        for f in self.fits:
            w.writerow([self.regime, f"{f['gamma']:.17g}", "", f"H_hat_{f['source']}",
                        f"{f['H']:.17g}", f"{f['half_width']:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> Dict:
        return {"regime": self.regime, "config": self.config, "theory": self.theory,
                "fits": self.fits, "kink": self.kink, "verdicts": self.verdicts,
                "rows": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    def plot_script(self, csv_name: str = "scan.csv") -> str:
        lines = [
            "# gnuplot script: log-log variance curves and the H(gamma) kink figure",
            "set datafile separator ','",
            "set terminal pngcairo size 1200,500",
            "set output 'scan.png'",
            "set multiplot layout 1,2",
            "set logscale xy",
            "set xlabel 'lambda'; set ylabel 'normalized variance'",
            f"plot for [g in \"{' '.join(repr(f['gamma']) for f in self.fits)}\"] '{csv_name}' "
            "using ($2==g+0 && strcol(4) eq 'var_oracle' ? $3 : 1/0):5 with linespoints title 'gamma='.g",
            "unset logscale",
            "set xlabel 'gamma'; set ylabel 'H'",
            f"plot '{csv_name}' using ($3 eq '' ? $2 : 1/0):5:6 with yerrorbars title 'H hat'",
        ]
        curve = self.theory.get("H_curve", [])
        if curve:
            pts = " ".join(f"{g:.6g} {h:.6g}" for g, h, _ in curve)
            lines.append(f"# theory H(gamma) points: {pts}")
        lines.append("unset multiplot")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str, stem: str = "scan"):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, stem + ".csv"), "w") as fh:
            fh.write(self.csv_text())
        with open(os.path.join(out_dir, stem + ".json"), "w") as fh:
            fh.write(self.to_json())
        with open(os.path.join(out_dir, stem + ".gp"), "w") as fh:
            fh.write(self.plot_script(stem + ".csv"))


def _oracle_rows(model, gamma, cfg: ScanConfig):
    rows = []
    for lam in cfg.lambda_grid:
        n = co.side_lengths(lam, gamma, cfg.x)
        q = co.rect_variance(model, *n)
        d = co.default_norm(model, gamma, lam, cfg.log_rule)
        rows.append({"gamma": float(gamma), "lambda": float(lam), "stat": "var_oracle",
                     "value": q.value / d ** 2, "err": q.abs_error_estimate / d ** 2,
                     "raw": q.value, "raw_err": q.abs_error_estimate})
    return rows


def _mc_rows(model, gamma, cfg: ScanConfig, extra: List[Dict]):
    rows = []
    for lam in cfg.lambda_grid:
        mt = mc_moments(model, lam, gamma, [cfg.x], cfg.replicas, cfg.law, cfg.seed,
                        threads=cfg.threads, log_rule=cfg.log_rule)
        v, se = mt.variance[0]
        rows.append({"gamma": float(gamma), "lambda": float(lam), "stat": "var_mc",
                     "value": v, "err": se, "raw": v * mt.norm ** 2, "raw_err": se * mt.norm ** 2})
        extra.append({"gamma": float(gamma), "lambda": float(lam), "stat": "var_truncated",
                      "value": mt.truncated_variance[0], "err": 0.0, "raw": 0.0, "raw_err": 0.0})
    return rows


def transition_report(model, config: ScanConfig) -> ScanReport:
    """Predictions, measured variances, per-gamma exponent fits and the kink verdict."""
    config.validate()
    pred = th.predict(model, log_rule=config.log_rule, with_kappa=False)
    rep = ScanReport(model.regime, theory=pred.to_dict())
    rep.config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()}
    rep.config["gamma_grid"] = [float(g) for g in config.gamma_grid]
    rep.config["lambda_grid"] = [float(l) for l in config.lambda_grid]
    sources = {"oracle": ["oracle"], "mc": ["mc"], "both": ["oracle", "mc"]}[config.mode]
    for gamma in sorted(float(g) for g in config.gamma_grid):
        logc = th.log_factor(model, gamma, config.log_rule)
        for src in sources:
            extra: List[Dict] = []
            rows = _oracle_rows(model, gamma, config) if src == "oracle" else _mc_rows(model, gamma, config, extra)
            rep.rows.extend(rows + extra)
            est = estimate_H([(r["lambda"], r["raw"]) for r in rows], log_corrected=logc)
            Ht = th.H_of_gamma(model, gamma)
            rep.fits.append({"gamma": gamma, "source": src, "H": est.H, "half_width": est.half_width,
                             "H_theory": Ht, "log_corrected": logc})
            rep.verdicts[f"H[{src}]@{gamma:g}"] = abs(est.H - Ht) <= config.H_tol + est.half_width
    for r in rep.rows:
        r.pop("raw")
        r.pop("raw_err")
    primary = [f for f in rep.fits if f["source"] == sources[0]]
    if len(primary) >= 6:
        k = detect_kink([(f["gamma"], f["H"]) for f in primary])
        rep.kink = {"gamma0_hat": k.gamma0_hat, "half_width": k.half_width,
                    "kink_strength": k.kink_strength, "slopes": list(k.slopes),
                    "threshold": k.threshold, "kink": k.kink}
        g0 = pred.gamma0
        expect = model.regime != "Hyperbolic" and g0 is not None and min(config.gamma_grid) < g0 < max(config.gamma_grid)
        if expect:
            rep.verdicts["transition"] = bool(k.kink and abs(k.gamma0_hat - g0) <= max(config.gamma0_tol, k.half_width))
        else:
            rep.verdicts["transition"] = not k.kink
    return rep
