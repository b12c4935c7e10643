"""Command-line front end: aniscale {predict,kappa,oracle,synth,scan,report}."""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Dict, List, Optional

from . import covariance_oracle as co
from . import field_synth as fs
from . import scaling_lab as sl
from . import scaling_theory as th
from .quadrature import NonConvergenceError
from .spectral_models import ModelError, SpectralModel, load

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_EXCLUDED = 0, 2, 3, 4

# keys a --config JSON file may set; command-line flags win over the file
CONFIG_KEYS = ("model", "regime", "upsilon", "mu", "ell", "angular", "gamma_grid", "lambda_grid",
               "x", "replicas", "law", "seed", "mode", "out", "tol", "threads", "log_rule",
               "size", "window", "gamma")
DEFAULTS = {"angular": "const:1", "replicas": None, "law": "gaussian", "seed": 0, "mode": "oracle",
            "tol": None, "threads": None, "log_rule": "statement", "size": [256, 256],
            "window": None, "x": [1.0, 1.0], "out": None}


class ConfigError(ValueError):
    pass


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    g = common.add_argument_group("model and run options")
    g.add_argument("--config", metavar="FILE", help="JSON run config; flags override its keys")
    g.add_argument("--model", metavar="FILE", help="model file in 'key = value' form")
    g.add_argument("--regime", help="LRD, ND, LRND1, LRND2 or Hyperbolic (case-insensitive)")
    g.add_argument("--upsilon", nargs=2, type=float, metavar=("A", "B"), help="radial exponents")
    g.add_argument("--mu", type=float, help="LRND vanishing exponent")
    g.add_argument("--ell", type=float, help="LRND amplitude (default 1)")
    g.add_argument("--angular", help="angular profile, e.g. 'const:1' or '1 + 0.5*s1**2'")
    g.add_argument("--gamma-grid", type=_floats, metavar="LIST", help="gamma values, e.g. '0.5 1 2'")
    g.add_argument("--gamma", type=float, help="single gamma (kappa reference point)")
    g.add_argument("--lambda-grid", type=_floats, metavar="LIST", help="lambda values, e.g. '64 128 256 512'")
    g.add_argument("--x", nargs=2, type=float, metavar=("X1", "X2"), help="evaluation point (default 1 1)")
    g.add_argument("--replicas", type=int, help="Monte Carlo replicas or synthesized fields")
    g.add_argument("--law", choices=fs.LAWS, help="innovation law")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--mode", choices=("oracle", "mc", "both"), help="variance source for scan")
    g.add_argument("--log-rule", choices=th.LOG_RULES, help="ND log-normalization rule")
    g.add_argument("--size", nargs=2, type=int, metavar=("N1", "N2"), help="synthesized field size")
    g.add_argument("--window", type=int, help="moving-average window N (power of two)")
    g.add_argument("--out", metavar="DIR", help="output directory (env ANISCALE_OUT overrides)")
    g.add_argument("--tol", type=float, help="relative quadrature tolerance")
    g.add_argument("--threads", type=int, help="worker cap (default: all cores)")
    g.add_argument("--input", metavar="FILE", help="scan JSON for the report command")

    p = argparse.ArgumentParser(prog="aniscale", allow_abbrev=False,
                                description="Anisotropic scaling limits of lattice random fields.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("predict", parents=[common], allow_abbrev=False,
                   help="Hurst pairs, gamma0, H(gamma) and kappa constants as JSON")
    sub.add_parser("kappa", parents=[common], allow_abbrev=False,
                   help="closed-form and quadrature kappa values side by side")
    sub.add_parser("oracle", parents=[common], allow_abbrev=False,
                   help="finite-scale covariances against the limit (CSV)")
    sub.add_parser("synth", parents=[common], allow_abbrev=False,
                   help="synthesize fields (binary + JSON sidecar, CSV when small)")
    sub.add_parser("scan", parents=[common], allow_abbrev=False,
                   help="variance scan, exponent fits and kink verdict")
    sub.add_parser("report", parents=[common], allow_abbrev=False,
                   help="plain-text summary of a scan JSON")
    return p


def resolve_config(args: argparse.Namespace) -> Dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                filecfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(filecfg) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(filecfg)
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    env_out = os.environ.get("ANISCALE_OUT")
    if env_out:
        cfg["out"] = env_out
    return cfg


def config_hash(cfg: Dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def model_from(cfg: Dict) -> SpectralModel:
    if cfg.get("model"):
        return load(cfg["model"])
    if not cfg.get("regime") or not cfg.get("upsilon"):
        raise ConfigError("a model needs --regime and --upsilon (or --model FILE)")
    u = cfg["upsilon"]
    return SpectralModel.make(cfg["regime"], u[0], u[1], angular=cfg["angular"],
                              mu=cfg.get("mu"), ell=cfg.get("ell"))


def _emit(cfg: Dict, name: str, text: str):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if cfg.get("out"):
        os.makedirs(cfg["out"], exist_ok=True)
        with open(os.path.join(cfg["out"], name), "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _write_run_config(cfg: Dict):
    if cfg.get("out"):
        os.makedirs(cfg["out"], exist_ok=True)
        with open(os.path.join(cfg["out"], "run_config.json"), "w") as fh:
            json.dump({"config": cfg, "config_hash": config_hash(cfg)}, fh, indent=2,
                      sort_keys=True, default=str)


def cmd_predict(cfg: Dict) -> int:
    m = model_from(cfg)
    pred = th.predict(m, log_rule=cfg["log_rule"])
    d = pred.to_dict(cfg.get("gamma_grid"))
    d["config_hash"] = config_hash(cfg)
    _emit(cfg, "predict.json", json.dumps(d, indent=2))
    return EXIT_OK


def _kappa_rows(m: SpectralModel, gamma_p: float, gamma_m: float, rtol: float) -> List[Dict]:
    rows = []
    for side, g in (("plus", gamma_p), ("minus", gamma_m)):
        auto = th.kappa_detail(m, g, side, "auto", rtol)
        quad = th.kappa_detail(m, g, side, "quadrature", rtol)
        rows.append({"side": side, "gamma": g, "closed_or_1d": auto.value, "method": auto.method,
                     "quadrature": quad.value, "quadrature_method": quad.method,
                     "quadrature_abs_error": quad.abs_error,
                     "rel_delta": quad.value / auto.value - 1 if auto.value else float("nan")})
    return rows


def cmd_kappa(cfg: Dict) -> int:
    m = model_from(cfg)
    th.check_supported(m)
    center = th.gamma0(m) or th.crossover(m)
    g = cfg.get("gamma")
    gp = g if g is not None else 2 * center
    gm = g if g is not None else center / 2
    rtol = cfg["tol"] or th.KAPPA_RTOL
    out = {"regime": m.regime, "model_digest": m.digest, "config_hash": config_hash(cfg),
           "kappa_squared": _kappa_rows(m, gp, gm, rtol)}
    _emit(cfg, "kappa.json", json.dumps(out, indent=2))
    return EXIT_OK


def cmd_oracle(cfg: Dict) -> int:
    m = model_from(cfg)
    th.check_supported(m)
    center = th.gamma0(m) or th.crossover(m)
    gammas = cfg.get("gamma_grid") or [center]
    lams = cfg.get("lambda_grid") or [64, 128, 256, 512]
    x = tuple(cfg["x"])
    pairs = [(x, x), ((1.0, 2.0), (2.0, 1.0))]
    lines = ["regime,gamma,lambda,x1,x2,y1,y2,finite_cov,quad_err,limit_cov,rel_delta"]
    for g in gammas:
        scan = co.convergence_scan(m, g, lams, pairs, log_rule=cfg["log_rule"])
        for r in scan.rows:
            vals = [g, r["lambda"], *r["x"], *r["y"], r["finite_cov"], r["quad_err"],
                    r["limit_cov"], r["rel_delta"]]
            lines.append(",".join([m.regime] + [f"{float(v):.17g}" for v in vals]))
    _write_run_config(cfg)
    _emit(cfg, "oracle.csv", "\n".join(lines))
    return EXIT_OK


def cmd_synth(cfg: Dict) -> int:
    m = model_from(cfg)
    n1, n2 = (int(v) for v in cfg["size"])
    N = cfg["window"] or sl.default_window(max(n1, n2))
    coeffs = fs.ma_coefficients(m, N)
    reps = int(cfg["replicas"] or 1)
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    written = []
    for r in range(reps):
        f = fs.synthesize(coeffs, cfg["law"], int(cfg["seed"]), n1, n2, replica=r)
        path = os.path.join(out, f"field_{r:04d}.f64")
        f.save(path)
        written.append(path)
        if n1 * n2 <= 128 * 128:
            f.to_csv(os.path.join(out, f"field_{r:04d}.csv"))
    _write_run_config(cfg)
    sys.stdout.write(json.dumps({"fields": written, "N": N,
                                 "l2_mass_captured": coeffs.l2_mass_captured,
                                 "config_hash": config_hash(cfg)}, indent=2) + "\n")
    return EXIT_OK


def cmd_scan(cfg: Dict) -> int:
    m = model_from(cfg)
    center = th.gamma0(m) or th.crossover(m)
    gammas = cfg.get("gamma_grid") or [round(center * f, 10) for f in (0.25, 0.5, 0.75, 1.5, 2, 3)]
    sc = sl.ScanConfig(gamma_grid=gammas, lambda_grid=cfg.get("lambda_grid") or (64, 128, 256, 512),
                       x=tuple(cfg["x"]), mode=cfg["mode"], replicas=int(cfg["replicas"] or 200),
                       law=cfg["law"], seed=int(cfg["seed"]), log_rule=cfg["log_rule"],
                       threads=cfg.get("threads"))
    rep = sl.transition_report(m, sc)
    rep.config["config_hash"] = config_hash(cfg)
    out = cfg.get("out")
    if out:
        rep.write(out)
        _write_run_config(cfg)
    sys.stdout.write(rep.csv_text())
    return EXIT_OK


def summarize(d: Dict) -> str:
    lines = [f"regime: {d['regime']}", f"gamma0 (theory): {d['theory'].get('gamma0')}"]
    for f in d["fits"]:
        lines.append(f"gamma={f['gamma']:g} [{f['source']}]: H_hat={f['H']:.4f} +/- "
                     f"{f['half_width']:.4f}  theory={f['H_theory']:.4f}")
    k = d.get("kink")
    if k:
        if k["kink"]:
            lines.append(f"kink at gamma={k['gamma0_hat']:.4f} +/- {k['half_width']:.3g}, "
                         f"slopes {k['slopes'][0]:.4f} -> {k['slopes'][1]:.4f}")
        else:
            lines.append("no scaling transition detected")
    for name, ok in sorted(d["verdicts"].items()):
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: Dict, input_path: Optional[str]) -> int:
    path = input_path or (os.path.join(cfg["out"], "scan.json") if cfg.get("out") else None)
    if not path:
        raise ConfigError("report needs --input FILE or --out DIR containing scan.json")
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    text = summarize(d)
    sys.stdout.write(text)
    if cfg.get("out"):
        with open(os.path.join(cfg["out"], "report.txt"), "w") as fh:
            fh.write(text)
    return EXIT_OK


COMMANDS = {"predict": cmd_predict, "kappa": cmd_kappa, "oracle": cmd_oracle,
            "synth": cmd_synth, "scan": cmd_scan}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.get("threads"):
            os.environ.setdefault("OMP_NUM_THREADS", str(cfg["threads"]))
        if args.command == "report":
            return cmd_report(cfg, args.input)
        return COMMANDS[args.command](cfg)
    except th.ExcludedParameterError as exc:
        msg = str(exc)
        if exc.condition and exc.condition not in msg:
            msg += f" (requires {exc.condition})"
        sys.stderr.write(f"excluded parameter set: {msg}\n")
        return EXIT_EXCLUDED
    except NonConvergenceError as exc:
        sys.stderr.write(f"numerical non-convergence: {exc}\n")
        return EXIT_NUMERIC
    except (ConfigError, ModelError, sl.ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
