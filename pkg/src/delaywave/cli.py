"""Command-line entry point: ``delaywave <command> [options]``.

Commands: ``roots``, ``verify``, ``solve``, ``simulate``, ``speed-scan``.
Options may come from a JSON config (``--config``); flags override it.
Exit codes: 0 success, 1 verification or convergence failure, 2 bad
configuration or parameters.
"""

from __future__ import annotations

import argparse
import importlib
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import jsonio
from .iterate import IterationIntegrityError, ode_residual, solve_wave
from .kernel import DomainError, char_roots
from .models import (MODEL_IDS, BZParams, LVParams, build_model, bz_spec, critical_speed,
                     lv_spec)
from .pdesim import BlowUpError, DomainTooSmallError, SimConfig, SimConfigError, crossvalidate
from .system import ParameterError, QuasimonotoneSplit, SystemSpec, validate_system
from .verify import ConfigurationError, verify_pair

OUTPUT_ENV = "DELAYWAVE_OUTPUT_DIR"

DEFAULTS = {
    "model": "bz-transformed",
    "params": {},
    "c": 3.0,
    "grid": {"T": 200.0, "h": 0.05},
    "candidate": "corrected",
    "tol": 1e-6,
    "max_iter": 500,
    "omega": 0.5,
    "verify": {"mode": None, "deriv": "analytic", "limit_mode": "bracket-nontrivial",
               "tol_lim": 1e-3},
    "simulation": {"x_min": 0.0, "x_max": 800.0, "nx": 8001, "t_end": 50.0, "dt": None,
                   "record_every": 1.0, "x0": None, "record_layout": "long"},
    "speed_scan": {"c_start": 2.1, "c_stop": 4.0, "count": 5},
    "output_dir": "delaywave-out",
    "report": ["json"],
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(s: str):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(user) - set(DEFAULTS) - {"custom"}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = _merge(cfg, user)
    flag_map = {"model": ("model",), "c": ("c",), "T": ("grid", "T"), "h": ("grid", "h"),
                "candidate": ("candidate",), "tol": ("tol",), "max_iter": ("max_iter",),
                "out": ("output_dir",), "mode": ("verify", "mode"),
                "deriv": ("verify", "deriv"), "limit_mode": ("verify", "limit_mode"),
                "nx": ("simulation", "nx"), "t_end": ("simulation", "t_end"),
                "x_min": ("simulation", "x_min"), "x_max": ("simulation", "x_max"),
                "dt": ("simulation", "dt"), "record_layout": ("simulation", "record_layout"),
                "c_start": ("speed_scan", "c_start"),
                "c_stop": ("speed_scan", "c_stop"), "count": ("speed_scan", "count")}
    for flag, path in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            node = cfg
            for key in path[:-1]:
                node = node[key]
            node[path[-1]] = val
    for item in getattr(args, "param", None) or []:
        if "=" not in item:
            raise ConfigError(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg["params"][k.strip()] = _parse_value(v)
    if getattr(args, "report", None):
        cfg["report"] = sorted(set(cfg["report"]) | {args.report})
    env = os.environ.get(OUTPUT_ENV)
    if env:
        cfg["output_dir"] = env
    return cfg


def _custom_spec(custom: dict) -> SystemSpec:
    """A user system; the reaction is imported from ``module:function``."""
    try:
        mod_name, fn_name = custom["reaction"].split(":")
        reaction = getattr(importlib.import_module(mod_name), fn_name)
    except (KeyError, ValueError, ImportError, AttributeError) as exc:
        raise ConfigError(f"custom.reaction must name an importable 'module:function' ({exc})")
    n = int(custom["n"])
    split = QuasimonotoneSplit.from_dec(n, custom.get("dec_now", [[]] * n),
                                        custom.get("dec_delayed", [[]] * n))
    return SystemSpec(n, custom["diffusion"], custom["delays"], reaction, split,
                      custom["k_state"], custom["lipschitz"], name="custom")


def _build(cfg: dict):
    model = cfg["model"]
    if model == "custom":
        raise ConfigError("custom systems are supported by the 'roots' command only; "
                          "use the Python API to verify or solve them")
    if model not in MODEL_IDS:
        raise ConfigError(f"unknown model {model!r}; expected one of {MODEL_IDS}")
    return build_model(model, float(cfg["c"]), cfg["params"], float(cfg["grid"]["T"]),
                       float(cfg["grid"]["h"]), cfg["candidate"])


def _outdir(cfg: dict) -> Path:
    d = Path(cfg["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fmt9(x) -> str:
    return f"{x:.9g}"


# ---------------------------------------------------------------------------
# commands


def cmd_roots(args, cfg) -> int:
    c = float(cfg["c"])
    if args.d is not None or args.beta is not None:
        if args.d is None or args.beta is None:
            raise ConfigError("--d and --beta must be given together")
        ds, betas = [args.d], [args.beta]
    elif cfg["model"] == "custom" and "custom" in cfg:
        spec = _custom_spec(cfg["custom"])
        ds, betas = list(spec.diffusion), list(spec.lipschitz)
    else:
        if cfg["model"].startswith("bz"):
            spec = bz_spec(BZParams(**{**cfg["params"], "variant": cfg["model"].split("-")[1]}))
        elif cfg["model"] == "lv-mutualistic":
            spec = lv_spec(LVParams(**cfg["params"]))
        else:
            raise ConfigError(f"unknown model {cfg['model']!r}")
        ds, betas = list(spec.diffusion), list(spec.lipschitz)
    rows = []
    for d, b in zip(ds, betas):
        l1, l2 = char_roots(float(d), c, float(b))
        a = d / c**2
        res = [abs(a * l * l - l - b) / max(abs(a * l * l), abs(l), b) for l in (l1, l2)]
        rows.append({"d": d, "beta": b, "lambda1": l1, "lambda2": l2,
                     "scale": c**2 / (d * (l2 - l1)), "residual1": res[0], "residual2": res[1]})
    print(f"{'i':>2} {'lambda1':>16} {'lambda2':>16} {'scale':>16} {'res1':>10} {'res2':>10}")
    for i, row in enumerate(rows):
        print(f"{i + 1:>2} {_fmt9(row['lambda1']):>16} {_fmt9(row['lambda2']):>16} "
              f"{_fmt9(row['scale']):>16} {row['residual1']:>10.2e} {row['residual2']:>10.2e}")
    if args.json:
        jsonio.write(_outdir(cfg) / "roots.json", {"c": c, "components": rows})
    return 0


def cmd_verify(args, cfg) -> int:
    spec, pair, kp = _build(cfg)
    out = _outdir(cfg)
    val = validate_system(spec)
    vcfg = cfg["verify"]
    result = {"model": cfg["model"], "c": float(cfg["c"]), "validation": val.to_dict()}
    if not val.passed:
        print("equilibrium check failed:")
        print(f"{'i':>2} {'|f_i(0,0)|':>16} {'|f_i(K,K)|':>16}")
        for i in range(spec.n):
            print(f"{i + 1:>2} {_fmt9(val.residual_zero[i]):>16} {_fmt9(val.residual_k[i]):>16}")
    rep = verify_pair(spec, kp, pair, vcfg.get("mode"), vcfg["deriv"],
                      limit_mode=vcfg["limit_mode"], tol_lim=vcfg["tol_lim"])
    result["verification"] = rep.to_dict()
    result["candidate"] = pair.meta
    jsonio.write(out / "verify.json", result)
    if "csv" in cfg["report"]:
        rep.margins_csv(out / "margins.csv")
    print(f"verdict: {'pass' if rep.passed and val.passed else 'fail'} "
          f"(min margin {_fmt9(rep.min_margin)}, tol {_fmt9(rep.tol_margin)})")
    return 0 if (rep.passed and val.passed) else 1


def _solve(cfg):
    spec, pair, kp = _build(cfg)
    phi, rep = solve_wave(spec, kp, pair, tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]),
                          omega=float(cfg["omega"]))
    return spec, pair, kp, phi, rep


def cmd_solve(args, cfg) -> int:
    spec, pair, kp, phi, rep = _solve(cfg)
    out = _outdir(cfg)
    phi.to_csv(out / "profile.csv")
    res = ode_residual(spec, kp, phi)
    d = rep.to_dict()
    d["ode_residual_max"] = float(np.abs(res).max())
    d["model"] = cfg["model"]
    d["c"] = float(cfg["c"])
    jsonio.write(out / "solve.json", d)
    if "csv" in cfg["report"]:
        rep.trace_csv(out / "trace.csv")
    print(f"converged: {rep.converged} after {rep.iterations} iterations ({rep.phase}), "
          f"residual {_fmt9(rep.fixed_point_residual)}")
    return 0 if rep.converged else 1


def cmd_simulate(args, cfg) -> int:
    spec, pair, kp, phi, rep = _solve(cfg)
    if not rep.fixed_point_residual <= 1e-5:
        print(f"wave not converged (residual {_fmt9(rep.fixed_point_residual)}); no simulation")
        return 1
    s = cfg["simulation"]
    sim = SimConfig(float(s["x_min"]), float(s["x_max"]), int(s["nx"]), float(s["t_end"]),
                    None if s.get("dt") is None else float(s["dt"]),
                    record_every=float(s.get("record_every", 1.0)))
    report, record = crossvalidate(spec, phi, float(cfg["c"]), sim, x0=s.get("x0"))
    out = _outdir(cfg)
    d = report.to_dict()
    d["model"] = cfg["model"]
    jsonio.write(out / "crossvalidate.json", d)
    if "csv" in cfg["report"]:
        if s.get("record_layout", "long") == "per-snapshot":
            record.to_csv(out / "record", layout="per-snapshot")
        else:
            record.to_csv(out / "record.csv")
    if report.front_absent:
        print("no front in the seeded field")
        return 1
    ok = report.speed_deviation <= 0.05 and report.shape_drift <= 1e-2
    print(f"speed {_fmt9(report.measured_speed)} (deviation {_fmt9(report.speed_deviation)}), "
          f"shape drift {_fmt9(report.shape_drift)}")
    return 0 if ok else 1


def cmd_speed_scan(args, cfg) -> int:
    sc = cfg["speed_scan"]
    cs = np.linspace(float(sc["c_start"]), float(sc["c_stop"]), int(sc["count"]))
    rows = []
    for c in cs:
        sub = _merge(cfg, {"c": float(c)})
        row = {"c": float(c)}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                spec, pair, kp = _build(sub)
            vr = verify_pair(spec, kp, pair, sub["verify"].get("mode"), sub["verify"]["deriv"],
                             limit_mode=sub["verify"]["limit_mode"])
            row["verify_pass"] = vr.passed
            row["min_margin"] = vr.min_margin
            phi, rep = solve_wave(spec, kp, pair, tol=float(sub["tol"]),
                                  max_iter=int(sub["max_iter"]))
            row["converged"] = rep.converged
            row["iterations"] = rep.iterations
            row["residual"] = rep.fixed_point_residual
        except ParameterError as exc:
            row["rejected"] = str(exc)
        rows.append(row)
        print(f"c={_fmt9(c):>10}  " + ("rejected" if "rejected" in row else
              f"verify={'pass' if row['verify_pass'] else 'fail'} converged={row['converged']}"))
    model = cfg["model"]
    params = cfg["params"]
    crit = critical_speed(model, LVParams(**params) if model == "lv-mutualistic" else params)
    jsonio.write(_outdir(cfg) / "speed_scan.json",
                 {"model": model, "critical_speed": crit, "scan": rows})
    return 0


COMMANDS = {"roots": cmd_roots, "verify": cmd_verify, "solve": cmd_solve,
            "simulate": cmd_simulate, "speed-scan": cmd_speed_scan}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaywave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--model", help=f"one of {', '.join(MODEL_IDS)}")
    common.add_argument("--c", type=float, help="wave speed")
    common.add_argument("--T", type=float, help="half-width of the wave-variable window")
    common.add_argument("--h", type=float, help="grid step")
    common.add_argument("--param", action="append", metavar="NAME=VALUE",
                        help="model parameter override (repeatable)")
    common.add_argument("--candidate", choices=["corrected", "published"])
    common.add_argument("--out", help="output directory (the environment variable "
                                      f"{OUTPUT_ENV} takes precedence)")
    common.add_argument("--report", choices=["json", "csv"], help="extra report format")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)

    r = sub.add_parser("roots", parents=[common], help="characteristic roots")
    r.add_argument("--d", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--json", action="store_true", help="also write roots.json")

    v = sub.add_parser("verify", parents=[common], help="check the candidate pair")
    v.add_argument("--mode", choices=["ordered", "coupled"])
    v.add_argument("--deriv", choices=["analytic", "finite-difference"])
    v.add_argument("--limit-mode", dest="limit_mode",
                   choices=["strict-limits", "bracket-nontrivial"])

    sub.add_parser("solve", parents=[common], help="iterate to a wave profile")

    s = sub.add_parser("simulate", parents=[common], help="solve, then cross-check by PDE")
    for name in ("x_min", "x_max", "t_end", "dt"):
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    s.add_argument("--nx", type=int)
    s.add_argument("--record-layout", dest="record_layout", choices=["long", "per-snapshot"],
                   help="CSV record as one long file or one file per snapshot")

    sc = sub.add_parser("speed-scan", parents=[common], help="verify and solve over a c range")
    sc.add_argument("--c-start", dest="c_start", type=float)
    sc.add_argument("--c-stop", dest="c_stop", type=float)
    sc.add_argument("--count", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ParameterError, ConfigError, ConfigurationError, SimConfigError,
            DomainTooSmallError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IterationIntegrityError, DomainError, BlowUpError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
