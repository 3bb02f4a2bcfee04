"""Command-line entry point: ``heatchain <subcommand> [config.yaml]``.

Exit status 0 on success, 2 on an invalid configuration (with the offending
key path), 3 on a numerical failure (with the error message verbatim).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy
import yaml
from scipy.optimize import brentq

from . import __version__, _backend
from .controllability import (build_linear_system, hoermander_rank, kalman_rank, ls_mode_systems)
from .errors import ContractViolation, HeatChainError, NotHurwitzError
from .generator import (CLOSED_KINDS, LyapunovConfig, drift_bound_check, gamma_defect, ls_constants, sample_ball)
from .integrators import scaled_comparison, scaled_via_original, simulate
from .ls_limit import ModeSpectrum, ratio_limit_check
from .models import ModelDescriptor, hamiltonian, limit_model, scaled
from .stationary import (convergence_rate, empirical_covariance, linear_system_for, solve_stationary,
                         temperature_profile)

SUBCOMMANDS = ("simulate", "check-generator", "check-control", "stationary", "scaling", "ls-modes")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _schema() -> dict:
    return json.loads(resources.files("heatchain").joinpath("schema/config.schema.json").read_text())


def default_config_path(subcommand: str) -> Path:
    return Path(str(resources.files("heatchain").joinpath(f"configs/{subcommand}.yaml")))


def load_config(path) -> dict:
    """Read YAML and validate against the bundled schema; raises ConfigError with the key path."""
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}")


def build_model(cfg: dict) -> ModelDescriptor:
    try:
        return ModelDescriptor.from_config(cfg["model"])
    except KeyError as exc:
        raise ConfigError(f"model.{exc.args[0]}: required for kind {cfg['model']['kind']!r}") from exc
    except ContractViolation as exc:
        raise ConfigError(f"model: {exc}") from exc


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class Outputs:
    def __init__(self, directory: Path, formats):
        self.dir = directory
        self.formats = set(formats)
        self.files: list[str] = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, data) -> None:
        if "json" not in self.formats:
            return
        p = self.dir / name
        p.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
        self.files.append(name)

    def csv(self, name: str, header, rows) -> None:
        if "csv" not in self.formats:
            return
        p = self.dir / name
        with open(p, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        self.files.append(name)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _x0(model, section: dict, default=None):
    x0 = section.get("x0")
    if x0 is None:
        return np.zeros(model.dim) if default is None else default
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,):
        raise ConfigError(f"x0: expected {model.dim} values for layout {model.layout}, got {len(x0)}")
    return x0


def _run(cfg):
    return cfg.get("run", {})


def _check(cfg):
    return cfg.get("check", {})


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_simulate(model, cfg, out: Outputs, plot: bool) -> dict:
    run = _run(cfg)
    dt, n, seed = run.get("dt", 1e-3), run.get("n_steps", 1000), run["seed"]
    traj = simulate(model, _x0(model, run), dt, n, seed, run.get("scheme", "euler"), run.get("record_every", 1))
    if "csv" in out.formats:
        traj.to_csv(out.path("trajectory.csv"))
    H = model.dynamics.hamiltonian(traj.states)
    summary = {"model": model.to_config(), "noise": traj.noise.to_dict(), "scheme": traj.scheme,
               "n_records": len(traj), "final_state": traj.states[-1], "mean_H": float(H.mean()),
               "layout": list(model.layout)}
    out.json("summary.json", summary)
    if plot:
        out.csv("trajectory_long.csv", ["t", "coordinate", "value"],
                ((t, lab, v) for t, row in zip(traj.times, traj.states) for lab, v in zip(model.layout, row)))
    return summary


def cmd_check_generator(model, cfg, out: Outputs, plot: bool) -> dict:
    if model.kind not in CLOSED_KINDS:
        raise ConfigError(f"model.kind: check-generator supports {CLOSED_KINDS}")
    chk = _check(cfg)
    seed = _run(cfg)["seed"]
    thetas = chk.get("theta", [0.1, 0.5, 0.9])
    thetas = thetas if isinstance(thetas, list) else [thetas]
    tmax = max(model.temperatures)
    n_samples, radius = chk.get("n_samples", 10**5), chk.get("radius", 10.0)
    alpha = chk.get("alpha", 1.1)
    reports = []
    for i, th in enumerate(thetas):
        lc = LyapunovConfig(th / tmax if tmax > 0 else th, alpha)
        reports.append(drift_bound_check(model, lc, n_samples, radius, seed + i).to_dict())
    tol = chk.get("tolerances", {}).get("gamma_defect", 1e-10)
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = sample_ball(rng, min(n_samples, 1000), model.dim, radius)
    d = np.abs(gamma_defect(model, xs))
    defect = {"n_states": len(xs), "max_abs_defect": float(d.max()), "tolerance": tol,
              "passed": bool(d.max() <= tol), "argmax_state": xs[int(np.argmax(d))]}
    report = {"model": model.to_config(), "theta_scaled_by_max_T": thetas, "drift_bound": reports,
              "gamma_defect": defect,
              "max_violation": max(r["max_violation"] for r in reports)}
    out.json("generator.json", report)
    if plot:
        out.csv("drift_bound_long.csv", ["theta", "check", "value"],
                ((r["config"]["theta"], k, v) for r in reports for k, v in sorted(r["checks"].items())))
    return report


def cmd_check_control(model, cfg, out: Outputs, plot: bool) -> dict:
    chk = _check(cfg)
    seed = _run(cfg)["seed"]
    report = {"model": model.to_config()}
    if model.kind == "lefevere_schenkel":
        blocks = [{"k": k, "n": s.n, "rank": kalman_rank(s), "full_rank": kalman_rank(s) == s.n}
                  for k, s in ls_mode_systems(model)]
        report["kalman_blocks"] = blocks
        full = build_linear_system(model)
        report["kalman"] = {"n": full.n, "rank": kalman_rank(full)}
    elif model.kind in ("pinned", "unpinned"):
        try:
            variants = []
            for damping in (True, False):
                for sign in (("physical", "positive") if model.kind == "pinned" else ("physical",)):
                    s = build_linear_system(model, damping, sign)
                    variants.append({"damping": damping, "pinning_sign": sign, "n": s.n,
                                     "rank": kalman_rank(s), "rank_svd": kalman_rank(s, "svd")})
            report["kalman"] = variants
        except HeatChainError as exc:
            report["kalman"] = {"applicable": False, "reason": str(exc)}
    else:
        report["kalman"] = {"applicable": False, "reason": "Kalman requires linear dynamics"}
    rng = np.random.Generator(np.random.PCG64(seed))
    x = _x0(model, chk, default=rng.standard_normal(model.dim))
    depth = chk.get("max_depth", 2 * model.dim)
    h = hoermander_rank(model, x, depth, chk.get("channels"))
    report["hoermander"] = h.to_dict()
    report["state"] = x
    out.json("control.json", report)
    if plot and model.kind == "lefevere_schenkel":
        out.csv("kalman_blocks.csv", ["k", "n", "rank"], ((b["k"], b["n"], b["rank"]) for b in report["kalman_blocks"]))
    return report


def cmd_stationary(model, cfg, out: Outputs, plot: bool) -> dict:
    run, chk = _run(cfg), _check(cfg)
    seed = run["seed"]
    burn = run.get("burn_in_fraction", 0.1)
    report = {"model": model.to_config()}
    oracle = None
    try:
        sys_ = linear_system_for(model)
        oracle = solve_stationary(sys_)
    except HeatChainError as exc:
        if isinstance(exc, NotHurwitzError):
            raise
        report["oracle"] = {"available": False, "reason": str(exc)}
    traj = simulate(model, _x0(model, run), run.get("dt", 1e-3), run.get("n_steps", 10**6), seed,
                    run.get("scheme", "euler"), run.get("record_every", 10))
    emp = empirical_covariance(traj, burn)
    report["empirical"] = {"n_samples_effective": emp.n_samples_effective, "n_records": len(traj)}
    if "csv" in out.formats:
        emp.to_csv(out.path("covariance_empirical.csv"))
    n_se = chk.get("tolerances", {}).get("n_se", 5.0)
    if oracle is not None:
        z = (emp.sigma - oracle.sigma) / np.where(emp.stderr > 0, emp.stderr, np.inf)
        report["oracle"] = {"available": True, "residual": oracle.residual,
                            "max_abs_z": float(np.abs(z).max()), "n_se": n_se,
                            "agrees": bool(np.abs(z).max() <= n_se)}
        if "csv" in out.formats:
            replace(oracle, layout=model.layout).to_csv(out.path("covariance_oracle.csv"))
    if model.root_kind != "lefevere_schenkel" and model.kind != "ou":
        prof = temperature_profile(traj, burn)
        if "csv" in out.formats:
            prof.to_csv(out.path("temperature_profile.csv"))
        report["temperature_profile"] = {"values": prof.values, "stderr": prof.stderr}
        if oracle is not None:
            report["temperature_profile"]["oracle"] = np.diag(oracle.sigma)[model.momentum_indices]
    if oracle is not None:
        obs = chk.get("observable", "H")
        x0 = _x0(model, chk, default=np.full(model.dim, 3.0))
        fit = convergence_rate(model, obs, [x0], run.get("horizon", 20.0), run.get("n_paths", 1000),
                               run.get("dt", 1e-3), seed + 1, scheme=run.get("scheme", "euler"))
        report["rate"] = {"observable": obs, **fit.to_dict(), "positive": fit.positive}
        if plot:
            out.csv("rate_long.csv", ["t", "mean", "stderr", "in_window"],
                    zip(fit.times, fit.mean, fit.stderr, fit.window.astype(int)))
    out.json("stationary.json", report)
    return report


def _unit_energy_state(lim, direction):
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        raise ConfigError("check.x0: direction must be nonzero")
    f = lambda s: float(hamiltonian(lim, s * direction)) - 1.0
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    s = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return s * direction


def cmd_scaling(model, cfg, out: Outputs, plot: bool) -> dict:
    if model.kind not in ("pinned", "unpinned"):
        raise ConfigError("model.kind: scaling supports pinned and unpinned chains")
    run, chk = _run(cfg), _check(cfg)
    seed = run["seed"]
    lim = limit_model(model)
    rng = np.random.Generator(np.random.PCG64(seed))
    x = _unit_energy_state(lim, _x0(model, chk, default=rng.standard_normal(model.dim)))
    E_list = chk.get("E_list", [1e2, 1e4, 1e6])
    tau, dt = chk.get("tau", 1.0), run.get("dt", 1e-3)
    rep = scaled_comparison(model, x, E_list, tau, dt, seed, run.get("scheme", "euler"), check_energy=False)
    cross = []
    for E in E_list:
        direct = simulate(scaled(model, E), x, dt, int(round(tau / dt)), seed).states
        via = scaled_via_original(model, x, E, tau, dt, seed)
        cross.append({"E": E, "max_abs_difference": float(np.max(np.abs(direct - via)))})
    report = {"model": model.to_config(), "initial_state": x, "H_limit_initial": float(hamiltonian(lim, x)),
              **rep.to_dict(), "rescaling_cross_check": cross}
    out.json("scaling.json", report)
    if plot:
        out.csv("scaling_long.csv", ["E", "sup_distance"], zip(rep.E_list, rep.sup_distance))
    return report


def cmd_ls_modes(model, cfg, out: Outputs, plot: bool) -> dict:
    if model.kind != "lefevere_schenkel":
        raise ConfigError("model.kind: ls-modes needs a lefevere_schenkel model")
    chk = _check(cfg)
    tau_list = chk.get("tau_list", [50.0, 100.0, 200.0])
    x0 = chk.get("x0", [1.0, 1.0])
    if len(x0) != 2:
        raise ConfigError("check.x0: ls-modes needs an (r, v) pair")
    spec = ModeSpectrum(model.N, model.omega, model.mu)
    rows = spec.rows(tau=tau_list[-1], x0=x0)
    out.csv("modes.csv", list(rows[0].keys()), (list(r.values()) for r in rows))
    ratio_reports = [ratio_limit_check(w2, x0, tau_list).to_dict() for w2 in chk.get("omega_sq", [1 / 32, 1.0])]
    blocks = [{"k": k, "n": s.n, "rank": kalman_rank(s)} for k, s in ls_mode_systems(model)]
    # theta C3 next to the eigenvalues; no relation between them is asserted
    theta = chk.get("theta", 0.1)
    theta = float(theta[0] if isinstance(theta, list) else theta)
    consts = ls_constants(model, LyapunovConfig(theta)).to_dict()
    consts.update(theta=theta, theta_C3=theta * consts["C3"])
    report = {"model": model.to_config(), "spectrum": rows, "ratio_checks": ratio_reports,
              "kalman_blocks": blocks, "lyapunov_constants": consts}
    out.json("ls_modes.json", report)
    if plot:
        out.csv("ratio_long.csv", ["omega_sq", "tau", "ratio"],
                ((r["omega_sq"], t, v) for r in ratio_reports for t, v in zip(r["tau"], r["ratios"])))
    return report


HANDLERS = {
    "simulate": cmd_simulate,
    "check-generator": cmd_check_generator,
    "check-control": cmd_check_control,
    "stationary": cmd_stationary,
    "scaling": cmd_scaling,
    "ls-modes": cmd_ls_modes,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatchain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"heatchain {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?", help="YAML config (default: the bundled config for this subcommand)")
        s.add_argument("--seed", type=int, help="override run.seed")
        s.add_argument("--output", help="override output.directory")
        s.add_argument("--emit-plot-data", action="store_true", help="also write long-format CSV")
    return p


def run(subcommand: str, config_path=None, seed: int | None = None, output: str | None = None,
        emit_plot_data: bool = False) -> int:
    """Execute one subcommand; returns the exit status."""
    t0 = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat()
    try:
        path = config_path or default_config_path(subcommand)
        cfg = load_config(path)
        cfg.setdefault("run", {})
        if seed is not None:
            cfg["run"]["seed"] = seed
        cfg["run"].setdefault("seed", 0)
        model = build_model(cfg)
        outcfg = cfg.get("output", {})
        directory = Path(output or outcfg.get("directory", f"runs/{subcommand}"))
        out = Outputs(directory, outcfg.get("formats", ["csv", "json"]))
        HANDLERS[subcommand](model, cfg, out, emit_plot_data)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HeatChainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest = {
        "subcommand": subcommand,
        "config_path": str(path),
        "config_sha256": config_hash(cfg),
        "seed": cfg["run"]["seed"],
        "versions": {"heatchain": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "backend": _backend.BACKEND,
        "started_at": started,
        "wall_time_s": time.perf_counter() - t0,
        "files": out.files,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    return run(args.subcommand, args.config, args.seed, args.output, args.emit_plot_data)


if __name__ == "__main__":
    sys.exit(main())
