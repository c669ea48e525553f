"""Command line entry point: ``lensflow <scenario> [options]``.

Scenarios write CSV and JSON files into the output directory together with
``status.json``. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import acceptance
from .discretization import MIN_NODES, Grid
from .errors import ConfigError, LensflowError
from .geometry import CutoffProfile, LensParams
from .linear_stability import assemble_linearization, ls_condition_check, spectrum
from .linear_stability import principal_angle
from .manifold import (
    CHART_RADIUS,
    closest_point,
    kernel_fields,
    manifold_tangents,
    solve_rho,
)
from .stepper import MONITOR_COLUMNS, InitialSpec, default_dt, evolve, fit_decay_rate, make_initial

SCENARIOS = ("spectrum", "manifold", "evolve", "lscheck", "full-report")
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
MAX_NODES = 2001


@dataclass
class RunConfig:
    scenario: str = "spectrum"
    theta: float = math.pi / 3
    r_star: float = 1.0
    n: int = 201
    cutoff_fraction: float = 0.5
    amplitude: float = 1e-3
    t_end: float | None = None
    dt_factor: float = 0.25
    samples: int = 100
    holder_alpha: float = 0.5
    ls_radii: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    ls_angles: int = 17
    fine_check: bool = True
    figures: bool = True
    seed: int = 0
    out: str | None = None


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _number(name, value, lo=-math.inf, hi=math.inf, open_lo=False, open_hi=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    if v < lo or (open_lo and v == lo) or v > hi or (open_hi and v == hi):
        left = "(" if open_lo else "["
        right = ")" if open_hi else "]"
        raise ConfigError(f"{name}: {v!r} outside {left}{lo}, {hi}{right}")
    return v


def _integer(name, value, lo, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        raise ConfigError(f"{name}: {value} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return value


def validate(cfg: RunConfig) -> RunConfig:
    """Check every field before any computation; raises :class:`ConfigError`."""
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"scenario: {cfg.scenario!r} is not one of {', '.join(SCENARIOS)}")
    cfg.theta = _number("theta", cfg.theta, 0.0, math.pi, open_lo=True, open_hi=True)
    cfg.r_star = _number("r_star", cfg.r_star, 0.0, open_lo=True)
    cfg.n = _integer("n", cfg.n, MIN_NODES, MAX_NODES)
    cfg.cutoff_fraction = _number("cutoff_fraction", cfg.cutoff_fraction, 0.0, 1.0, True, True)
    # keep the perturbation well inside the tube of radius 0.3 r_star
    cfg.amplitude = _number("amplitude", cfg.amplitude, -0.1 * cfg.r_star, 0.1 * cfg.r_star)
    if cfg.t_end is not None:
        cfg.t_end = _number("t_end", cfg.t_end, 0.0, open_lo=True)
    cfg.dt_factor = _number("dt_factor", cfg.dt_factor, 0.0, open_lo=True)
    cfg.samples = _integer("samples", cfg.samples, 10)
    cfg.holder_alpha = _number("holder_alpha", cfg.holder_alpha, 0.0, 1.0, open_lo=True)
    if not isinstance(cfg.ls_radii, list) or not cfg.ls_radii:
        raise ConfigError("ls_radii: expected a non-empty list of positive numbers")
    cfg.ls_radii = [_number("ls_radii", r, 0.0, open_lo=True) for r in cfg.ls_radii]
    cfg.ls_angles = _integer("ls_angles", cfg.ls_angles, 2)
    for name in ("fine_check", "figures"):
        if not isinstance(getattr(cfg, name), bool):
            raise ConfigError(f"{name}: expected true or false")
    cfg.seed = _integer("seed", cfg.seed, 0)
    if cfg.out is not None and not isinstance(cfg.out, str):
        raise ConfigError("out: expected a path string")
    return cfg


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def parse_config(scenario, config_path=None, overrides=None) -> RunConfig:
    """Defaults, then the JSON file, then command-line overrides."""
    values = {}
    if config_path is not None:
        values.update(load_config_file(config_path))
    file_scenario = values.pop("scenario", None)
    if file_scenario is not None and file_scenario != scenario:
        raise ConfigError(f"scenario: config says {file_scenario!r}, command line says {scenario!r}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return validate(RunConfig(scenario=scenario, **values))


# ----------------------------------------------------------------------------- output


def _clean(obj):
    """Plain JSON types; floats kept at full precision, non-finite as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n")
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


# ----------------------------------------------------------------------------- scenarios


def _problem(cfg):
    params = LensParams(cfg.theta, cfg.r_star)
    grid = Grid.for_params(params, cfg.n)
    cutoff = CutoffProfile.default(params, cfg.cutoff_fraction)
    return params, grid, cutoff


def run_spectrum(cfg, out: Path) -> dict:
    params, grid, _ = _problem(cfg)
    sp = spectrum(assemble_linearization(grid, params))
    rows = [(i, lam.real, lam.imag, res, bool(k))
            for i, (lam, res, k) in enumerate(zip(sp.eigenvalues, sp.bc_residual, sp.kernel_mask))]
    write_csv(out / "eigenvalues.csv", ["index", "re", "im", "bc_residual", "kernel"], rows)
    angle = principal_angle(sp.kernel_vectors, np.column_stack(kernel_fields(grid, params)))
    report = {
        "config": _echo(cfg),
        "kernel_count": int(np.sum(sp.kernel_mask)),
        "kernel_eigenvalues": [[z.real, z.imag] for z in sp.eigenvalues[sp.kernel_mask]],
        "kernel_threshold": sp.kernel_threshold,
        "kernel_angle": angle,
        "omega": sp.omega,
        "min_re_nonkernel": float(np.min(sp.nonkernel.real)),
        "max_abs_im": float(np.max(np.abs(sp.eigenvalues.imag))),
    }
    write_json(out / "kernel_report.json", report)
    return {"spectrum": sp, "report": report}


def run_manifold(cfg, out: Path) -> dict:
    params, grid, cutoff = _problem(cfg)
    r0 = params.r_star
    charts = [(0.0, r0), (0.05 * r0, r0), (-0.1 * r0, 1.1 * r0), (0.1 * r0, 0.95 * r0)]
    points = []
    for a1, r in charts:
        pt = solve_rho(a1, r, grid, params, cutoff)
        cp = closest_point(pt.rho, grid, params, cutoff)
        points.append({"a1": a1, "r": r, "residual": pt.residual, "iterations": pt.iterations,
                       "recovered_a1": cp.a1, "recovered_r": cp.r, "distance": cp.distance})
    tan = manifold_tangents(0.0, r0, grid, params, cutoff)
    v1, v2 = kernel_fields(grid, params)
    sp = spectrum(assemble_linearization(grid, params))
    report = {
        "config": _echo(cfg),
        "chart_radius": CHART_RADIUS * r0,
        "charts": points,
        "d_rho_dr_error": float(np.max(np.abs(tan["d_rho_dr"] - v1))),
        "d_rho_da1_error": float(np.max(np.abs(tan["d_rho_da1"] + v2))),
        "tangent_kernel_angle": principal_angle(
            sp.kernel_vectors, np.column_stack([tan["d_rho_dr"], tan["d_rho_da1"]])
        ),
    }
    write_json(out / "manifold.json", report)
    return {"report": report}


def run_evolve(cfg, out: Path) -> dict:
    params, grid, cutoff = _problem(cfg)
    omega = spectrum(assemble_linearization(grid, params)).omega
    t_end = acceptance.DECAY_TIMES / omega if cfg.t_end is None else cfg.t_end
    rho0 = make_initial(InitialSpec(amplitude=cfg.amplitude), grid, params, cutoff)
    dt = default_dt(grid, params, cfg.dt_factor)
    traj = evolve(rho0, t_end, dt, grid, params, cutoff, samples=cfg.samples,
                  holder_alpha=cfg.holder_alpha)
    rows = [[t] + [traj.monitors[k][i] for k in MONITOR_COLUMNS] for i, t in enumerate(traj.times)]
    write_csv(out / "trajectory.csv", ["t", *MONITOR_COLUMNS], rows)
    fit = fit_decay_rate(traj)
    area = traj.column("area")
    summary = {
        "config": _echo(cfg),
        "status": traj.status,
        "message": traj.message,
        "steps": traj.steps,
        "dt": dt,
        "t_end": t_end,
        "omega": omega,
        "sigma_fit": fit.sigma_fit,
        "sigma_ratio": fit.sigma_fit / omega,
        "r_squared": fit.r_squared,
        "decay_resolved": fit.resolved,
        "final_a1": traj.column("a1")[-1],
        "final_r": traj.column("r")[-1],
        "area_drift": float(np.max(np.abs(area - area[0])) / area[0]),
        "max_newton_iterations": int(np.max(traj.newton_iterations)),
    }
    write_json(out / "summary.json", summary)
    if traj.status != "ok":
        raise LensflowError(f"evolution stopped early: {traj.message}")
    return {"trajectory": traj, "summary": summary, "grid": grid, "params": params,
            "cutoff": cutoff}


def run_lscheck(cfg, out: Path) -> dict:
    phis = np.linspace(-np.pi / 2, np.pi / 2, cfg.ls_angles)
    samples = [r * np.exp(1j * p) for r in cfg.ls_radii for p in phis]
    rep = ls_condition_check(samples)
    rows = [(z.real, z.imag, abs(d), q, bool(g))
            for z, d, q, g in zip(rep.samples, rep.determinants, rep.normalized, rep.degenerate)]
    write_csv(out / "ls_sweep.csv", ["re", "im", "abs_det", "normalized", "degenerate"], rows)
    det1 = abs(ls_condition_check([1.0]).determinants[0])
    summary = {"config": _echo(cfg), "min_normalized": rep.min_normalized, "det_at_1": det1,
               "passed": rep.passed}
    write_json(out / "ls_summary.json", summary)
    return {"summary": summary}


def run_full_report(cfg, out: Path) -> dict:
    spec = run_spectrum(cfg, out)
    run_manifold(cfg, out)
    run_lscheck(cfg, out)
    evo = run_evolve(cfg, out)
    results = acceptance.run_all(fine=cfg.fine_check)
    rows = [(r.key, r.title, r.passed, r.value, r.tolerance) for r in results]
    write_csv(out / "acceptance.csv", ["criterion", "title", "passed", "value", "tolerance"], rows)
    write_json(out / "acceptance.json", {
        "config": _echo(cfg),
        "criteria": [{"key": r.key, "title": r.title, "passed": r.passed, "value": r.value,
                      "tolerance": r.tolerance, "detail": _strip_timing(r.detail)}
                     for r in results],
        "all_passed": all(r.passed for r in results),
    })
    for r in results:
        print(r.line())
    if cfg.figures:
        from . import plotting

        figs = out / "figures"
        figs.mkdir(exist_ok=True)
        sp = spec["spectrum"]
        plotting.spectrum_figure(sp.eigenvalues, sp.kernel_mask, figs / "spectrum.png")
        traj, summ = evo["trajectory"], evo["summary"]
        plotting.trajectory_figure(traj.times, traj.column("dist"), traj.column("area"),
                                   summ["omega"], summ["sigma_fit"], figs / "trajectory.png")
        eq = solve_rho(summ["final_a1"], summ["final_r"], evo["grid"], evo["params"],
                       evo["cutoff"]).rho
        plotting.profile_figure(evo["grid"].x, traj.states[0], traj.states[-1], eq,
                                figs / "profile.png")
    if not all(r.passed for r in results):
        raise LensflowError("acceptance criteria failed: "
                            + ", ".join(str(r.key) for r in results if not r.passed))
    return {"results": results}


def _echo(cfg):
    """Config as echoed into result files; the output location is not part of it."""
    d = asdict(cfg)
    d.pop("out")
    return d


def _strip_timing(detail):
    """Wall-clock numbers vary between runs and stay out of the written files."""
    if isinstance(detail, dict):
        return {k: _strip_timing(v) for k, v in detail.items() if k != "seconds"}
    return detail


RUNNERS = {
    "spectrum": run_spectrum,
    "manifold": run_manifold,
    "evolve": run_evolve,
    "lscheck": run_lscheck,
    "full-report": run_full_report,
}


def run_scenario(cfg: RunConfig, out: Path) -> int:
    """Run one scenario into ``out``; returns the exit code and writes ``status.json``."""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    code, message = EXIT_OK, ""
    try:
        RUNNERS[cfg.scenario](cfg, out)
    except ConfigError as exc:
        code, message = EXIT_CONFIG, str(exc)
    except OSError as exc:
        code, message = EXIT_IO, f"I/O failure: {exc}"
    except (LensflowError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code, message = EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    status = {"scenario": cfg.scenario, "exit_code": code,
              "status": "ok" if code == EXIT_OK else "error", "message": message}
    try:
        write_json(out / "status.json", status)
    except OSError as exc:
        print(f"error: cannot write status file: {exc}", file=sys.stderr)
        return EXIT_IO
    if code:
        print(f"error: {message}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lensflow", description=__doc__.splitlines()[0])
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--theta", type=float, help="contact angle in radians, 0 < theta < pi")
    p.add_argument("--r-star", dest="r_star", type=float, help="reference radius")
    p.add_argument("--n", type=int, help="number of grid nodes")
    p.add_argument("--amplitude", type=float, help="size of the initial bump")
    p.add_argument("--t-end", dest="t_end", type=float, help="final time (default 5/omega)")
    p.add_argument("--out", help="output directory (default $LENSFLOW_OUT or ./lensflow_out)")
    p.add_argument("--seed", type=int, help="seed for random test fields")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None,
                   help="skip the PNG figures of full-report")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("theta", "r_star", "n", "amplitude", "t_end", "out", "seed", "figures")}
    try:
        cfg = parse_config(args.scenario, args.config, overrides)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out or os.environ.get("LENSFLOW_OUT") or "lensflow_out")
    print(json.dumps(_clean(asdict(cfg)), sort_keys=True))
    return run_scenario(cfg, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
