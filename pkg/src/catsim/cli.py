"""Command-line front end.

Subcommands map onto the library modules:

    evolve          forward / backward / normalized propagation to CSV
    identities      residual suite for the exact time-development identities
    correspondence  large-time two-sided vs Q-weighted one-sided comparison
    maximize        transition-amplitude maximization over boundary pairs
    paths           imaginary-action preference timeline

Each run writes CSV/JSON artifacts plus a rendered figure (and, for paths,
a gnuplot script) into the output directory.  Outputs are deterministic
for a fixed config and seed.  Validation failures exit 1 with a JSON error
on stderr; numerical failures exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, report
from .errors import CatsimError, ConfigError
from .evolution import (Stepper, propagate_A_normalized, trajectory_A,
                        trajectory_B, trajectory_under)
from .model import gaussian_packet, model_from_config
from .observables import (aa_identity_residual, correspondence_experiment,
                          ehrenfest_residual_BA, heisenberg_residual_BA,
                          maximize_transition, maximized_pair_series,
                          momentum_relation_AA)
from .pathsel import preference_timeline, profile_from_config
from .spectral import (construct_q, eigendecompose, matrix_from_json,
                       q_hermitian_operator)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catsim", description="complex-action quantum dynamics simulator")
    parser.add_argument("--version", action="version", version=f"catsim {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--hbar", type=float, default=None)
        p.add_argument("--jobs", type=int, default=1)

    for name in ("evolve", "identities", "correspondence", "maximize", "paths"):
        common(sub.add_parser(name))
    return parser


def _load_config(args) -> dict:
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config.unreadable", str(exc))
    # CLI flags win over config file over defaults
    if args.hbar is not None:
        cfg["hbar"] = args.hbar
    cfg.setdefault("hbar", 1.0)
    cfg["seed"] = args.seed
    return cfg


def _matrix_and_hbar(cfg: dict):
    if "matrix" in cfg:
        return matrix_from_json(cfg["matrix"]), float(cfg["hbar"])
    if "model" in cfg:
        model = model_from_config({**cfg["model"], "hbar": cfg["hbar"]})
        from .model import build_particle_hamiltonian
        return build_particle_hamiltonian(model), model.hbar
    raise ConfigError("config.missing_matrix", "config needs 'matrix' or 'model'")


def _state_from_config(cfg, dim, key, model_cfg=None, hbar=1.0):
    spec = cfg.get(key)
    if spec is None:
        raise ConfigError(f"config.missing_{key}", f"config needs {key!r}")
    if isinstance(spec, dict) and spec.get("kind") == "gaussian":
        if model_cfg is None:
            raise ConfigError("config.gaussian_needs_model",
                              "gaussian states require a particle model")
        model = model_from_config({**model_cfg, "hbar": hbar})
        return gaussian_packet(model.grid, float(spec["center"]),
                               float(spec["momentum"]), float(spec["sigma"]), hbar)
    arr = np.array([complex(re, im) for re, im in spec])
    if arr.shape != (dim,):
        raise ConfigError("config.state_dim", f"{key} has wrong dimension")
    return arr


def _time_grid(cfg: dict) -> tuple[float, float, np.ndarray]:
    t = cfg.get("time", {})
    try:
        t_a, t_b = float(t["t_a"]), float(t["t_b"])
        step = float(t["step"])
    except KeyError as exc:
        raise ConfigError("config.missing_time", f"time config needs {exc}")
    if t_b <= t_a or step <= 0:
        raise ConfigError("config.bad_time", "need t_b > t_a and step > 0")
    n = int(round((t_b - t_a) / step))
    return t_a, t_b, t_a + (t_b - t_a) * np.arange(n + 1) / n


def cmd_evolve(cfg: dict, out: Path) -> None:
    h, hbar = _matrix_and_hbar(cfg)
    t_a, t_b, grid = _time_grid(cfg)
    a0 = _state_from_config(cfg, h.shape[0], "state_a", cfg.get("model"), hbar)
    hdr = report.header_lines(cfg)
    a_traj = trajectory_A(h, a0, grid, hbar)
    report.write_text(out / "trajectory_A.csv", a_traj.to_csv(hdr))
    artifacts = {"trajectory_A.csv": a_traj}
    if "state_b" in cfg:
        b_f = _state_from_config(cfg, h.shape[0], "state_b", cfg.get("model"), hbar)
        b_traj = trajectory_B(h, b_f, grid, t_final=t_b, hbar=hbar)
        report.write_text(out / "trajectory_B.csv", b_traj.to_csv(hdr))
        artifacts["trajectory_B.csv"] = b_traj
    if cfg.get("normalized", False):
        n_traj = propagate_A_normalized(h, a0 / np.linalg.norm(a0), t_a, t_b,
                                        float(cfg["time"]["step"]), hbar)
        report.write_text(out / "trajectory_A_normalized.csv", n_traj.to_csv(hdr))
        artifacts["trajectory_A_normalized.csv"] = n_traj
    for name, traj in artifacts.items():
        report.render_trajectory_figure(traj, out / (Path(name).stem + ".png"))
    report.write_json(out / "evolve_summary.json", {
        "samples": len(grid),
        "final_norms": {k: float(v.norms()[-1]) for k, v in artifacts.items()},
    }, cfg)


def cmd_identities(cfg: dict, out: Path) -> None:
    h, hbar = _matrix_and_hbar(cfg)
    t_a, t_b, grid = _time_grid(cfg)
    dim = h.shape[0]
    a0 = _state_from_config(cfg, dim, "state_a", cfg.get("model"), hbar)
    b_f = _state_from_config(cfg, dim, "state_b", cfg.get("model"), hbar)
    a_traj = trajectory_A(h, a0, grid, hbar)
    b_traj = trajectory_B(h, b_f, grid, t_final=t_b, hbar=hbar)

    rng = np.random.default_rng(int(cfg["seed"]))
    if "operator" in cfg:
        o = matrix_from_json(cfg["operator"])
    else:
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        o = 0.5 * (g + g.conj().T)

    fd_order = int(cfg.get("fd_order", 2))
    residuals = {}
    residuals["heisenberg_BA"] = heisenberg_residual_BA(o, h, a_traj, b_traj,
                                                        hbar, fd_order)
    aa_res, f_gap = aa_identity_residual(o, h, a_traj, hbar, fd_order)
    residuals["aa_identity"] = aa_res
    if "model" in cfg:
        model = model_from_config({**cfg["model"], "hbar": cfg["hbar"]})
        residuals.update(ehrenfest_residual_BA(model, a_traj, b_traj, fd_order))

    summary = {name: res.to_report() for name, res in residuals.items()}
    summary["fluctuation_form_gap"] = f_gap
    report.write_json(out / "identities_summary.json", summary, cfg)
    hdr = report.header_lines(cfg)
    for name, res in residuals.items():
        report.write_text(out / f"residual_{name}.csv", report.series_csv(
            res.times, {"residual": res.residual_magnitudes}, hdr))
    report.render_residual_figure(residuals, out / "identities.png")


def cmd_correspondence(cfg: dict, out: Path) -> None:
    h, hbar = _matrix_and_hbar(cfg)
    t_a, t_b, grid = _time_grid(cfg)
    dim = h.shape[0]
    a0 = _state_from_config(cfg, dim, "state_a", cfg.get("model"), hbar)
    b_f = _state_from_config(cfg, dim, "state_b", cfg.get("model"), hbar)
    spec = eigendecompose(h)
    q = construct_q(spec)
    rng = np.random.default_rng(int(cfg["seed"]))
    if "operator" in cfg:
        o = matrix_from_json(cfg["operator"])
    else:
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        o = 0.5 * (g + g.conj().T)
    fit_lo = float(cfg.get("fit_window", {}).get("t_lo", t_a))
    fit_grid = grid[grid >= fit_lo]
    rep = correspondence_experiment(h, q, o, a0, b_f, t_a, t_b, fit_grid, hbar)
    hdr = report.header_lines(cfg)
    report.write_text(out / "correspondence.csv", report.series_csv(
        rep.times, {"delta": rep.delta, "ba_re": rep.ba_values.real,
                    "ba_im": rep.ba_values.imag, "qaa_re": rep.qaa_values.real,
                    "qaa_im": rep.qaa_values.imag}, hdr))
    report.write_json(out / "correspondence_summary.json", rep.to_report(), cfg)
    report.render_correspondence_figure(rep, t_b, out / "correspondence.png")


def cmd_maximize(cfg: dict, out: Path) -> None:
    h, hbar = _matrix_and_hbar(cfg)
    t_a, t_b, grid = _time_grid(cfg)
    spec = eigendecompose(h)
    q = construct_q(spec)
    res = maximize_transition(h, t_a, t_b, q=q, hbar=hbar, seed=int(cfg["seed"]),
                              spectral=spec)
    rng = np.random.default_rng(int(cfg["seed"]))
    dim = h.shape[0]
    g = rng.normal(size=(dim, dim))
    o = q_hermitian_operator(q, 0.5 * (g + g.T))
    series = maximized_pair_series(h, q, o, res, t_a, t_b, grid, hbar)
    hdr = report.header_lines(cfg)
    report.write_text(out / "maximize_series.csv", report.series_csv(
        series.times, {"qba_re": series.values.real,
                       "qba_im": series.values.imag}, hdr))
    report.write_json(out / "maximize_summary.json", {
        "log_amplitude": res.log_amplitude,
        "ascent_log_amplitude": res.ascent_log_amplitude,
        "ascent_fidelity_a": res.ascent_fidelity_a,
        "ascent_fidelity_b": res.ascent_fidelity_b,
        "eigen_index": res.eigen_index,
        "degenerate": res.degenerate,
        "a0": res.a0, "b_final": res.b_final,
        "max_abs_imag": float(np.max(np.abs(series.values.imag))),
    }, cfg)


def cmd_paths(cfg: dict, out: Path) -> None:
    try:
        t_b = float(cfg["time"]["t_b"])
        path_cfgs = cfg["paths"]
    except KeyError as exc:
        raise ConfigError("config.missing_paths", f"paths config needs {exc}")
    profiles = [profile_from_config(p, t_b) for p in path_cfgs]
    grid = int(cfg.get("grid", 2048))
    rep = preference_timeline(profiles, t_b, grid)
    hdr = report.header_lines(cfg)
    report.write_text(out / "selection.csv", rep.to_csv(hdr))
    summary = rep.summary()
    report.write_json(out / "selection_summary.json", summary, cfg)
    report.write_text(out / "selection.gnuplot",
                      report.selection_gnuplot("selection.csv", rep.labels, summary))
    report.render_profile_figure(profiles, t_b, out / "profiles.png")
    report.render_selection_figure(rep, out / "selection.png")


COMMANDS = {
    "evolve": cmd_evolve,
    "identities": cmd_identities,
    "correspondence": cmd_correspondence,
    "maximize": cmd_maximize,
    "paths": cmd_paths,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command is None:
            raise ConfigError("config.missing_command", "no subcommand given")
        cfg = _load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        json.dump({"error": exc.code, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except CatsimError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
