"""Artifact output: deterministic CSV/JSON writers, gnuplot scripts and
matplotlib figure rendering.

Every artifact carries a header block with the config hash and tool
version so reruns are byte-comparable.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_lines(config: dict) -> tuple[str, ...]:
    return (f"catsim {__version__}", f"config_hash {config_hash(config)}")


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="\n")


def write_json(path: Path, obj: dict, config: dict) -> None:
    payload = {"tool": f"catsim {__version__}",
               "config_hash": config_hash(config), **obj}
    write_text(path, json.dumps(payload, sort_keys=True, indent=2,
                                default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")


def series_csv(times, columns: dict[str, np.ndarray],
               header: tuple[str, ...] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(["time"] + list(columns)))
    arrays = [np.asarray(v) for v in columns.values()]
    for i, t in enumerate(times):
        row = [f"{t:.17g}"]
        for arr in arrays:
            v = arr[i]
            if np.iscomplexobj(arr):
                row.append(f"{v.real:.17g}")
            else:
                row.append(f"{float(v):.17g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# gnuplot

def selection_gnuplot(csv_name: str, labels: list[str], summary: dict) -> str:
    """Script reproducing the two-path comparison layout: the profile pair,
    the accumulated actions and the marked crossing/balance times."""
    lines = [
        "set datafile separator ','",
        "set key left bottom",
        "set xlabel 't'",
        "set ylabel 'S_I([0,t])'",
    ]
    for key in ("t_c", "t_d"):
        val = summary.get(key)
        if isinstance(val, float):
            lines.append(f"set arrow from {val:.12g}, graph 0 to {val:.12g}, "
                         f"graph 1 nohead dashtype 2")
            lines.append(f"set label '{key}' at {val:.12g}, graph 1.02 center")
    plots = [f"'{csv_name}' using 1:{i + 2} with lines title 'S_I {lab}'"
             for i, lab in enumerate(labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("pause -1")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# matplotlib figures rendered next to the delimited output

def render_selection_figure(report, path: Path) -> None:
    fig, (ax_l, ax_s) = plt.subplots(2, 1, sharex=True, figsize=(7, 7))
    for j, lab in enumerate(report.labels):
        ax_s.plot(report.times, report.s_i_per_path[j], label=f"$S_I$ {lab}")
    for c in report.crossings:
        ax = ax_s if c.kind == "action_balance" else ax_l
        ax.axvline(c.time, ls="--", lw=0.8, color="gray")
        ax.annotate("$t_d$" if c.kind == "action_balance" else "$t_c$",
                    (c.time, 0), textcoords="offset points", xytext=(4, 4))
    ax_s.set_xlabel("t")
    ax_s.set_ylabel("accumulated imaginary action")
    ax_s.legend()
    ax_l.set_ylabel("winner (running)")
    # running winner as a step line over path indices
    idx = [report.labels.index(w) for w in report.fni_winner]
    ax_l.step(report.times, idx, where="mid")
    ax_l.set_yticks(range(len(report.labels)), report.labels)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_profile_figure(profiles, t_b: float, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ts = np.linspace(0.0, t_b, 512)
    for p in profiles:
        ax.plot(ts, p.l_i(ts), label=f"$L_I$ {p.label}")
    ax.set_xlabel("t")
    ax.set_ylabel("imaginary Lagrangian")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_trajectory_figure(traj, path: Path) -> None:
    fig, (ax_n, ax_a) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax_n.plot(traj.times, traj.norms())
    ax_n.set_ylabel("norm")
    amps = np.abs(traj.states)
    show = min(traj.dim, 8)
    for k in range(show):
        ax_a.plot(traj.times, amps[:, k], label=f"|amp {k}|")
    ax_a.set_xlabel("t")
    ax_a.set_ylabel("component magnitude")
    if show <= 8:
        ax_a.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_correspondence_figure(report, t_b: float, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    d = t_b - report.times
    good = report.delta > 0
    ax.semilogy(d[good], report.delta[good], "o", ms=3, label="measured")
    if report.rate != 0.0:
        ref = report.delta[good][0] * np.exp(-report.rate * (d[good] - d[good][0]))
        ax.semilogy(d[good], ref, "-", lw=1,
                    label=f"fit rate {report.rate:.3f}")
    ax.set_xlabel("time remaining to final boundary")
    ax.set_ylabel("|two-sided - Q-weighted one-sided|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_residual_figure(residuals: dict, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, res in residuals.items():
        ax.semilogy(res.times, np.maximum(res.residual_magnitudes, 1e-300),
                    label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("identity residual")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
