"""Imaginary-action path selection.

Profiles of the imaginary Lagrangian along explicitly given paths, their
accumulated imaginary actions, the crossing and balance times of a
two-path comparison, exponential path weights kept in log domain, and the
per-time preference timeline for both boundary conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (NoRootInInterval, OutOfDomain, RegimeViolation)
from .model import ParticleModel

DEFAULT_GRID_POINTS = 2048
TIE_RTOL = 1e-12


class ProfileForm(Enum):
    CONSTANT = "constant"
    COSINE_DIP = "cosine_dip"
    TABULATED = "table"


@dataclass
class PathProfile:
    """Imaginary Lagrangian of one path as a function of time on [0, t_b]."""

    label: str
    form: ProfileForm
    l_i: Callable[[np.ndarray], np.ndarray]
    t_b: float
    params: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float, t_b: float, label: str = "constant") -> "PathProfile":
        return cls(label, ProfileForm.CONSTANT,
                   lambda t: np.full_like(np.asarray(t, dtype=float), value),
                   t_b, {"value": float(value)})

    @classmethod
    def cosine_dip(cls, alpha: float, t_b: float, label: str = "cosine_dip") -> "PathProfile":
        """alpha (cos(pi t / t_b) - 1): zero at t=0, dipping to -2 alpha."""
        return cls(label, ProfileForm.COSINE_DIP,
                   lambda t: alpha * (np.cos(np.pi * np.asarray(t, dtype=float) / t_b) - 1.0),
                   t_b, {"alpha": float(alpha)})

    @classmethod
    def tabulated(cls, times, values, label: str = "table") -> "PathProfile":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("tabulated samples must be strictly time-ordered")
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite")
        return cls(label, ProfileForm.TABULATED,
                   lambda t: np.interp(t, times, values),
                   float(times[-1]), {"times": times, "values": values})


def s_i_partial(profile: PathProfile, t: float) -> float:
    """Accumulated imaginary action on [0, t].

    Closed form for constant and cosine profiles; for tabulated profiles
    the piecewise-linear interpolant is integrated exactly (trapezoid on
    the knots), which beats any quadrature tolerance.
    """
    if t < -1e-12 * max(1.0, profile.t_b) or t > profile.t_b * (1 + 1e-12):
        raise OutOfDomain(f"t={t} outside [0, {profile.t_b}]")
    t = min(max(t, 0.0), profile.t_b)
    if profile.form is ProfileForm.CONSTANT:
        return profile.params["value"] * t
    if profile.form is ProfileForm.COSINE_DIP:
        alpha = profile.params["alpha"]
        t_b = profile.t_b
        return alpha * ((t_b / math.pi) * math.sin(math.pi * t / t_b) - t)
    knots = profile.params["times"]
    vals = profile.params["values"]
    cut = np.searchsorted(knots, t)
    ts = np.concatenate([knots[:cut], [t]])
    vs = np.concatenate([vals[:cut], [float(np.interp(t, knots, vals))]])
    if knots[0] > 0.0:  # extend flat to t=0
        ts = np.concatenate([[0.0], ts])
        vs = np.concatenate([[vs[0]], vs])
    return float(np.trapezoid(vs, ts))


def path_weight(profile: PathProfile, t: float, hbar: float = 1.0) -> float:
    """Log-domain weight -S_I([0, t]) / hbar (never exponentiated)."""
    return -s_i_partial(profile, t) / hbar


def crossing_time_tc(alpha: float, beta: float, t_b: float) -> float:
    """Time where the cosine profile meets the constant -beta profile:
    (t_b / pi) arccos(1 - beta / alpha), valid for alpha > beta > 0."""
    if not (alpha > beta > 0.0):
        raise RegimeViolation(f"need alpha > beta > 0, got alpha={alpha}, beta={beta}")
    return (t_b / math.pi) * math.acos(1.0 - beta / alpha)


def balance_time_td(alpha: float, beta: float, t_b: float,
                    tol: float = 1e-12) -> float:
    """Nonzero root of sin(pi t / t_b) = (1 - beta/alpha)(pi / t_b) t in
    (0, t_b]: the time where the two accumulated actions balance.

    Bracketed bisection seeded past the crossing time, refined by Newton.
    """
    if not (alpha > beta > 0.0):
        raise RegimeViolation(f"need alpha > beta > 0, got alpha={alpha}, beta={beta}")
    c = 1.0 - beta / alpha

    def g(t):
        return math.sin(math.pi * t / t_b) - c * (math.pi / t_b) * t

    def g_prime(t):
        return (math.pi / t_b) * (math.cos(math.pi * t / t_b) - c)

    # g > 0 just past the crossing time, g(t_b) = -c pi < 0
    lo = crossing_time_tc(alpha, beta, t_b)
    hi = t_b
    if g(lo) <= 0.0:
        raise NoRootInInterval("no sign change past the crossing time")
    while hi - lo > 1e-6 * t_b:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(60):
        step = g(t) / g_prime(t)
        t -= step
        if abs(g(t)) <= tol:
            break
    else:
        raise NoRootInInterval(f"Newton refinement stalled, residual {g(t):.3e}")
    return t


@dataclass
class Crossing:
    time: float
    kind: str  # "lagrangian_cross" | "action_balance"
    paths: tuple[str, str]


@dataclass
class SelectionReport:
    times: np.ndarray
    labels: list[str]
    s_i_per_path: np.ndarray       # (n_paths, n_times)
    fni_winner: list[str]          # per-time verdict from S_I([0, t])
    fi_winner: str                 # single verdict from S_I([0, t_b])
    crossings: list[Crossing]
    contradiction: bool
    ties_unresolved: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        t_c = [c.time for c in self.crossings if c.kind == "lagrangian_cross"]
        t_d = [c.time for c in self.crossings if c.kind == "action_balance"]
        return {
            "fi_winner": self.fi_winner,
            "fni_switches": _switch_times(self.times, self.fni_winner),
            "t_c": t_c[0] if len(t_c) == 1 else t_c,
            "t_d": t_d[0] if len(t_d) == 1 else t_d,
            "contradiction": self.contradiction,
        }

    def to_csv(self, header_lines: tuple[str, ...] = ()) -> str:
        lines = [f"# {h}" for h in header_lines]
        cols = ["time"] + [f"s_i_{lab}" for lab in self.labels] + ["fni_winner"]
        lines.append(",".join(cols))
        for i, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            row += [f"{self.s_i_per_path[j, i]:.17g}" for j in range(len(self.labels))]
            row.append(self.fni_winner[i])
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _switch_times(times, winners) -> list[float]:
    out = []
    for i in range(1, len(winners)):
        if winners[i] != winners[i - 1]:
            out.append(float(0.5 * (times[i - 1] + times[i])))
    return out


def _winner_at(profiles, s_values, t: float) -> tuple[int, bool]:
    """Index of the favored path at time t: smallest accumulated action,
    ties broken by the smaller instantaneous L_I (the imminently favored
    path).  Returns (index, tie_unresolved)."""
    scale = max(np.max(np.abs(s_values)), 1.0)
    best = np.min(s_values)
    tied = np.flatnonzero(s_values <= best + TIE_RTOL * scale)
    if len(tied) == 1:
        return int(tied[0]), False
    l_now = np.array([float(profiles[j].l_i(np.array([t]))[0]) for j in tied])
    l_scale = max(np.max(np.abs(l_now)), 1.0)
    l_best = np.min(l_now)
    still = np.flatnonzero(l_now <= l_best + TIE_RTOL * l_scale)
    return int(tied[still[0]]), len(still) > 1


def preference_timeline(paths: list[PathProfile], t_b: float,
                        grid: int = DEFAULT_GRID_POINTS) -> SelectionReport:
    """Per-time verdicts of the two boundary conventions over a path set.

    The final-boundary verdict uses only the full-interval action and is a
    single constant winner; the running verdict re-ranks the accumulated
    action at every grid time.  Crossings of pairwise Lagrangian and
    action differences are refined off-grid by bracketing.  The
    contradiction flag is set when the running verdict changes over time
    while the full-interval verdict is constant.
    """
    if len(paths) < 1:
        raise ValueError("need at least one path")
    times = np.linspace(0.0, t_b, grid)
    s_i = np.array([[s_i_partial(p, t) for t in times] for p in paths])

    fni, ties = [], []
    for i, t in enumerate(times):
        idx, unresolved = _winner_at(paths, s_i[:, i], t)
        fni.append(paths[idx].label)
        if unresolved:
            ties.append(float(t))

    s_final = s_i[:, -1]
    fi_idx, _ = _winner_at(paths, s_final, t_b)
    fi = paths[fi_idx].label

    crossings = []
    for j in range(len(paths)):
        for k in range(j + 1, len(paths)):
            pj, pk = paths[j], paths[k]
            l_diff = lambda t: float(pj.l_i(np.array([t]))[0] - pk.l_i(np.array([t]))[0])
            s_diff = lambda t: s_i_partial(pj, t) - s_i_partial(pk, t)
            for kind, f in (("lagrangian_cross", l_diff), ("action_balance", s_diff)):
                for root in _bracketed_roots(f, times, skip_origin=(kind == "action_balance")):
                    crossings.append(Crossing(root, kind, (pj.label, pk.label)))

    contradiction = len(set(fni)) > 1
    return SelectionReport(times=times, labels=[p.label for p in paths],
                           s_i_per_path=s_i, fni_winner=fni, fi_winner=fi,
                           crossings=crossings, contradiction=contradiction,
                           ties_unresolved=ties)


def _bracketed_roots(f, times, skip_origin: bool = False) -> list[float]:
    roots = []
    vals = np.array([f(t) for t in times])
    start = 1 if skip_origin else 0  # accumulated actions share a root at t=0
    for i in range(start, len(times) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0 and times[i] > 0.0:
            roots.append(float(times[i]))
        elif a * b < 0.0:
            roots.append(float(brentq(f, times[i], times[i + 1], xtol=1e-14)))
    return roots


def l_i_from_model(model: ParticleModel, q_of_t: Callable[[np.ndarray], np.ndarray],
                   qdot_of_t: Callable[[np.ndarray], np.ndarray], t_b: float,
                   n_samples: int = DEFAULT_GRID_POINTS,
                   label: str = "model_path") -> PathProfile:
    """Tabulated imaginary Lagrangian (1/2) m_I qdot^2 - V_I(q) along an
    explicitly given trajectory."""
    times = np.linspace(0.0, t_b, n_samples)
    q = np.asarray(q_of_t(times), dtype=float)
    qdot = np.asarray(qdot_of_t(times), dtype=float)
    values = 0.5 * model.mass.m_i * qdot**2 - np.asarray(model.potential_i(q), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("trajectory produced non-finite imaginary Lagrangian")
    return PathProfile.tabulated(times, values, label)


def profile_from_config(cfg: dict, t_b: float) -> PathProfile:
    """JSON form: {form: "constant"|"cosine_dip"|"table", params...}."""
    form = cfg["form"]
    label = cfg.get("label", form)
    if form == "constant":
        return PathProfile.constant(float(cfg["value"]), t_b, label)
    if form == "cosine_dip":
        return PathProfile.cosine_dip(float(cfg["alpha"]), t_b, label)
    if form == "table":
        rows = np.asarray(cfg["samples"], dtype=float)
        return PathProfile.tabulated(rows[:, 0], rows[:, 1], label)
    raise ValueError(f"unknown profile form {form!r}")
