"""Builders for complex-mass / complex-potential particle models on a 1D grid,
two-level toy matrices and seeded random non-normal ensembles."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import GridTooCoarse, NotDiagonalizable
from .spectral import eigendecompose

MAX_REDRAWS = 32


@dataclass(frozen=True)
class ComplexMass:
    m_r: float
    m_i: float = 0.0

    def __post_init__(self):
        if self.m_r <= 0.0:
            raise ValueError(f"real part of the mass must be positive, got {self.m_r}")

    @property
    def value(self) -> complex:
        return complex(self.m_r, self.m_i)


class Boundary(Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    n_points: int
    x_min: float
    x_max: float
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.n_points < 8:
            raise GridTooCoarse(f"need at least 8 grid points, got {self.n_points}")

    @property
    def dx(self) -> float:
        # periodic grids omit the duplicate endpoint
        if self.boundary is Boundary.PERIODIC:
            return (self.x_max - self.x_min) / self.n_points
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        if self.boundary is Boundary.PERIODIC:
            return self.x_min + self.dx * np.arange(self.n_points)
        return np.linspace(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class ParticleModel:
    mass: ComplexMass
    potential_r: Callable[[np.ndarray], np.ndarray]
    potential_i: Callable[[np.ndarray], np.ndarray]
    grid: GridSpec
    hbar: float = 1.0

    def __post_init__(self):
        if self.hbar <= 0.0:
            raise ValueError("hbar must be positive")
        x = self.grid.points
        for pot in (self.potential_r, self.potential_i):
            v = np.asarray(pot(x), dtype=float)
            if v.shape != x.shape or not np.all(np.isfinite(v)):
                raise ValueError("potential must be finite on the grid")


def second_difference(grid: GridSpec) -> np.ndarray:
    """Second-order central D2 for the chosen boundary (1/dx^2 scaling)."""
    n = grid.n_points
    d2 = np.zeros((n, n))
    for j in range(n):
        d2[j, j] = -2.0
        if j > 0:
            d2[j, j - 1] = 1.0
        if j < n - 1:
            d2[j, j + 1] = 1.0
    if grid.boundary is Boundary.PERIODIC:
        d2[0, n - 1] = 1.0
        d2[n - 1, 0] = 1.0
    return d2 / grid.dx**2


def build_particle_hamiltonian(model: ParticleModel) -> np.ndarray:
    """H = (-hbar^2 / 2m) D2 + diag(V_R + i V_I); non-normal whenever
    m_I != 0 or V_I is not identically zero."""
    grid = model.grid
    x = grid.points
    d2 = second_difference(grid)
    kinetic = (-model.hbar**2 / (2.0 * model.mass.value)) * d2
    v = np.asarray(model.potential_r(x), dtype=float) + 1j * np.asarray(
        model.potential_i(x), dtype=float)
    return kinetic + np.diag(v)


def build_position_operator(grid: GridSpec) -> np.ndarray:
    return np.diag(grid.points.astype(complex))


def build_momentum_operator(grid: GridSpec, hbar: float = 1.0) -> np.ndarray:
    """-i hbar times the central first difference; Hermitian for periodic
    boundaries."""
    n = grid.n_points
    d1 = np.zeros((n, n))
    for j in range(n):
        if j > 0:
            d1[j, j - 1] = -1.0
        if j < n - 1:
            d1[j, j + 1] = 1.0
    if grid.boundary is Boundary.PERIODIC:
        d1[0, n - 1] = -1.0
        d1[n - 1, 0] = 1.0
    return -1j * hbar * d1 / (2.0 * grid.dx)


def build_two_level(a: complex, b: complex, c: complex, d: complex) -> np.ndarray:
    return np.array([[a, b], [c, d]], dtype=complex)


def random_nonnormal(dim: int, seed: int, spread: float = 1.0) -> np.ndarray:
    """Seeded dense matrix, entries uniform on a disk of radius ``spread``;
    redrawn (bounded) until diagonalizable."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        r = spread * np.sqrt(rng.uniform(0.0, 1.0, (dim, dim)))
        phi = rng.uniform(0.0, 2.0 * np.pi, (dim, dim))
        h = r * np.exp(1j * phi)
        try:
            eigendecompose(h)
        except NotDiagonalizable:
            continue
        return h
    raise NotDiagonalizable(f"no diagonalizable draw in {MAX_REDRAWS} attempts")


def effective_mass(m: ComplexMass) -> float:
    """m_R + m_I^2 / m_R, equal to 1 / Re(1/m)."""
    return m.m_r + m.m_i**2 / m.m_r


def effective_lagrangian(m: ComplexMass, v_r: Callable, q: float, qdot: float) -> float:
    """L_eff = (1/2) m_eff qdot^2 - V_R(q)."""
    return 0.5 * effective_mass(m) * qdot**2 - float(np.asarray(v_r(np.array([q])))[0])


def effective_lagrangian_residual(model: ParticleModel, q_of_t: Callable[[float], float],
                                  t: float, dt: float = 1e-5) -> float:
    """Euler-Lagrange residual m_eff qddot + V_R'(q) at time t.

    Zero along solutions of the effective classical equations of motion
    (the delta S_eff = 0 checker).  Derivatives of the trajectory and of
    V_R are taken by central differences.
    """
    m_eff = effective_mass(model.mass)
    qm, q0, qp = q_of_t(t - dt), q_of_t(t), q_of_t(t + dt)
    qddot = (qp - 2.0 * q0 + qm) / dt**2

    def v_r(x):
        return float(np.asarray(model.potential_r(np.array([x])))[0])

    dq = 1e-6 * max(1.0, abs(q0))
    v_prime = (v_r(q0 + dq) - v_r(q0 - dq)) / (2.0 * dq)
    return m_eff * qddot + v_prime


def gaussian_packet(grid: GridSpec, center: float, momentum: float, sigma: float,
                    hbar: float = 1.0) -> np.ndarray:
    """Unit-norm Gaussian wave packet exp(-(x-c)^2/(4 sigma^2) + i k x / hbar)."""
    x = grid.points
    psi = np.exp(-((x - center) ** 2) / (4.0 * sigma**2) + 1j * momentum * x / hbar)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# JSON model config: {mass: {re, im}, potential: {kind, params...}, grid: {...},
# hbar}.  Tabulated potentials are [x, V_R, V_I] triples, linearly interpolated.

def _potential_from_config(cfg: dict):
    kind = cfg.get("kind", "harmonic")
    if kind == "harmonic":
        k_r = float(cfg.get("k", 1.0))
        k_i = float(cfg.get("k_imag", 0.0))
        x0 = float(cfg.get("center", 0.0))
        return (lambda x: 0.5 * k_r * (x - x0) ** 2,
                lambda x: 0.5 * k_i * (x - x0) ** 2)
    if kind == "quartic":
        c_r = float(cfg.get("c", 1.0))
        c_i = float(cfg.get("c_imag", 0.0))
        return (lambda x: c_r * x**4, lambda x: c_i * x**4)
    if kind == "free":
        return (lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))
    if kind == "table":
        rows = np.asarray(cfg["samples"], dtype=float)
        xs, vr, vi = rows[:, 0], rows[:, 1], rows[:, 2]
        return (lambda x: np.interp(x, xs, vr), lambda x: np.interp(x, xs, vi))
    raise ValueError(f"unknown potential kind {kind!r}")


def model_from_config(cfg: dict) -> ParticleModel:
    mass = ComplexMass(float(cfg["mass"]["re"]), float(cfg["mass"].get("im", 0.0)))
    g = cfg["grid"]
    grid = GridSpec(int(g["n_points"]), float(g["x_min"]), float(g["x_max"]),
                    Boundary(g.get("boundary", "periodic")))
    v_r, v_i = _potential_from_config(cfg.get("potential", {"kind": "free"}))
    return ParticleModel(mass=mass, potential_r=v_r, potential_i=v_i, grid=grid,
                         hbar=float(cfg.get("hbar", 1.0)))
