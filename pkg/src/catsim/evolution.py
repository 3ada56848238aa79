"""Time propagation of boundary states.

The forward state evolves under H, the backward (final-condition) state
under H^dag, and the normalized future-not-included state under the
nonlinear norm-preserving equation obtained by subtracting the expectation
of the anti-Hermitian part.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, StepTooLarge
from .spectral import SpectralData, as_square_matrix, eigendecompose, hermitian_split

# amplitudes outside [1e-150, 1e150] are rescaled; only ratios are reported
LOG_NORM_GUARD = 345.0

RK4_CHECK_INTERVAL = 64
RK4_LOCAL_ERROR_TOL = 1e-5


class Stepper(Enum):
    EIGENBASIS_EXACT = "eigenbasis_exact"
    RK4 = "rk4"


class StateLabel(Enum):
    A = "A"
    B = "B"
    A_NORMALIZED = "A_normalized"


@dataclass
class StateVector:
    amplitudes: np.ndarray
    time: float
    label: StateLabel = StateLabel.A
    log_scale: float = 0.0  # true amplitudes are amplitudes * exp(log_scale)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_samples, dim)
    log_scales: np.ndarray
    label: StateLabel
    stepper: Stepper
    step_size: float
    hbar: float = 1.0

    def __post_init__(self):
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def state(self, i: int) -> StateVector:
        return StateVector(self.states[i], float(self.times[i]), self.label,
                           float(self.log_scales[i]))

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def to_csv(self, header_lines: tuple[str, ...] = ()) -> str:
        """CSV with columns time, re/im of each amplitude, norm, log_scale."""
        cols = ["time"]
        for k in range(self.dim):
            cols += [f"re_{k}", f"im_{k}"]
        cols += ["norm", "log_scale"]
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(cols))
        norms = self.norms()
        for i, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            for z in self.states[i]:
                row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            row += [f"{norms[i]:.17g}", f"{self.log_scales[i]:.17g}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _check_state(h: np.ndarray, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (h.shape[0],):
        raise DimensionMismatch(
            f"state of shape {psi.shape} incompatible with dim {h.shape[0]}")
    return psi


def _exact_step(spec: SpectralData, psi: np.ndarray, dt: float,
                hbar: float) -> tuple[np.ndarray, float]:
    """psi -> P exp(-i Lambda dt / hbar) P^{-1} psi, rescaled when the
    exponents would overflow.  Returns (state, extra log scale)."""
    coeff = np.linalg.solve(spec.eigvec_matrix, psi)
    expo = -1j * spec.eigenvalues * dt / hbar
    shift = float(np.max(expo.real))
    if abs(shift) < LOG_NORM_GUARD:
        shift = 0.0
    out = spec.eigvec_matrix @ (coeff * np.exp(expo - shift))
    return out, shift


def _rk4_step(h: np.ndarray, psi: np.ndarray, dt: float, hbar: float) -> np.ndarray:
    f = lambda y: (h @ y) / (1j * hbar)
    k1 = f(psi)
    k2 = f(psi + 0.5 * dt * k1)
    k3 = f(psi + 0.5 * dt * k2)
    k4 = f(psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_march(h: np.ndarray, psi: np.ndarray, t0: float, t1: float, step: float,
               hbar: float, error_tol: float = RK4_LOCAL_ERROR_TOL) -> np.ndarray:
    n_steps = max(1, int(round((t1 - t0) / step)))
    dt = (t1 - t0) / n_steps
    for i in range(n_steps):
        if i % RK4_CHECK_INTERVAL == 0:
            full = _rk4_step(h, psi, dt, hbar)
            half = _rk4_step(h, _rk4_step(h, psi, 0.5 * dt, hbar), 0.5 * dt, hbar)
            scale = max(float(np.linalg.norm(half)), 1e-300)
            if float(np.linalg.norm(full - half)) / scale > error_tol:
                raise StepTooLarge(
                    f"RK4 local error above {error_tol:.1e} at step size {dt:.3e}")
            psi = half
        else:
            psi = _rk4_step(h, psi, dt, hbar)
    return psi


def propagate_A(h, a0: StateVector, t0: float, t1: float,
                method: Stepper = Stepper.EIGENBASIS_EXACT, hbar: float = 1.0,
                step: float = 1e-3, spectral: SpectralData | None = None) -> StateVector:
    """|A(t1)> = exp(-i H (t1 - t0) / hbar) |A(t0)>."""
    h = as_square_matrix(h)
    psi = _check_state(h, a0.amplitudes)
    if t1 < t0:
        raise ValueError("propagate_A requires t1 >= t0")
    if method is Stepper.EIGENBASIS_EXACT:
        spec = spectral if spectral is not None else eigendecompose(h)
        out, shift = _exact_step(spec, psi, t1 - t0, hbar)
        return StateVector(out, t1, a0.label, a0.log_scale + shift)
    out = _rk4_march(h, psi, t0, t1, step, hbar)
    return StateVector(out, t1, a0.label, a0.log_scale)


def propagate_B(h, b0: StateVector, t0: float, t1: float,
                method: Stepper = Stepper.EIGENBASIS_EXACT, hbar: float = 1.0,
                step: float = 1e-3, spectral: SpectralData | None = None) -> StateVector:
    """As propagate_A with H^dag in place of H; t1 may precede t0 so a final
    condition can be carried backward."""
    h = as_square_matrix(h)
    psi = _check_state(h, b0.amplitudes)
    h_dag = h.conj().T
    if method is Stepper.EIGENBASIS_EXACT:
        spec = spectral if spectral is not None else eigendecompose(h_dag)
        out, shift = _exact_step(spec, psi, t1 - t0, hbar)
        return StateVector(out, t1, StateLabel.B, b0.log_scale + shift)
    out = _rk4_march(h_dag, psi, t0, t1, step, hbar)
    return StateVector(out, t1, StateLabel.B, b0.log_scale)


def _sample_trajectory(evolve_matrix: np.ndarray, psi0: np.ndarray, t_ref: float,
                       times: np.ndarray, hbar: float, label: StateLabel,
                       log_scale0: float = 0.0) -> Trajectory:
    """Exact eigenbasis samples of exp(-i M (t - t_ref)/hbar) psi0 on a grid."""
    spec = eigendecompose(evolve_matrix)
    coeff = np.linalg.solve(spec.eigvec_matrix, psi0)
    states = np.empty((len(times), len(psi0)), dtype=complex)
    log_scales = np.empty(len(times))
    for i, t in enumerate(times):
        expo = -1j * spec.eigenvalues * (t - t_ref) / hbar
        shift = float(np.max(expo.real))
        if abs(shift) < LOG_NORM_GUARD:
            shift = 0.0
        states[i] = spec.eigvec_matrix @ (coeff * np.exp(expo - shift))
        log_scales[i] = log_scale0 + shift
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return Trajectory(np.asarray(times, dtype=float), states, log_scales, label,
                      Stepper.EIGENBASIS_EXACT, dt, hbar)


def trajectory_A(h, a0, times, hbar: float = 1.0) -> Trajectory:
    """Forward state sampled on a time grid; boundary value a0 at times[0]."""
    h = as_square_matrix(h)
    psi = _check_state(h, np.asarray(a0, dtype=complex))
    return _sample_trajectory(h, psi, float(times[0]), np.asarray(times, dtype=float),
                              hbar, StateLabel.A)


def trajectory_B(h, b_final, times, t_final: float | None = None,
                 hbar: float = 1.0) -> Trajectory:
    """Backward state sampled on a time grid; boundary value b_final at
    t_final (defaults to times[-1]).  Evolves under H^dag."""
    h = as_square_matrix(h)
    psi = _check_state(h, np.asarray(b_final, dtype=complex))
    t_ref = float(times[-1]) if t_final is None else float(t_final)
    return _sample_trajectory(h.conj().T, psi, t_ref, np.asarray(times, dtype=float),
                              hbar, StateLabel.B)


def trajectory_under(matrix, psi0, times, t_ref: float | None = None,
                     hbar: float = 1.0,
                     label: StateLabel = StateLabel.A) -> Trajectory:
    """Exact eigenbasis samples of exp(-i M (t - t_ref)/hbar) psi0 for an
    arbitrary generator M; boundary value attached at t_ref (default
    times[0]).  Times before t_ref are reached by backward evolution."""
    m = as_square_matrix(matrix)
    psi = _check_state(m, np.asarray(psi0, dtype=complex))
    ref = float(times[0]) if t_ref is None else float(t_ref)
    return _sample_trajectory(m, psi, ref, np.asarray(times, dtype=float), hbar, label)


def propagate_A_normalized(h, a0, t0: float, t1: float, step: float,
                           hbar: float = 1.0) -> Trajectory:
    """Integrate the nonlinear norm-preserving equation with fixed-step RK4:

        i hbar d|A>_N = H |A>_N - <A|H_a|A>_N |A>_N

    Samples are stored each step; the global phase of every sample is fixed
    by making its largest-magnitude amplitude real-positive.
    """
    h = as_square_matrix(h)
    psi = _check_state(h, np.asarray(a0, dtype=complex))
    norm0 = np.linalg.norm(psi)
    if abs(norm0 - 1.0) > 1e-8:
        raise ValueError("initial state must have unit norm")
    _, h_a = hermitian_split(h)

    def f(y):
        nrm2 = np.vdot(y, y).real
        exp_ha = np.vdot(y, h_a @ y) / nrm2
        return (h @ y - exp_ha * y) / (1j * hbar)

    n_steps = max(1, int(round((t1 - t0) / step)))
    dt = (t1 - t0) / n_steps
    times = t0 + dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, len(psi)), dtype=complex)
    states[0] = _fix_phase(psi)
    for i in range(n_steps):
        k1 = f(psi)
        k2 = f(psi + 0.5 * dt * k1)
        k3 = f(psi + 0.5 * dt * k2)
        k4 = f(psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(psi)):
            raise StepTooLarge(f"normalized RK4 diverged at step size {dt:.3e}")
        states[i + 1] = _fix_phase(psi)
    return Trajectory(times, states, np.zeros(n_steps + 1), StateLabel.A_NORMALIZED,
                      Stepper.RK4, dt, hbar)


def _fix_phase(psi: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(psi)))
    z = psi[k]
    if z == 0:
        return psi
    return psi * (z.conjugate() / abs(z))


def fidelity(u, v) -> float:
    """|<u|v>| for unit-normalized copies of u and v."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return float(abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v)))
