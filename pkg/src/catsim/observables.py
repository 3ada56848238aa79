"""Normalized matrix elements for both boundary conventions and the exact
time-development identities they obey.

Covers the two-sided form <B|O|A>/<B|A>, the one-sided form <A|O|A>/<A|A>
with its anticommutator fluctuation term, the momentum-relation reports,
the large-time correspondence experiment, and the transition-amplitude
maximization principle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateImaginaryParts, GridTooShort, NoConvergence,
                     PacketTooWide)
from .evolution import Trajectory, trajectory_A, trajectory_under
from .model import (ParticleModel, build_momentum_operator,
                    build_particle_hamiltonian, build_position_operator,
                    effective_mass, gaussian_packet)
from .spectral import (SpectralData, as_square_matrix, construct_q,
                       eigendecompose, hermitian_split,
                       q_orthonormal_eigenbasis)

DENOMINATOR_FLOOR = 1e-12
GAP_THRESHOLD = 1e-8


@dataclass
class ExpectationSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str  # "BA" | "AA" | "QBA"
    operator_label: str = ""
    flagged: np.ndarray = field(default=None)  # denominator underflow per sample

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros(len(self.times), dtype=bool)
        if not (len(self.times) == len(self.values) == len(self.flagged)):
            raise ValueError("series arrays must have aligned lengths")


def _ratio_series(numer: np.ndarray, denom: np.ndarray, scale: np.ndarray,
                  floor: float) -> tuple[np.ndarray, np.ndarray]:
    flagged = np.abs(denom) <= floor * scale
    safe = np.where(flagged, 1.0, denom)
    values = np.where(flagged, np.nan + 0j, numer / safe)
    return values, flagged


def expect_BA(o, a_traj: Trajectory, b_traj: Trajectory, operator_label: str = "O",
              floor: float = DENOMINATOR_FLOOR) -> ExpectationSeries:
    """Pointwise <B(t)|O|A(t)> / <B(t)|A(t)>; underflowing denominators are
    flagged per sample, not dropped."""
    o = as_square_matrix(o)
    if not np.allclose(a_traj.times, b_traj.times):
        raise ValueError("trajectories must share a time grid")
    bs = b_traj.states.conj()
    numer = np.einsum("ti,ij,tj->t", bs, o, a_traj.states)
    denom = np.einsum("ti,ti->t", bs, a_traj.states)
    scale = a_traj.norms() * b_traj.norms()
    values, flagged = _ratio_series(numer, denom, scale, floor)
    return ExpectationSeries(a_traj.times.copy(), values, "BA", operator_label, flagged)


def expect_AA(o, a_traj: Trajectory, operator_label: str = "O",
              floor: float = DENOMINATOR_FLOOR) -> ExpectationSeries:
    """Pointwise <A(t)|O|A(t)> / <A(t)|A(t)>."""
    o = as_square_matrix(o)
    ac = a_traj.states.conj()
    numer = np.einsum("ti,ij,tj->t", ac, o, a_traj.states)
    denom = np.einsum("ti,ti->t", ac, a_traj.states).real.astype(complex)
    scale = a_traj.norms() ** 2
    values, flagged = _ratio_series(numer, denom, scale, floor)
    return ExpectationSeries(a_traj.times.copy(), values, "AA", operator_label, flagged)


def expect_QBA(o, q, a_traj: Trajectory, b_traj: Trajectory, operator_label: str = "O",
               floor: float = DENOMINATOR_FLOOR) -> ExpectationSeries:
    """Pointwise <B(t)|Q O|A(t)> / <B(t)|Q A(t)>."""
    o = as_square_matrix(o)
    q = as_square_matrix(q)
    if not np.allclose(a_traj.times, b_traj.times):
        raise ValueError("trajectories must share a time grid")
    bq = np.einsum("ti,ij->tj", b_traj.states.conj(), q)
    numer = np.einsum("ti,ij,tj->t", bq, o, a_traj.states)
    denom = np.einsum("ti,ti->t", bq, a_traj.states)
    scale = a_traj.norms() * b_traj.norms() * np.linalg.norm(q, 2)
    values, flagged = _ratio_series(numer, denom, scale, floor)
    return ExpectationSeries(a_traj.times.copy(), values, "QBA", operator_label, flagged)


# ---------------------------------------------------------------------------
# finite differences on uniform grids

def fd_derivative(times: np.ndarray, values: np.ndarray,
                  order: int = 2) -> tuple[np.ndarray, slice]:
    """Central finite-difference d/dt on a uniform grid.

    order=2 uses the 3-point stencil, order=4 the 5-point stencil.  Returns
    the derivative on interior samples plus the interior slice.
    """
    h = np.diff(times)
    if len(times) < order + 1:
        raise GridTooShort(f"need at least {order + 1} samples")
    if not np.allclose(h, h[0], rtol=1e-9):
        raise ValueError("derivative requires a uniform time grid")
    dt = float(h[0])
    if order == 2:
        interior = slice(1, -1)
        d = (values[2:] - values[:-2]) / (2.0 * dt)
    elif order == 4:
        interior = slice(2, -2)
        d = (-values[4:] + 8.0 * values[3:-1] - 8.0 * values[1:-3]
             + values[:-4]) / (12.0 * dt)
    else:
        raise ValueError("order must be 2 or 4")
    return d, interior


@dataclass
class IdentityResidual:
    identity_name: str
    times: np.ndarray
    residual_magnitudes: np.ndarray
    tolerance_used: float

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual_magnitudes))

    def to_report(self, convergence_order_estimate: float | None = None,
                  fit: dict | None = None) -> dict:
        rep = {"identity_name": self.identity_name,
               "max_residual": self.max_residual}
        if convergence_order_estimate is not None:
            rep["convergence_order_estimate"] = convergence_order_estimate
        if fit is not None:
            rep["fit"] = fit
        return rep


def heisenberg_residual_BA(o, h, a_traj: Trajectory, b_traj: Trajectory,
                           hbar: float = 1.0, fd_order: int = 2,
                           tolerance: float = 0.0) -> IdentityResidual:
    """Residual of d/dt <O>^BA = <(i/hbar)[H, O]>^BA.

    Exact for any complex H; the reported residual is the time-stencil error.
    """
    o = as_square_matrix(o)
    h = as_square_matrix(h)
    series = expect_BA(o, a_traj, b_traj)
    comm = (1j / hbar) * (h @ o - o @ h)
    rhs = expect_BA(comm, a_traj, b_traj)
    lhs, interior = fd_derivative(series.times, series.values, fd_order)
    residual = np.abs(lhs - rhs.values[interior])
    return IdentityResidual("heisenberg_BA", series.times[interior], residual,
                            tolerance)


def ehrenfest_residual_BA(model: ParticleModel, a_traj: Trajectory,
                          b_traj: Trajectory,
                          fd_order: int = 2) -> dict[str, IdentityResidual]:
    """Residuals of the two-sided equations of motion for a particle model:

        d<q>^BA/dt = <p>^BA / m          (complex m)
        d<p>^BA/dt = -<V'(q)>^BA

    plus the momentum relation check m d<q>^BA/dt - <p>^BA.
    """
    x_op = build_position_operator(model.grid)
    p_op = build_momentum_operator(model.grid, model.hbar)
    v_prime = _potential_derivative_operator(model)
    m = model.mass.value

    q_series = expect_BA(x_op, a_traj, b_traj, "position")
    p_series = expect_BA(p_op, a_traj, b_traj, "momentum")
    vp_series = expect_BA(v_prime, a_traj, b_traj, "V_prime")

    dq, interior = fd_derivative(q_series.times, q_series.values, fd_order)
    dp, _ = fd_derivative(p_series.times, p_series.values, fd_order)
    t_in = q_series.times[interior]

    res_q = np.abs(dq - p_series.values[interior] / m)
    res_p = np.abs(dp + vp_series.values[interior])
    res_mom = np.abs(m * dq - p_series.values[interior])
    return {
        "velocity": IdentityResidual("ehrenfest_BA_velocity", t_in, res_q, 0.0),
        "force": IdentityResidual("ehrenfest_BA_force", t_in, res_p, 0.0),
        "momentum_relation": IdentityResidual("momentum_relation_BA", t_in,
                                              res_mom, 0.0),
    }


def _potential_derivative_operator(model: ParticleModel) -> np.ndarray:
    x = model.grid.points
    dx = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    vp = ((model.potential_r(x + dx) - model.potential_r(x - dx))
          + 1j * (model.potential_i(x + dx) - model.potential_i(x - dx))) / (2 * dx)
    return np.diag(vp)


def fluctuation_expect(o, h_a, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both forms of the fluctuation expectation per sample:

        <{O, H_a - <H_a>}>  and  <{O - <O>, H_a}>

    which agree algebraically; returned separately so agreement is testable.
    """
    o = as_square_matrix(o)
    h_a = as_square_matrix(h_a)
    sc = states.conj()
    nrm2 = np.einsum("ti,ti->t", sc, states).real
    exp_o = np.einsum("ti,ij,tj->t", sc, o, states) / nrm2
    exp_ha = np.einsum("ti,ij,tj->t", sc, h_a, states) / nrm2
    eye = np.eye(o.shape[0])
    form1 = np.empty(len(states), dtype=complex)
    form2 = np.empty(len(states), dtype=complex)
    for t in range(len(states)):
        shifted_ha = h_a - exp_ha[t] * eye
        shifted_o = o - exp_o[t] * eye
        m1 = o @ shifted_ha + shifted_ha @ o
        m2 = shifted_o @ h_a + h_a @ shifted_o
        form1[t] = np.vdot(states[t], m1 @ states[t]) / nrm2[t]
        form2[t] = np.vdot(states[t], m2 @ states[t]) / nrm2[t]
    return form1, form2


def aa_identity_residual(o, h, a_traj: Trajectory, hbar: float = 1.0,
                         fd_order: int = 2) -> tuple[IdentityResidual, float]:
    """Residual of the exact one-sided identity

        i hbar d/dt <O>^AA = <[O, H_h]>^AA + <F(O, H_a)>^AA

    Returns the residual plus the worst pointwise gap between the two
    algebraic forms of the fluctuation term.
    """
    o = as_square_matrix(o)
    h = as_square_matrix(h)
    h_h, h_a = hermitian_split(h)
    series = expect_AA(o, a_traj)
    comm = expect_AA(h_h @ o * -1.0 + o @ h_h, a_traj)  # <[O, H_h]>
    f1, f2 = fluctuation_expect(o, h_a, a_traj.states)
    f_form_gap = float(np.max(np.abs(f1 - f2)))

    lhs, interior = fd_derivative(series.times, series.values, fd_order)
    rhs = comm.values + f1
    residual = np.abs(1j * hbar * lhs - rhs[interior])
    res = IdentityResidual("aa_identity", series.times[interior], residual, 0.0)
    return res, f_form_gap


# ---------------------------------------------------------------------------
# momentum relation for the one-sided theory

@dataclass
class MomentumRelationReport:
    sigma: float
    times: np.ndarray
    dql_dt: np.ndarray                 # d<q>^AA/dt (finite difference)
    p_over_meff: np.ndarray            # <p>^AA / m_eff
    fluct_contribution: np.ndarray     # <F(q, H_a)>^AA / (i hbar)
    residual_meff: np.ndarray          # |d<q>/dt - <p>/m_eff|
    residual_complex_m: np.ndarray     # |d<q>/dt - <p>/m|
    decomposition_residual: np.ndarray  # exact identity incl. fluctuation term

    @property
    def max_residual_meff(self) -> float:
        return float(np.max(self.residual_meff))

    @property
    def max_residual_complex_m(self) -> float:
        return float(np.max(self.residual_complex_m))

    @property
    def max_fluct(self) -> float:
        return float(np.max(np.abs(self.fluct_contribution)))


def momentum_relation_AA(model: ParticleModel, times, center: float,
                         momentum: float, sigma: float,
                         fd_order: int = 2) -> MomentumRelationReport:
    """One-sided momentum relation probe with a Gaussian packet of position
    width ``sigma``.

    Reports the exact decomposition d<q>/dt = <p>/m_eff + <F(q, H_a)>/(i hbar)
    together with the residuals of the plain m_eff relation and of the
    (wrong for this theory) complex-m relation.  The fluctuation
    contribution shrinks as the packet's momentum spread narrows, i.e. as
    sigma grows; narrow position packets are the least classical probes here.
    """
    box = model.grid.x_max - model.grid.x_min
    if sigma > 0.25 * box:
        raise PacketTooWide(f"sigma {sigma} exceeds a quarter of the box {box}")
    h = build_particle_hamiltonian(model)
    _, h_a = hermitian_split(h)
    psi0 = gaussian_packet(model.grid, center, momentum, sigma, model.hbar)
    a_traj = trajectory_A(h, psi0, np.asarray(times, dtype=float), model.hbar)

    x_op = build_position_operator(model.grid)
    p_op = build_momentum_operator(model.grid, model.hbar)
    q_series = expect_AA(x_op, a_traj, "position")
    p_series = expect_AA(p_op, a_traj, "momentum")
    fl1, _ = fluctuation_expect(x_op, h_a, a_traj.states)

    m_eff = effective_mass(model.mass)
    dq, interior = fd_derivative(q_series.times, q_series.values, fd_order)
    t_in = q_series.times[interior]
    p_in = p_series.values[interior]
    fluct = (fl1[interior] / (1j * model.hbar))

    res_meff = np.abs(dq - p_in / m_eff)
    res_m = np.abs(dq - p_in / model.mass.value)
    res_decomp = np.abs(dq - p_in / m_eff - fluct)
    return MomentumRelationReport(
        sigma=sigma, times=t_in, dql_dt=dq.real, p_over_meff=(p_in / m_eff).real,
        fluct_contribution=fluct.real, residual_meff=res_meff,
        residual_complex_m=res_m, decomposition_residual=res_decomp)


# ---------------------------------------------------------------------------
# correspondence experiment

@dataclass
class CorrespondenceReport:
    times: np.ndarray
    delta: np.ndarray
    rate: float
    r_squared: float
    expected_rate: float
    im_gap: float
    ba_values: np.ndarray
    qaa_values: np.ndarray

    def to_report(self) -> dict:
        return {"identity_name": "correspondence",
                "max_residual": float(np.max(self.delta)),
                "fit": {"rate": self.rate, "r_squared": self.r_squared},
                "expected_rate": self.expected_rate}


def correspondence_experiment(h, q, o, a0, b_final, t_a: float, t_b: float,
                              t_grid, hbar: float = 1.0,
                              gap_threshold: float = GAP_THRESHOLD) -> CorrespondenceReport:
    """Measure how fast the two-sided value approaches the Q-weighted
    one-sided value as the remaining time to the final boundary grows.

    Fits log |<O>^BA - <O>_Q^AA| against (t_b - t); for a nondegenerate
    spectrum the decay rate matches the gap between the two largest
    imaginary parts divided by hbar.  A spectrum whose imaginary parts are
    all (numerically) equal cannot decay; the fit is still reported with
    expected rate zero.  Raises DegenerateImaginaryParts when the top two
    imaginary parts coincide while others differ.
    """
    h = as_square_matrix(h)
    spec = eigendecompose(h)
    ims = np.sort(spec.eigenvalues.imag)[::-1]
    spread = float(ims[0] - ims[-1])
    gap = float(ims[0] - ims[1]) if len(ims) > 1 else 0.0
    if spread > gap_threshold and gap < gap_threshold:
        raise DegenerateImaginaryParts(
            f"top-two imaginary-part gap {gap:.3e} below threshold")
    expected_rate = gap / hbar if spread > gap_threshold else 0.0

    t_grid = np.asarray(t_grid, dtype=float)
    a_traj = trajectory_under(h, a0, t_grid, t_ref=t_a, hbar=hbar)
    b_traj = trajectory_under(h.conj().T, b_final, t_grid, t_ref=t_b, hbar=hbar)
    ba = expect_BA(o, a_traj, b_traj)
    qaa_num = np.einsum("ti,ij,jk,tk->t", a_traj.states.conj(), q, o, a_traj.states)
    qaa_den = np.einsum("ti,ij,tj->t", a_traj.states.conj(), q, a_traj.states)
    qaa = qaa_num / qaa_den
    delta = np.abs(ba.values - qaa)

    d_axis = t_b - t_grid
    good = delta > 0
    if np.count_nonzero(good) < 3:
        rate, r2 = 0.0, 0.0
    else:
        slope, intercept = np.polyfit(d_axis[good], np.log(delta[good]), 1)
        pred = slope * d_axis[good] + intercept
        logd = np.log(delta[good])
        ss_res = float(np.sum((logd - pred) ** 2))
        ss_tot = float(np.sum((logd - np.mean(logd)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        rate = float(-slope)
    return CorrespondenceReport(times=t_grid, delta=delta, rate=rate, r_squared=r2,
                                expected_rate=expected_rate, im_gap=gap,
                                ba_values=ba.values, qaa_values=qaa)


# ---------------------------------------------------------------------------
# maximization principle

@dataclass
class MaximizeResult:
    a0: np.ndarray
    b_final: np.ndarray
    log_amplitude: float           # log |<B|_Q A>| at the maximum
    eigen_index: int
    degenerate: bool
    degenerate_subspace: np.ndarray | None
    ascent_fidelity_a: float
    ascent_fidelity_b: float
    ascent_log_amplitude: float
    ascent_iterations: int


def q_adjoint(h, q) -> np.ndarray:
    """Adjoint of H in the Q-weighted inner product: Q^{-1} H^dag Q."""
    h = as_square_matrix(h)
    q = as_square_matrix(q)
    return np.linalg.solve(q, h.conj().T @ q)


def maximize_transition(h, t_a: float, t_b: float, q=None, hbar: float = 1.0,
                        seed: int = 0, max_iter: int = 2000,
                        ascent_tol: float = 1e-13,
                        gap_threshold: float = GAP_THRESHOLD,
                        spectral: SpectralData | None = None) -> MaximizeResult:
    """Boundary pair maximizing |<B|_Q A>| over unit-Q-norm states.

    In the Q-orthonormal eigenbasis the transition amplitude is a diagonal
    bilinear form with singular values exp(Im(lambda_j) (t_b - t_a)/hbar),
    so the maximum sits on the eigenstate(s) of largest imaginary part with
    amplitude exp(Im(lambda_max) (t_b - t_a)/hbar).  A projected
    alternating-ascent from a seeded random start cross-checks the closed
    form.  Degenerate leading imaginary parts are returned as a flagged
    subspace.
    """
    h = as_square_matrix(h)
    spec = spectral if spectral is not None else eigendecompose(h)
    if q is None:
        q = spec.q_op if spec.q_op is not None else construct_q(spec)
    basis = q_orthonormal_eigenbasis(spec)
    dt = t_b - t_a
    ims = spec.eigenvalues.imag
    top = int(np.argmax(ims))
    degenerate_mask = ims >= ims[top] - gap_threshold
    degenerate = int(np.count_nonzero(degenerate_mask)) > 1
    a0 = basis[:, top].copy()
    log_amp = float(ims[top] * dt / hbar)

    # ascent on the whitened map S U S^{-1}: alternating optimal-response
    # updates, i.e. projected gradient ascent with exact line step
    evals_q, vecs_q = np.linalg.eigh(q)
    s = vecs_q @ np.diag(np.sqrt(evals_q)) @ vecs_q.conj().T
    s_inv = vecs_q @ np.diag(1.0 / np.sqrt(evals_q)) @ vecs_q.conj().T
    # build U with the overall growth factored out to stay representable
    expo = -1j * spec.eigenvalues * dt / hbar
    shift = float(np.max(expo.real))
    u_scaled = spec.eigvec_matrix @ np.diag(np.exp(expo - shift)) @ np.linalg.inv(
        spec.eigvec_matrix)
    m = s @ u_scaled @ s_inv

    rng = np.random.default_rng(seed)
    x = rng.normal(size=h.shape[0]) + 1j * rng.normal(size=h.shape[0])
    x /= np.linalg.norm(x)
    sigma_prev = 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y = m @ x
        sigma = float(np.linalg.norm(y))
        y /= sigma
        x = m.conj().T @ y
        x /= np.linalg.norm(x)
        if abs(sigma - sigma_prev) <= ascent_tol * max(sigma, 1.0):
            break
        sigma_prev = sigma
    else:
        raise NoConvergence("transition-amplitude ascent failed to converge")
    y = m @ x
    sigma = float(np.linalg.norm(y))
    y /= sigma
    a_ga = s_inv @ x
    b_ga = s_inv @ y

    def q_fidelity(u, v):
        return abs(complex(np.vdot(u, q @ v))) / np.sqrt(
            np.vdot(u, q @ u).real * np.vdot(v, q @ v).real)

    return MaximizeResult(
        a0=a0, b_final=a0.copy(), log_amplitude=log_amp,
        eigen_index=top, degenerate=degenerate,
        degenerate_subspace=basis[:, degenerate_mask] if degenerate else None,
        ascent_fidelity_a=q_fidelity(a_ga, a0),
        ascent_fidelity_b=q_fidelity(b_ga, a0),
        ascent_log_amplitude=float(np.log(sigma) + shift),
        ascent_iterations=iterations)


def maximized_pair_series(h, q, o, result: MaximizeResult, t_a: float, t_b: float,
                          t_grid, hbar: float = 1.0) -> ExpectationSeries:
    """<O>_Q^BA along [t_a, t_b] for the maximizing pair.

    The Q-weighted bra evolves under the Q-adjoint of H so that the
    transition amplitude is conserved; for a Q-Hermitian O the resulting
    series is real.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    a_traj = trajectory_under(h, result.a0, t_grid, t_ref=t_a, hbar=hbar)
    b_traj = trajectory_under(q_adjoint(h, q), result.b_final, t_grid, t_ref=t_b,
                              hbar=hbar)
    return expect_QBA(o, q, a_traj, b_traj)
