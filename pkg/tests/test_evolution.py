"""Forward / backward / normalized propagation.

Oracles: scalar and diagonal closed forms, the conserved two-sided overlap,
and step-halving Richardson ratios for the RK4 stepper.
"""

import numpy as np
import pytest

from catsim.errors import DimensionMismatch, StepTooLarge
from catsim.evolution import (StateLabel, StateVector, Stepper, fidelity,
                              propagate_A, propagate_A_normalized, propagate_B,
                              trajectory_A, trajectory_B, trajectory_under)
from catsim.model import random_nonnormal

from conftest import random_state


def sv(psi, t=0.0):
    return StateVector(np.asarray(psi, dtype=complex), t)


class TestExactPropagation:
    def test_zero_hamiltonian_is_identity(self, rng):
        psi = random_state(rng, 3)
        out = propagate_A(np.zeros((3, 3)), sv(psi), 0.0, 5.0)
        assert np.allclose(out.amplitudes, psi)
        assert out.time == 5.0

    def test_diagonal_phase_oracle(self):
        h = np.diag([1.0, 2.0])
        out = propagate_A(h, sv([1.0, 1.0]), 0.0, 0.7)
        assert np.allclose(out.amplitudes,
                           [np.exp(-0.7j), np.exp(-1.4j)])

    def test_scalar_growth_oracle(self):
        # H = i: |A(t)> = e^{t} |A(0)> -- but eigendecompose needs dim >= 1;
        # use diag(i, -i) and the first component
        h = np.diag([1j, -1j])
        out = propagate_A(h, sv([1.0, 1.0]), 0.0, 2.0)
        assert out.amplitudes[0] == pytest.approx(np.exp(2.0))
        assert out.amplitudes[1] == pytest.approx(np.exp(-2.0))

    def test_hbar_scaling(self):
        h = np.diag([1.0, -1.0])
        out = propagate_A(h, sv([1.0, 0.0]), 0.0, 1.0, hbar=0.5)
        assert out.amplitudes[0] == pytest.approx(np.exp(-2.0j))

    def test_semigroup_property(self, rng):
        h = random_nonnormal(4, 11)
        psi = random_state(rng, 4)
        one_hop = propagate_A(h, sv(psi), 0.0, 1.3)
        two_hop = propagate_A(h, propagate_A(h, sv(psi), 0.0, 0.5), 0.5, 1.3)
        assert np.allclose(one_hop.amplitudes, two_hop.amplitudes, atol=1e-9)

    def test_backward_before_forward_is_identity(self, rng):
        h = random_nonnormal(3, 2)
        psi = random_state(rng, 3)
        fwd = trajectory_under(h, psi, [0.0, 1.0]).states[-1]
        back = trajectory_under(h, fwd, [0.0, 1.0], t_ref=1.0).states[0]
        assert np.allclose(back, psi, atol=1e-10)

    def test_overflow_guard_rescales(self):
        h = np.diag([500j, -500j])
        out = propagate_A(h, sv([1.0, 1.0]), 0.0, 1.0)
        assert np.isfinite(out.amplitudes).all()
        assert out.log_scale == pytest.approx(500.0)
        # guard leaves moderate growth untouched
        tame = propagate_A(np.diag([1j, -1j]), sv([1.0, 0.0]), 0.0, 1.0)
        assert tame.log_scale == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            propagate_A(np.eye(3), sv([1.0, 0.0]), 0.0, 1.0)

    def test_backward_time_rejected_for_A(self):
        with pytest.raises(ValueError):
            propagate_A(np.eye(2), sv([1.0, 0.0]), 1.0, 0.0)


class TestBackwardState:
    def test_matches_forward_for_hermitian(self, rng):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = 0.5 * (g + g.conj().T)
        psi = random_state(rng, 3)
        a = propagate_A(h, sv(psi), 0.0, 1.1)
        b = propagate_B(h, sv(psi), 0.0, 1.1)
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-10)

    def test_decay_oracle(self):
        # H = diag(i, -i): B evolves under H^dag = diag(-i, i)
        out = propagate_B(np.diag([1j, -1j]), sv([1.0, 1.0]), 0.0, 2.0)
        assert out.amplitudes[0] == pytest.approx(np.exp(-2.0))
        assert out.amplitudes[1] == pytest.approx(np.exp(2.0))

    def test_two_sided_overlap_conserved(self, rng):
        # d/dt <B(t)|A(t)> = 0 for any complex H
        h = random_nonnormal(5, 3)
        times = np.linspace(0.0, 4.0, 40)
        a = trajectory_A(h, random_state(rng, 5), times)
        b = trajectory_B(h, random_state(rng, 5), times, t_final=4.0)
        overlap = np.einsum("ti,ti->t", b.states.conj(), a.states)
        assert np.max(np.abs(overlap - overlap[0])) <= 1e-10 * abs(overlap[0])

    def test_final_condition_attached_at_t_final(self, rng):
        h = random_nonnormal(3, 8)
        psi = random_state(rng, 3)
        traj = trajectory_B(h, psi, np.linspace(0.0, 2.0, 5), t_final=2.0)
        assert np.allclose(traj.states[-1], psi, atol=1e-12)
        assert traj.label is StateLabel.B


class TestRK4:
    def test_fourth_order_convergence(self, rng):
        h = random_nonnormal(4, 4)
        psi = random_state(rng, 4)
        exact = propagate_A(h, sv(psi), 0.0, 1.0).amplitudes
        errs = []
        for step in (0.02, 0.01):
            out = propagate_A(h, sv(psi), 0.0, 1.0, method=Stepper.RK4,
                              step=step)
            errs.append(np.linalg.norm(out.amplitudes - exact))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_step_too_large_raises(self):
        with pytest.raises(StepTooLarge):
            propagate_A(np.diag([200.0, -200.0]), sv([1.0, 1.0]), 0.0, 1.0,
                        method=Stepper.RK4, step=0.5)


class TestNormalizedEvolution:
    def test_reduces_to_unitary_for_hermitian(self, rng):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = 0.5 * (g + g.conj().T)
        psi = random_state(rng, 3)
        traj = propagate_A_normalized(h, psi, 0.0, 2.0, 1e-3)
        exact = propagate_A(h, sv(psi), 0.0, 2.0).amplitudes
        assert fidelity(traj.states[-1], exact) >= 1.0 - 1e-10

    def test_norm_preserved(self, rng):
        h = random_nonnormal(4, 9)
        psi = random_state(rng, 4)
        traj = propagate_A_normalized(h, psi, 0.0, 5.0, 5e-4)
        assert np.max(np.abs(traj.norms() - 1.0)) <= 1e-6

    def test_matches_normalized_exact_evolution(self):
        h = np.diag([1j, -1j])
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        traj = propagate_A_normalized(h, psi, 0.0, 3.0, 1e-3)
        exact = propagate_A(h, sv(psi), 0.0, 3.0).amplitudes
        assert fidelity(traj.states[-1], exact) >= 1.0 - 1e-8

    def test_attractor_is_top_growth_eigenstate(self):
        h = np.diag([1j, -1j])
        psi = np.array([1.0, 1.0]) / np.sqrt(2)
        traj = propagate_A_normalized(h, psi, 0.0, 20.0, 2e-3)
        assert fidelity(traj.states[-1], np.array([1.0, 0.0])) >= 1.0 - 1e-6

    def test_requires_unit_norm_start(self):
        with pytest.raises(ValueError):
            propagate_A_normalized(np.eye(2), np.array([2.0, 0.0]), 0.0, 1.0,
                                   1e-2)


class TestTrajectoryCsv:
    def test_deterministic_and_headed(self, rng):
        h = random_nonnormal(2, 12)
        psi = random_state(rng, 2)
        times = np.linspace(0.0, 1.0, 6)
        csv1 = trajectory_A(h, psi, times).to_csv(("hdr",))
        csv2 = trajectory_A(h, psi, times).to_csv(("hdr",))
        assert csv1 == csv2
        lines = csv1.splitlines()
        assert lines[0] == "# hdr"
        assert lines[1] == "time,re_0,im_0,re_1,im_1,norm,log_scale"
        assert len(lines) == 2 + 6
        assert csv1.endswith("\n") and "\r" not in csv1
