"""Particle-model builders, effective-mass algebra and the random ensemble.

Oracles: analytic plane-wave eigenvalues of the discrete Laplacian,
hand-computed effective masses, and closed-form trajectories for the
effective classical equations of motion.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catsim.errors import GridTooCoarse
from catsim.model import (Boundary, ComplexMass, GridSpec, ParticleModel,
                          build_momentum_operator, build_particle_hamiltonian,
                          build_position_operator, build_two_level,
                          effective_lagrangian_residual, effective_mass,
                          gaussian_packet, model_from_config, random_nonnormal,
                          second_difference)


def free_model(n=32, mass=ComplexMass(1.0), half_width=np.pi):
    grid = GridSpec(n, -half_width, half_width, Boundary.PERIODIC)
    zero = lambda x: np.zeros_like(x)
    return ParticleModel(mass=mass, potential_r=zero, potential_i=zero, grid=grid)


class TestGrid:
    def test_periodic_spacing_omits_duplicate_endpoint(self):
        grid = GridSpec(8, 0.0, 8.0, Boundary.PERIODIC)
        assert grid.dx == 1.0
        assert np.allclose(grid.points, np.arange(8.0))

    def test_dirichlet_spacing(self):
        grid = GridSpec(9, 0.0, 8.0, Boundary.DIRICHLET)
        assert grid.dx == 1.0
        assert grid.points[-1] == 8.0

    def test_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            GridSpec(4, 0.0, 1.0)

    def test_mass_positivity(self):
        with pytest.raises(ValueError):
            ComplexMass(-1.0, 0.5)


class TestHamiltonian:
    def test_hermitian_when_real(self):
        h = build_particle_hamiltonian(free_model())
        assert np.allclose(h, h.conj().T)

    def test_non_normal_when_mass_complex(self):
        # a free complex-mass H is a complex multiple of D2, hence still
        # normal; adding any non-constant real potential breaks normality
        grid = GridSpec(16, -4.0, 4.0)
        model = ParticleModel(ComplexMass(1.0, 0.5), lambda x: 0.5 * x**2,
                              lambda x: np.zeros_like(x), grid)
        h = build_particle_hamiltonian(model)
        assert not np.allclose(h @ h.conj().T, h.conj().T @ h)

    def test_free_spectrum_plane_wave_oracle(self):
        # discrete Laplacian eigenvalues: hbar^2 (1 - cos(2 pi j / n)) / (m dx^2)
        model = free_model(n=16)
        h = build_particle_hamiltonian(model)
        dx = model.grid.dx
        expected = (1.0 - np.cos(2.0 * np.pi * np.arange(16) / 16)) / dx**2
        got = np.sort(np.linalg.eigvalsh(h))
        assert np.allclose(got, np.sort(expected), atol=1e-10)

    def test_potential_sits_on_diagonal(self):
        grid = GridSpec(8, -1.0, 1.0)
        model = ParticleModel(ComplexMass(1.0), lambda x: x**2,
                              lambda x: -x, grid)
        h = build_particle_hamiltonian(model)
        x = grid.points
        assert np.allclose(np.diag(h), 1.0 / grid.dx**2 + x**2 - 1j * x)


class TestOperators:
    def test_position_is_diagonal_multiplication(self):
        grid = GridSpec(8, 0.0, 8.0)
        x_op = build_position_operator(grid)
        e3 = np.zeros(8)
        e3[3] = 1.0
        assert np.allclose(x_op @ e3, grid.points[3] * e3)

    def test_momentum_plane_wave_oracle(self):
        # p e^{ikx} = hbar sin(k dx)/dx e^{ikx} for the central difference
        grid = GridSpec(32, 0.0, 2.0 * np.pi)
        p_op = build_momentum_operator(grid)
        k = 3.0  # integer wavenumber fits the periodic box
        psi = np.exp(1j * k * grid.points)
        expected = np.sin(k * grid.dx) / grid.dx
        assert np.allclose(p_op @ psi, expected * psi, atol=1e-12)

    def test_momentum_hermitian_periodic(self):
        p_op = build_momentum_operator(GridSpec(16, -1.0, 1.0))
        assert np.allclose(p_op, p_op.conj().T)

    def test_canonical_commutator_on_interior_packet(self):
        grid = GridSpec(128, -10.0, 10.0)
        x_op = build_position_operator(grid)
        p_op = build_momentum_operator(grid, hbar=1.0)
        psi = gaussian_packet(grid, 0.0, 0.5, 1.0)
        comm = x_op @ p_op - p_op @ x_op
        val = np.vdot(psi, comm @ psi)
        # the central stencil gives i hbar (1 + O(dx^2)) on interior packets
        assert val == pytest.approx(1j, abs=1e-2)


class TestEffectiveMass:
    def test_hand_values(self):
        assert effective_mass(ComplexMass(1.0, 0.0)) == 1.0
        assert effective_mass(ComplexMass(3.0, 4.0)) == pytest.approx(25.0 / 3.0)
        assert effective_mass(ComplexMass(1.0, 0.5)) == pytest.approx(1.25)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=1e-3, max_value=1e3),
           st.floats(min_value=-1e3, max_value=1e3))
    def test_reciprocal_identity_and_bound(self, m_r, m_i):
        m = ComplexMass(m_r, m_i)
        m_eff = effective_mass(m)
        assert m_eff * (1.0 / m.value).real == pytest.approx(1.0, rel=1e-12)
        assert m_eff >= m_r


class TestEffectiveLagrangian:
    def test_harmonic_solution_is_stationary(self):
        # m_eff = 1.25 and k = 1.25 gives omega = 1, so q = cos t solves the
        # effective equations exactly
        grid = GridSpec(32, -10.0, 10.0)
        model = ParticleModel(ComplexMass(1.0, 0.5),
                              lambda x: 0.5 * 1.25 * x**2,
                              lambda x: np.zeros_like(x), grid)
        for t in (0.3, 1.0, 2.5):
            assert abs(effective_lagrangian_residual(model, np.cos, t)) < 1e-5

    def test_wrong_mass_leaves_residual(self):
        grid = GridSpec(32, -10.0, 10.0)
        model = ParticleModel(ComplexMass(2.0, 0.0),
                              lambda x: 0.5 * 1.25 * x**2,
                              lambda x: np.zeros_like(x), grid)
        # m_eff qddot + V' = -2 cos t + 1.25 cos t = -0.75 cos t
        assert effective_lagrangian_residual(model, np.cos, 0.0) == pytest.approx(
            -0.75, abs=1e-4)

    def test_free_linear_motion_is_stationary(self):
        model = free_model()
        # residual is pure finite-difference roundoff, ~eps/dt^2
        assert abs(effective_lagrangian_residual(
            model, lambda t: 0.3 + 2.0 * t, 1.0)) < 1e-4


class TestRandomEnsemble:
    def test_deterministic_in_seed(self):
        assert np.array_equal(random_nonnormal(4, 5), random_nonnormal(4, 5))
        assert not np.array_equal(random_nonnormal(4, 5), random_nonnormal(4, 6))

    def test_entries_within_disk(self):
        h = random_nonnormal(6, 0, spread=2.0)
        assert np.max(np.abs(h)) <= 2.0

    def test_typically_non_normal(self):
        count = sum(
            not np.allclose(h @ h.conj().T, h.conj().T @ h)
            for h in (random_nonnormal(4, s) for s in range(10)))
        assert count == 10

    def test_two_level(self):
        h = build_two_level(1.0, 2j, 0.0, -1.0)
        assert h.tolist() == [[1.0, 2j], [0.0, -1.0]]


class TestGaussianPacket:
    def test_unit_norm(self):
        psi = gaussian_packet(GridSpec(64, -8.0, 8.0), 0.0, 1.0, 1.0)
        assert np.linalg.norm(psi) == pytest.approx(1.0)

    def test_centered_moments(self):
        grid = GridSpec(256, -20.0, 20.0)
        psi = gaussian_packet(grid, 1.5, 0.7, 1.0)
        x_op = build_position_operator(grid)
        p_op = build_momentum_operator(grid)
        assert np.vdot(psi, x_op @ psi).real == pytest.approx(1.5, abs=1e-8)
        assert np.vdot(psi, p_op @ psi).real == pytest.approx(0.7, rel=1e-2)


class TestModelConfig:
    def test_harmonic_round_trip(self):
        model = model_from_config({
            "mass": {"re": 1.0, "im": 0.5},
            "potential": {"kind": "harmonic", "k": 2.0, "k_imag": -0.5},
            "grid": {"n_points": 16, "x_min": -4.0, "x_max": 4.0},
        })
        assert model.mass.value == 1.0 + 0.5j
        x = np.array([2.0])
        assert model.potential_r(x)[0] == pytest.approx(4.0)
        assert model.potential_i(x)[0] == pytest.approx(-1.0)

    def test_tabulated_potential_interpolates(self):
        model = model_from_config({
            "mass": {"re": 1.0},
            "potential": {"kind": "table",
                          "samples": [[-1.0, 0.0, 1.0], [1.0, 2.0, -1.0]]},
            "grid": {"n_points": 8, "x_min": -1.0, "x_max": 1.0},
        })
        x = np.array([0.0])
        assert model.potential_r(x)[0] == pytest.approx(1.0)
        assert model.potential_i(x)[0] == pytest.approx(0.0)
