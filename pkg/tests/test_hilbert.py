"""Operator kernel tests against explicit Kronecker-product oracles."""

import numpy as np
import pytest

from spinbath import (
    BathHamiltonianAction,
    HamiltonianAction,
    SpinBathModel,
    apply_bath_hamiltonian,
    apply_hamiltonian,
    apply_interaction,
    apply_sigma_x,
    apply_sigma_z,
    apply_total_sigma_x,
    parity,
)
from spinbath.hilbert import (
    apply_bath_hamiltonian_embedded,
    apply_central_hamiltonian,
    parity_mask,
)

from conftest import (
    dense_bath_hamiltonian,
    dense_full_hamiltonian,
    dense_interaction,
    dense_total_sigma_x,
    random_model,
    random_state,
)


class TestSigmaX:
    def test_flip_central_bit(self):
        psi = np.zeros(8)
        psi[0] = 1.0
        out = apply_sigma_x(psi, 0)
        assert out[1] == 1.0 and np.count_nonzero(out) == 1

    def test_involution_exact(self, rng):
        psi = random_state(rng, 32)
        for site in range(5):
            twice = apply_sigma_x(apply_sigma_x(psi, site), site)
            assert np.array_equal(twice, psi)

    def test_bit1_swaps_index_pairs(self):
        psi = np.array([1.0, 2.0, 3.0, 4.0])
        out = apply_sigma_x(psi, 1)
        assert np.array_equal(out, [3.0, 4.0, 1.0, 2.0])

    def test_site_out_of_range(self, rng):
        with pytest.raises(IndexError):
            apply_sigma_x(random_state(rng, 8), 3)

    def test_commutes_across_sites_exactly(self, rng):
        psi = random_state(rng, 64)
        for i, j in [(0, 3), (2, 5), (1, 4)]:
            ij = apply_sigma_x(apply_sigma_x(psi, j), i)
            ji = apply_sigma_x(apply_sigma_x(psi, i), j)
            assert np.array_equal(ij, ji)


class TestSigmaZ:
    def test_up_state_plus(self):
        psi = np.array([0.0, 1.0])  # |1>_0
        assert np.array_equal(apply_sigma_z(psi, 0), psi)

    def test_down_state_minus(self):
        psi = np.array([1.0, 0.0])  # |0>_0
        assert np.array_equal(apply_sigma_z(psi, 0), -psi)

    def test_involution_exact(self, rng):
        psi = random_state(rng, 16)
        for site in range(4):
            assert np.array_equal(apply_sigma_z(apply_sigma_z(psi, site), site), psi)

    def test_anticommutes_with_sigma_x_same_site(self, rng):
        psi = random_state(rng, 32)
        for site in range(5):
            xz = apply_sigma_x(apply_sigma_z(psi, site), site)
            zx = apply_sigma_z(apply_sigma_x(psi, site), site)
            assert np.array_equal(xz, -zx)

    def test_site_out_of_range(self, rng):
        with pytest.raises(IndexError):
            apply_sigma_z(random_state(rng, 8), 5)


class TestParity:
    def test_values(self):
        assert parity(0) == 0
        assert parity(3) == 0
        assert parity(7) == 1

    def test_two_bit_flip_preserves_parity(self):
        for k in [0, 5, 12, 255, 1023]:
            for i, j in [(0, 1), (2, 7), (3, 4)]:
                assert parity(k ^ (1 << i) ^ (1 << j)) == parity(k)

    def test_mask_matches_scalar(self):
        mask = parity_mask(64)
        assert all(bool(mask[k]) == bool(parity(k)) for k in range(64))


class TestTotalSigmaX:
    def test_two_bath_spins_from_vacuum(self):
        # full space N=2: |00> on bath bits 1,2 -> |01> + |10>
        psi = np.zeros(8)
        psi[0] = 1.0
        out = apply_total_sigma_x(psi)
        expect = np.zeros(8)
        expect[0b010] = 1.0
        expect[0b100] = 1.0
        assert np.array_equal(out, expect)

    def test_aligned_plus_state_is_eigenstate(self):
        n = 4
        phi = np.ones(1 << n) / np.sqrt(1 << n)  # all spins along +x
        out = apply_total_sigma_x(phi, bath_only=True)
        assert np.allclose(out, n * phi, atol=1e-14)

    def test_expectation_matches_dense_oracle(self, rng):
        n_bath = 3
        phi = random_state(rng, 1 << n_bath)
        sx = dense_total_sigma_x(n_bath, range(n_bath))
        want = np.vdot(phi, sx @ phi)
        got = np.vdot(phi, apply_total_sigma_x(phi, bath_only=True))
        assert abs(want - got) < 1e-13


class TestBathHamiltonian:
    def test_diagonal_term_only(self):
        model = SpinBathModel(n_bath=2, beta=0.0, lam=0.0, omegas=(0.3, 0.9))
        phi = np.zeros(4)
        phi[0b11] = 1.0
        out = apply_bath_hamiltonian(model, phi)
        assert np.allclose(out, 0.5 * (0.3 + 0.9) * phi, atol=1e-15)

    def test_lambda_flips_both_bits(self):
        model = SpinBathModel(n_bath=2, beta=0.0, lam=0.7, omegas=(0.3, 0.9))
        phi = np.zeros(4)
        phi[0b00] = 1.0
        out = apply_bath_hamiltonian(model, phi)
        assert out[0b11] == pytest.approx(0.7, abs=1e-15)
        assert out[0b00] == pytest.approx(-0.6, abs=1e-15)  # diagonal part

    def test_matches_dense_oracle(self, rng):
        model = random_model(rng, 3)
        h = dense_bath_hamiltonian(model)
        for _ in range(20):
            phi = random_state(rng, 8)
            assert np.abs(apply_bath_hamiltonian(model, phi) - h @ phi).max() < 1e-12

    def test_dimension_mismatch(self, rng):
        model = random_model(rng, 3)
        with pytest.raises(ValueError):
            apply_bath_hamiltonian(model, random_state(rng, 16))


class TestFullHamiltonian:
    def test_diagonal_z_terms_only(self):
        model = SpinBathModel(n_bath=1, omega0=0.8288, beta=0.0, lambda0=0.0,
                              lam=0.0, omegas=(0.4,))
        psi = np.zeros(4)
        psi[0b11] = 1.0  # bath spin up, central spin up
        out = apply_hamiltonian(model, psi)
        assert np.allclose(out, 0.5 * (0.4 + 0.8288) * psi, atol=1e-15)

    def test_matches_dense_oracle(self, rng):
        for n_bath in (2, 3):
            model = random_model(rng, n_bath)
            h = dense_full_hamiltonian(model)
            for _ in range(20):
                psi = random_state(rng, model.dim)
                assert np.abs(apply_hamiltonian(model, psi) - h @ psi).max() < 1e-12

    def test_hermiticity(self, rng):
        model = random_model(rng, 3)
        for _ in range(10):
            psi = random_state(rng, model.dim)
            phi = random_state(rng, model.dim)
            lhs = np.vdot(phi, apply_hamiltonian(model, psi))
            rhs = np.conj(np.vdot(psi, apply_hamiltonian(model, phi)))
            assert abs(lhs - rhs) < 1e-12

    def test_term_decomposition(self, rng):
        model = random_model(rng, 3)
        psi = random_state(rng, model.dim)
        total = apply_hamiltonian(model, psi)
        parts = (apply_central_hamiltonian(model, psi)
                 + apply_bath_hamiltonian_embedded(model, psi)
                 + apply_interaction(model, psi))
        assert np.abs(total - parts).max() < 1e-15

    def test_linearity(self, rng):
        model = random_model(rng, 3)
        psi = random_state(rng, model.dim)
        phi = random_state(rng, model.dim)
        a, b = 0.3 - 1.1j, -0.4 + 0.2j
        lhs = apply_hamiltonian(model, a * psi + b * phi)
        rhs = a * apply_hamiltonian(model, psi) + b * apply_hamiltonian(model, phi)
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() < 1e-13 * scale

    def test_beta_zero_preserves_even_parity_support(self, rng):
        model = random_model(rng, 4, beta=0.0)
        odd = parity_mask(model.dim)
        psi = rng.standard_normal(model.dim) + 1j * rng.standard_normal(model.dim)
        psi[odd] = 0.0
        psi /= np.linalg.norm(psi)
        out = apply_hamiltonian(model, psi)
        assert np.abs(out[odd]).max() == 0.0

    def test_interaction_matches_dense_oracle(self, rng):
        model = random_model(rng, 3)
        h = dense_interaction(model)
        psi = random_state(rng, model.dim)
        assert np.abs(apply_interaction(model, psi) - h @ psi).max() < 1e-12

    def test_accumulate_form(self, rng):
        model = random_model(rng, 2)
        psi = random_state(rng, model.dim)
        acc = np.zeros_like(psi)
        ret = apply_hamiltonian(model, psi, out=acc)
        assert ret is acc
        assert np.abs(acc - apply_hamiltonian(model, psi)).max() < 1e-15


class TestFusedActions:
    def test_full_action_matches_pair_loop(self, rng):
        for n_bath in (2, 3, 5):
            model = random_model(rng, n_bath, lam=rng.uniform(-10, 10))
            action = HamiltonianAction(model)
            for _ in range(5):
                psi = random_state(rng, model.dim)
                ref = apply_hamiltonian(model, psi)
                scale = np.abs(ref).max()
                assert np.abs(action(psi) - ref).max() < 1e-13 * scale

    def test_bath_action_matches_pair_loop(self, rng):
        model = random_model(rng, 4, lam=7.5)
        action = BathHamiltonianAction(model)
        for _ in range(5):
            phi = random_state(rng, model.bath_dim)
            ref = apply_bath_hamiltonian(model, phi)
            scale = np.abs(ref).max()
            assert np.abs(action(phi) - ref).max() < 1e-13 * scale

    def test_expectation(self, rng):
        model = random_model(rng, 3)
        action = HamiltonianAction(model)
        psi = random_state(rng, model.dim)
        h = dense_full_hamiltonian(model)
        assert action.expectation(psi) == pytest.approx(
            float(np.real(np.vdot(psi, h @ psi))), abs=1e-12
        )


class TestModel:
    def test_frequency_count_enforced(self):
        with pytest.raises(ValueError):
            SpinBathModel(n_bath=3, omegas=(0.5, 0.5))

    def test_frequency_range_enforced(self):
        with pytest.raises(ValueError):
            SpinBathModel(n_bath=1, omegas=(1.5,))
        with pytest.raises(ValueError):
            SpinBathModel(n_bath=1, omegas=(-0.1,))

    def test_immutable(self):
        model = SpinBathModel(n_bath=1, omegas=(0.5,))
        with pytest.raises(Exception):
            model.lam = 3.0
