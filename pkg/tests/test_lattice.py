import math

import numpy as np
import pytest
from pydantic import ValidationError

from rydbergscan.errors import ConfigurationError, ContractViolation, DomainError
from rydbergscan.lattice import (
    BasisState,
    HamiltonianMatrix,
    LatticeParams,
    build_full_hamiltonian,
    build_h0,
    build_hprime,
    collective_rabi,
    enumerate_basis,
    excitation_numbers,
    n_e,
    n_ee,
    reflection_permutation,
    unperturbed_energy,
)


def count_by_site_loop(bits: int, n_sites: int):
    """Reference counts, one site at a time."""
    occupations = [(bits >> site) & 1 for site in range(n_sites)]
    pairs = sum(occupations[site] * occupations[site + 1] for site in range(n_sites - 1))
    return sum(occupations), pairs


def long_range_tail(bits: int, n_sites: int, interaction: float, exponent: int) -> float:
    occupations = [(bits >> site) & 1 for site in range(n_sites)]
    return sum(
        interaction * occupations[k] * occupations[l] / (l - k) ** exponent
        for k in range(n_sites)
        for l in range(k + 2, n_sites)
    )


class TestBasis:
    def test_enumerate_basis_single_site(self):
        assert [state.bits for state in enumerate_basis(1)] == [0b0, 0b1]

    def test_enumerate_basis_index_equals_bits(self):
        basis = enumerate_basis(3)

        assert len(basis) == 8
        assert basis[5].bits == 0b101
        assert basis[5].label() == "ege"
        assert all(index == state.bits for index, state in enumerate(basis))

    def test_enumerate_basis_eight_sites(self):
        assert len(enumerate_basis(8)) == 256

    @pytest.mark.parametrize("n_sites", [0, 25, -1])
    def test_enumerate_basis_rejects_out_of_range(self, n_sites):
        with pytest.raises(ConfigurationError):
            enumerate_basis(n_sites)

    def test_basis_state_rejects_bits_beyond_chain(self):
        with pytest.raises(ContractViolation):
            BasisState(bits=0b1000, n_sites=3)

    def test_label_round_trip_puts_site_zero_first(self):
        state = BasisState.from_label("geegeeg")

        assert state.bits == 0b0110110
        assert state.label() == "geegeeg"
        assert str(state) == "|geegeeg>"

    def test_from_label_rejects_other_letters(self):
        with pytest.raises(ContractViolation):
            BasisState.from_label("gxe")

    def test_reflected(self):
        assert BasisState.from_label("eeg").reflected() == BasisState.from_label("gee")


class TestExcitationNumbers:
    @pytest.mark.parametrize(
        "bits, expected",
        [(0b000, 0), (0b0110110, 4), (0b1111, 4)],
    )
    def test_n_e(self, bits, expected):
        assert n_e(bits) == expected

    @pytest.mark.parametrize(
        "bits, expected",
        [(0b0110110, 2), (0b111, 2), (0b101, 0)],
    )
    def test_n_ee(self, bits, expected):
        assert n_ee(bits) == expected

    def test_negative_index_is_rejected(self):
        with pytest.raises(ContractViolation):
            n_e(-1)

    @pytest.mark.parametrize("n_sites", [1, 2, 5, 8, 12])
    def test_counts_agree_with_site_loop(self, n_sites):
        excitations, pairs = excitation_numbers(n_sites)

        for state in enumerate_basis(n_sites):
            expected = count_by_site_loop(state.bits, n_sites)
            assert (state.n_e, state.n_ee) == expected
            assert (excitations[state.bits], pairs[state.bits]) == expected

    def test_cached_arrays_are_read_only(self):
        excitations, _ = excitation_numbers(4)

        with pytest.raises(ValueError):
            excitations[0] = 3


class TestUnperturbedEnergy:
    def test_ground_state(self):
        assert unperturbed_energy(0b000, detuning=0.7, interaction=1.0, n_sites=3) == pytest.approx(-3 * 0.7 / 2)

    def test_kappa_two_degeneracy(self):
        interaction = 1.0
        detuning = -interaction / 2
        excited_pair = BasisState.from_label("eeg")

        energy = unperturbed_energy(excited_pair, detuning, interaction, n_sites=3)

        assert energy == pytest.approx(3 * interaction / 4)
        assert energy == pytest.approx(unperturbed_energy(0, detuning, interaction, n_sites=3))

    def test_seven_site_state(self):
        detuning, interaction = -0.3, 1.0
        state = BasisState.from_label("geegeeg")

        assert unperturbed_energy(state, detuning, interaction, n_sites=7) == pytest.approx(
            detuning / 2 + 2 * interaction
        )


class TestCollectiveRabi:
    @pytest.mark.parametrize(
        "single_atom, filling, expected",
        [(0.3, 1, 0.3), (0.3, 4, 0.6), (0.1, 2, 0.1 * math.sqrt(2))],
    )
    def test_collective_rabi(self, single_atom, filling, expected):
        assert collective_rabi(single_atom, filling) == pytest.approx(expected)

    def test_empty_site_is_a_domain_error(self):
        with pytest.raises(DomainError):
            collective_rabi(0.3, 0)


class TestLatticeParams:
    def test_defaults(self):
        params = LatticeParams(n_sites=3, rabi=0.1)

        assert params.interaction == 1.0
        assert params.exponent == 6
        assert params.dimension == 8

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_sites=0, rabi=0.1),
            dict(n_sites=3, rabi=0.1, interaction=0.0),
            dict(n_sites=3, rabi=0.1, interaction=-1.0),
            dict(n_sites=3, rabi=0.1, exponent=0),
        ],
    )
    def test_invalid_params_are_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            LatticeParams(**kwargs)

    def test_params_are_frozen(self):
        params = LatticeParams(n_sites=3, rabi=0.1)

        with pytest.raises(ValidationError):
            params.rabi = 0.2

    def test_with_detuning_returns_a_copy(self):
        params = LatticeParams(n_sites=3, rabi=0.1)

        shifted = params.with_detuning(-0.5)

        assert shifted.detuning == -0.5
        assert params.detuning == 0.0


class TestBuildHamiltonian:
    def test_single_site(self):
        rabi, detuning = 0.3, -0.2
        hamiltonian = build_full_hamiltonian(LatticeParams(n_sites=1, rabi=rabi, detuning=detuning))

        expected = [[-detuning / 2, rabi / 2], [rabi / 2, detuning / 2]]
        np.testing.assert_allclose(hamiltonian.entries, expected)

    def test_two_site_diagonal(self):
        detuning, interaction = -0.4, 1.3
        hamiltonian = build_full_hamiltonian(
            LatticeParams(n_sites=2, rabi=0.2, detuning=detuning, interaction=interaction)
        )

        assert hamiltonian.entry(0b11, 0b11) == pytest.approx(detuning + interaction)
        assert hamiltonian.entry(0b00, 0b00) == pytest.approx(-detuning)

    def test_three_site_next_nearest_neighbors(self):
        detuning, interaction = 0.3, 1.0
        params = LatticeParams(n_sites=3, rabi=0.2, detuning=detuning, interaction=interaction)

        assert build_full_hamiltonian(params).entry(0b101, 0b101) == pytest.approx(
            detuning / 2 + interaction / 2**6
        )
        assert build_hprime(params).entry(0b101, 0b101) == pytest.approx(interaction / 2**6)

    def test_hprime_off_diagonals_are_half_rabi(self):
        params = LatticeParams(n_sites=3, rabi=0.24, detuning=0.3)

        hprime = build_hprime(params)

        assert hprime.entry(0b000, 0b001) == pytest.approx(0.12)
        assert hprime.entry(0b101, 0b111) == pytest.approx(0.12)
        assert hprime.entry(0b000, 0b011) == 0.0

    @pytest.mark.parametrize("n_sites", [1, 2, 3, 5, 8])
    def test_full_hamiltonian_is_hermitian(self, n_sites):
        params = LatticeParams(n_sites=n_sites, rabi=0.17, detuning=-0.61, interaction=1.4)

        hamiltonian = build_full_hamiltonian(params)

        assert hamiltonian.is_hermitian()
        np.testing.assert_array_equal(hamiltonian.entries, hamiltonian.entries.T)

    @pytest.mark.parametrize("n_sites", [1, 4, 8])
    def test_h0_is_diagonal(self, n_sites):
        params = LatticeParams(n_sites=n_sites, rabi=0.5, detuning=-0.3)

        assert build_h0(params).is_diagonal()

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_split_is_exact(self, seed):
        rng = np.random.default_rng(seed)
        params = LatticeParams(
            n_sites=8,
            rabi=rng.uniform(0.01, 1.0),
            detuning=rng.uniform(-1.5, 0.5),
            interaction=rng.uniform(0.5, 2.0),
        )

        split = build_h0(params) + build_hprime(params)

        assert split.max_abs_difference(build_full_hamiltonian(params)) == 0.0

    @pytest.mark.parametrize("exponent", [6, 8])
    def test_diagonal_matches_closed_form(self, exponent):
        n_sites, detuning, interaction = 8, -0.45, 1.2
        params = LatticeParams(
            n_sites=n_sites, rabi=0.15, detuning=detuning, interaction=interaction, exponent=exponent
        )
        h0_diagonal = build_h0(params).diagonal
        full_diagonal = build_full_hamiltonian(params).diagonal

        for state in enumerate_basis(n_sites):
            energy = unperturbed_energy(state, detuning, interaction, n_sites)
            tail = long_range_tail(state.bits, n_sites, interaction, exponent)
            assert h0_diagonal[state.bits] == pytest.approx(energy, abs=1e-12)
            assert full_diagonal[state.bits] == pytest.approx(energy + tail, abs=1e-12)

    def test_coupling_only_between_single_flips(self):
        rabi = 0.37
        hamiltonian = build_full_hamiltonian(LatticeParams(n_sites=5, rabi=rabi, detuning=0.2))

        for row in range(hamiltonian.dimension):
            for column in range(hamiltonian.dimension):
                if row == column:
                    continue
                expected = rabi / 2 if (row ^ column).bit_count() == 1 else 0.0
                assert hamiltonian.entries[row, column] == expected

    def test_commutes_with_site_reversal(self):
        hamiltonian = build_full_hamiltonian(LatticeParams(n_sites=6, rabi=0.2, detuning=-0.55))
        permutation = reflection_permutation(6)

        reflected = hamiltonian.entries[np.ix_(permutation, permutation)]

        np.testing.assert_array_equal(reflected, hamiltonian.entries)

    def test_sparse_view_has_the_same_entries(self):
        hamiltonian = build_full_hamiltonian(LatticeParams(n_sites=4, rabi=0.2, detuning=-0.5))

        np.testing.assert_array_equal(hamiltonian.to_sparse().toarray(), hamiltonian.entries)

    def test_matrix_shape_is_checked(self):
        with pytest.raises(ContractViolation):
            HamiltonianMatrix(n_sites=2, entries=np.zeros((3, 3)))

    def test_complex_entries_are_rejected(self):
        with pytest.raises(ContractViolation, match="real"):
            HamiltonianMatrix(n_sites=1, entries=np.array([[0, 1j], [1j, 0]]))

    def test_complex_dtype_with_real_values_is_accepted(self):
        hamiltonian = HamiltonianMatrix(n_sites=1, entries=np.array([[0, 1], [1, 0]], dtype=complex))

        assert hamiltonian.entries.dtype == np.float64
        np.testing.assert_array_equal(hamiltonian.entries, [[0.0, 1.0], [1.0, 0.0]])

    def test_matrix_entries_are_read_only(self):
        hamiltonian = build_h0(LatticeParams(n_sites=2, rabi=0.1))

        with pytest.raises(ValueError):
            hamiltonian.entries[0, 0] = 1.0
