import math

import numpy as np
import pytest

from rydbergscan.errors import ConfigurationError, DomainError
from rydbergscan.lattice import BasisState, LatticeParams, build_full_hamiltonian
from rydbergscan.spectrum import (
    degeneracy_classes,
    default_ratio_grid,
    ground_state_crossings,
    kappa_of_class,
    level_of,
    ratio_identity,
    resonance_detuning,
    scan_spectrum,
)


def blockaded_count(n_sites: int) -> int:
    """Configurations without neighboring excitations: choose k of the N - k + 1 gaps."""
    return sum(math.comb(n_sites - k + 1, k) for k in range(n_sites // 2 + 2))


GROUND = BasisState(bits=0, n_sites=8)


class TestResonanceDetuning:
    @pytest.mark.parametrize(
        "kappa, expected",
        [(2, -0.5), (3, -2 / 3), (4, -0.75), (math.inf, -1.0)],
    )
    def test_resonance_detuning(self, kappa, expected):
        assert resonance_detuning(kappa, 1.0) == pytest.approx(expected)

    def test_scales_with_interaction(self):
        assert resonance_detuning(2, 3.0) == pytest.approx(-1.5)

    @pytest.mark.parametrize("kappa", [1, 0, -3])
    def test_kappa_below_two_is_a_domain_error(self, kappa):
        with pytest.raises(DomainError):
            resonance_detuning(kappa)

    @pytest.mark.parametrize("kappa", range(2, 11))
    def test_ratio_identity(self, kappa):
        ratio = resonance_detuning(kappa) / resonance_detuning(kappa + 1)

        assert ratio == pytest.approx(1 - kappa**-2, rel=1e-14)
        assert ratio_identity(kappa) == pytest.approx(ratio, rel=1e-14)


class TestKappaOfClass:
    @pytest.mark.parametrize(
        "n_e, n_ee, expected",
        [
            (2, 1, 2),
            (4, 2, 2),
            (3, 2, 3),
            (4, 3, 4),
            (3, 1, None),
            (0, 0, None),
            (2, 2, None),
            (1, 0, None),
        ],
    )
    def test_kappa_of_class(self, n_e, n_ee, expected):
        assert kappa_of_class(n_e, n_ee) == expected


class TestDegeneracyClasses:
    def test_kappa_two_level_of_ground_state(self):
        levels = degeneracy_classes(8, detuning=-0.5, interaction=1.0)

        level = level_of(levels, GROUND)

        assert {(cls.n_e, cls.n_ee) for cls in level.classes} == {(0, 0), (2, 1), (4, 2), (6, 3)}
        pairs = [cls for cls in level.classes if cls.n_e == 2]
        assert len(pairs) == 1
        assert pairs[0].size == 7
        assert {state.bits for state in pairs[0].members} == {0b11 << site for site in range(7)}

    def test_every_member_of_a_resonant_level_has_the_kappa_ratio(self):
        for kappa in (2, 3, 4):
            levels = degeneracy_classes(8, detuning=resonance_detuning(kappa), interaction=1.0)

            for state in level_of(levels, GROUND).members:
                if state.n_e:
                    assert state.n_ee * kappa == state.n_e * (kappa - 1)

    def test_zero_detuning_level_is_the_blockaded_states(self):
        levels = degeneracy_classes(8, detuning=0.0, interaction=1.0)

        level = level_of(levels, GROUND)

        assert all(state.n_ee == 0 for state in level.members)
        assert level.size == blockaded_count(8) == 55

    def test_irrational_detuning_leaves_the_ground_state_alone(self):
        levels = degeneracy_classes(8, detuning=-1 / math.sqrt(2), interaction=1.0)

        level = level_of(levels, GROUND)

        assert level.members == [GROUND]

    @pytest.mark.parametrize("n_sites, detuning", [(5, -0.5), (8, -2 / 3), (8, 0.0), (10, -0.3)])
    def test_classes_partition_the_basis(self, n_sites, detuning):
        levels = degeneracy_classes(n_sites, detuning=detuning, interaction=1.0)

        members = [state.bits for level in levels for state in level.members]
        assert sorted(members) == list(range(2**n_sites))
        for level in levels:
            for cls in level.classes:
                assert all((state.n_e, state.n_ee) == (cls.n_e, cls.n_ee) for state in cls.members)

    def test_levels_are_sorted_by_energy(self):
        levels = degeneracy_classes(6, detuning=-0.2, interaction=1.0)

        energies = [level.energy for level in levels]
        assert energies == sorted(energies)

    def test_too_many_sites(self):
        with pytest.raises(ConfigurationError):
            degeneracy_classes(17, detuning=0.0, interaction=1.0)


class TestGroundStateCrossings:
    def test_resonances_carry_kappa(self):
        crossings = {(c.n_e, c.n_ee): c for c in ground_state_crossings(8)}

        assert crossings[(2, 1)].kappa == 2
        assert crossings[(2, 1)].ratio == pytest.approx(-0.5)
        assert crossings[(2, 1)].class_size == 7
        assert crossings[(3, 2)].kappa == 3
        assert crossings[(3, 2)].ratio == pytest.approx(-2 / 3)
        assert crossings[(3, 2)].photon_order == 3

    def test_sub_resonances_have_no_kappa(self):
        crossings = {(c.n_e, c.n_ee): c for c in ground_state_crossings(8)}

        assert crossings[(3, 1)].kappa is None
        assert not crossings[(3, 1)].is_resonance

    def test_sorted_by_ratio(self):
        ratios = [c.ratio for c in ground_state_crossings(6)]

        assert ratios == sorted(ratios)


class TestScanSpectrum:
    def test_single_site_without_laser(self):
        ratios = [-1.0, -0.3, 0.4]

        scan = scan_spectrum(LatticeParams(n_sites=1, rabi=0.0), ratios)

        for ratio, eigenvalues in zip(ratios, scan.eigenvalues):
            np.testing.assert_allclose(eigenvalues, sorted([-ratio / 2, ratio / 2]), atol=1e-12)

    def test_two_sites_at_full_compensation(self):
        scan = scan_spectrum(LatticeParams(n_sites=2, rabi=0.0), [-1.0])

        np.testing.assert_allclose(scan.eigenvalues[0], [0.0, 0.0, 0.0, 1.0], atol=1e-12)

    def test_without_laser_eigenvalues_are_the_diagonal(self):
        params = LatticeParams(n_sites=6, rabi=0.0, interaction=2.0)
        ratios = np.linspace(-1.2, 0.2, 9)

        scan = scan_spectrum(params, ratios)

        for ratio, eigenvalues in zip(ratios, scan.eigenvalues):
            diagonal = build_full_hamiltonian(params.with_detuning(ratio * 2.0)).diagonal / 2.0
            np.testing.assert_allclose(eigenvalues, np.sort(diagonal), atol=1e-10)

    def test_eigenvalues_are_sorted_and_continuous(self):
        n_sites = 5
        ratios = np.linspace(-1.0, 0.0, 41)
        step = ratios[1] - ratios[0]

        scan = scan_spectrum(LatticeParams(n_sites=n_sites, rabi=0.15), ratios)

        assert np.all(np.diff(scan.eigenvalues, axis=1) >= 0)
        assert np.max(np.abs(np.diff(scan.eigenvalues, axis=0))) <= n_sites / 2 * step + 1e-10

    def test_ground_line(self):
        scan = scan_spectrum(LatticeParams(n_sites=4, rabi=0.15), [-0.5, 0.0, 0.25])

        np.testing.assert_allclose(scan.ground_line, [1.0, 0.0, -0.5])

    def test_result_does_not_depend_on_threads(self):
        params = LatticeParams(n_sites=5, rabi=0.15)
        ratios = np.linspace(-1.1, 0.3, 30)

        serial = scan_spectrum(params, ratios, max_workers=1)
        threaded = scan_spectrum(params, ratios, max_workers=4)

        np.testing.assert_array_equal(serial.eigenvalues, threaded.eigenvalues)

    def test_to_dataframe_columns(self):
        scan = scan_spectrum(LatticeParams(n_sites=2, rabi=0.15), [-0.5, 0.0])

        frame = scan.to_dataframe()

        assert list(frame.columns) == ["ratio", "eig_0", "eig_1", "eig_2", "eig_3", "g_state_line"]
        assert len(frame) == 2

    def test_too_many_sites(self):
        with pytest.raises(ConfigurationError):
            scan_spectrum(LatticeParams(n_sites=13, rabi=0.15), [0.0])

    def test_empty_grid(self):
        with pytest.raises(ConfigurationError):
            scan_spectrum(LatticeParams(n_sites=2, rabi=0.15), [])

    def test_default_ratio_grid(self):
        grid = default_ratio_grid()

        assert grid.size == 801
        assert grid[0] == pytest.approx(-1.3)
        assert grid[-1] == pytest.approx(0.3)
