"""Energy spectra versus Δ/V, degeneracies of H0 and the resonance detunings Δ_κ.

Two pictures are available and callers choose between them:

- degeneracy_classes and ground_state_crossings use only the closed-form H0
  energies, Δ (N_e - N/2) + V N_ee.
- scan_spectrum diagonalizes the full Hamiltonian, so the small shifts caused
  by the laser coupling and the long-range tail show up.
"""

import dataclasses as dc
import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from rydbergscan.errors import ConfigurationError, DomainError, NumericalError
from rydbergscan.lattice import (
    BasisState,
    LatticeParams,
    build_full_hamiltonian,
    enumerate_basis,
    excitation_numbers,
)


_logger = logging.getLogger(__name__)


DEGENERACY_TOLERANCE = 1e-12
"""Relative to V: H0 energies closer than this belong to the same level."""

MAX_SITES_DEGENERACY = 16
MAX_SITES_SPECTRUM = 12

DEFAULT_RATIO_GRID = (-1.3, 0.3, 801)
"""(min, max, count) of the Δ/V grid that resolves every κ <= 10 crossing."""


def resonance_detuning(kappa: float, interaction: float = 1.0) -> float:
    """Detuning at which |G> is degenerate with states of N_ee / N_e = (κ - 1) / κ.

    Δ_κ = V (-1 + 1/κ), for κ >= 2. Passing math.inf gives the limit -V.
    """
    if kappa < 2:
        raise DomainError(f"kappa must be at least 2, got {kappa}")
    return interaction * (-1.0 + 1.0 / kappa)


def kappa_of_class(n_e: int, n_ee: int) -> Optional[int]:
    """The κ whose Δ_κ makes the class (n_e, n_ee) degenerate with |G>, if there is one.

    Degeneracy needs Δ n_e + V n_ee = 0, i.e. Δ/V = -n_ee/n_e, which equals
    -1 + 1/κ exactly when κ = n_e / (n_e - n_ee) is an integer >= 2.
    """
    if n_e == 0 or n_ee >= n_e:
        return None
    kappa = Fraction(n_e, n_e - n_ee)
    if kappa.denominator != 1 or kappa < 2:
        return None
    return int(kappa)


@dc.dataclass(frozen=True)
class DegeneracyClass:
    """All canonical product states sharing (N_e, N_ee), with their common H0 energy."""

    n_e: int
    n_ee: int
    members: Tuple[BasisState, ...]
    energy: float

    @property
    def size(self) -> int:
        return len(self.members)


@dc.dataclass(frozen=True)
class DegenerateLevel:
    """One H0 energy level: every (N_e, N_ee) class whose energy coincides within tolerance."""

    energy: float
    classes: Tuple[DegeneracyClass, ...]

    @property
    def members(self) -> List[BasisState]:
        return [state for cls in self.classes for state in cls.members]

    @property
    def size(self) -> int:
        return sum(cls.size for cls in self.classes)

    def contains(self, state: BasisState) -> bool:
        return any(cls.n_e == state.n_e and cls.n_ee == state.n_ee for cls in self.classes)


def degeneracy_classes(n_sites: int, detuning: float, interaction: float) -> List[DegenerateLevel]:
    """Group the H0 eigenstates into degenerate levels, ordered by energy.

    Within a level the classes are ordered by (N_e, N_ee). Every basis state
    appears in exactly one class.
    """
    if n_sites > MAX_SITES_DEGENERACY:
        raise ConfigurationError(
            f"Exhaustive degeneracy analysis is limited to {MAX_SITES_DEGENERACY} sites, got {n_sites}"
        )

    by_counts: Dict[Tuple[int, int], List[BasisState]] = {}
    for state in enumerate_basis(n_sites):
        by_counts.setdefault((state.n_e, state.n_ee), []).append(state)

    classes = [
        DegeneracyClass(
            n_e=counts[0],
            n_ee=counts[1],
            members=tuple(members),
            energy=detuning * (counts[0] - n_sites / 2) + interaction * counts[1],
        )
        for counts, members in by_counts.items()
    ]
    classes.sort(key=lambda cls: (cls.energy, cls.n_e, cls.n_ee))

    tolerance = DEGENERACY_TOLERANCE * abs(interaction)
    levels: List[List[DegeneracyClass]] = []
    for cls in classes:
        if levels and abs(cls.energy - levels[-1][0].energy) <= tolerance:
            levels[-1].append(cls)
        else:
            levels.append([cls])

    return [
        DegenerateLevel(energy=group[0].energy, classes=tuple(sorted(group, key=lambda c: (c.n_e, c.n_ee))))
        for group in levels
    ]


def level_of(levels: Iterable[DegenerateLevel], state: BasisState) -> DegenerateLevel:
    for level in levels:
        if level.contains(state):
            return level
    raise KeyError(f"State {state} is not part of any level")


@dc.dataclass(frozen=True)
class GroundStateCrossing:
    """A detuning where the H0 level of |G> crosses the class (n_e, n_ee)."""

    ratio: float
    n_e: int
    n_ee: int
    class_size: int
    kappa: Optional[int]

    @property
    def photon_order(self) -> int:
        """H only couples states one excitation apart, so reaching the class takes n_e photons."""
        return self.n_e

    @property
    def is_resonance(self) -> bool:
        return self.kappa is not None


def ground_state_crossings(n_sites: int, interaction: float = 1.0) -> List[GroundStateCrossing]:
    """Every Δ/V at which |G> crosses another class of the H0 spectrum, sorted by ratio.

    Crossings with a κ label are the resonances of the excitation spectrum;
    the others are weakly coupled sub-resonances that need unrealistically long
    excitation times to populate.
    """
    if n_sites > MAX_SITES_DEGENERACY:
        raise ConfigurationError(
            f"Exhaustive crossing analysis is limited to {MAX_SITES_DEGENERACY} sites, got {n_sites}"
        )
    excitations, pairs = excitation_numbers(n_sites)
    sizes: Dict[Tuple[int, int], int] = {}
    for counts in zip(excitations.tolist(), pairs.tolist()):
        sizes[counts] = sizes.get(counts, 0) + 1

    crossings = [
        GroundStateCrossing(
            ratio=-n_ee / n_e,
            n_e=n_e,
            n_ee=n_ee,
            class_size=size,
            kappa=kappa_of_class(n_e, n_ee),
        )
        for (n_e, n_ee), size in sizes.items()
        if n_e > 0
    ]
    crossings.sort(key=lambda c: (c.ratio, c.n_e))
    return crossings


@dc.dataclass(frozen=True)
class SpectrumScan:
    """Sorted eigenvalues of the full Hamiltonian over a Δ/V grid, all in units of V.

    ground_line is the H0 energy of |G>, -N Δ / (2V), drawn as a reference.
    """

    params: LatticeParams
    ratio_grid: np.ndarray
    eigenvalues: np.ndarray
    ground_line: np.ndarray

    @property
    def n_levels(self) -> int:
        return self.eigenvalues.shape[1]

    def to_dataframe(self) -> pd.DataFrame:
        columns = {"ratio": self.ratio_grid}
        for level in range(self.n_levels):
            columns[f"eig_{level}"] = self.eigenvalues[:, level]
        columns["g_state_line"] = self.ground_line
        return pd.DataFrame(columns)


def _eigenvalues_at(params: LatticeParams, ratio: float) -> np.ndarray:
    hamiltonian = build_full_hamiltonian(params.with_detuning(ratio * params.interaction))
    try:
        values = scipy.linalg.eigvalsh(hamiltonian.entries)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Eigensolver failed at Δ/V={ratio!r}: {exc}") from exc
    return values / params.interaction


def scan_spectrum(
    params: LatticeParams, ratio_grid: Sequence[float], max_workers: Optional[int] = None
) -> SpectrumScan:
    """Diagonalize the full Hamiltonian at every Δ/V of the grid.

    The detuning of `params` is ignored; every other parameter is kept.
    Grid points are independent and may run on `max_workers` threads; the
    result is assembled in grid order regardless.
    """
    if params.n_sites > MAX_SITES_SPECTRUM:
        raise ConfigurationError(
            f"Dense spectrum scans are limited to {MAX_SITES_SPECTRUM} sites, got {params.n_sites}"
        )
    ratios = np.asarray(ratio_grid, dtype=float)
    if ratios.ndim != 1 or ratios.size == 0:
        raise ConfigurationError("The Δ/V grid of a spectrum scan must be a non-empty 1-D sequence")

    _logger.info(f"Scanning spectrum: N={params.n_sites}, {ratios.size} grid points")
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        rows = list(executor.map(lambda ratio: _eigenvalues_at(params, ratio), ratios))

    return SpectrumScan(
        params=params,
        ratio_grid=ratios,
        eigenvalues=np.vstack(rows),
        ground_line=-params.n_sites * ratios / 2,
    )


def default_ratio_grid() -> np.ndarray:
    start, stop, count = DEFAULT_RATIO_GRID
    return np.linspace(start, stop, count)


def ratio_identity(kappa: int) -> float:
    """Δ_κ / Δ_{κ+1} = 1 - κ^-2, the relation between two neighboring resonances."""
    if kappa < 2:
        raise DomainError(f"kappa must be at least 2, got {kappa}")
    return 1.0 - 1.0 / kappa**2
