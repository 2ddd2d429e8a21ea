"""Many-body basis, excitation-number operators and Hamiltonians of a chain of superatoms.

Site k of the chain is bit k of the basis index: a set bit means the superatom
is in its Rydberg state |e>, a clear bit means |g>. Site 0 is the leftmost site
and the least significant bit, so the index of a basis state equals its bits.

The chain is open: pair interactions run over all pairs l > k with site
distance l - k, there is no wraparound.

Energies are in whatever unit the caller picks; the rest of the package works
in reduced units with V = 1.
"""

import dataclasses as dc
import functools
import logging
import math
from typing import List, Tuple, Union

import numpy as np
import scipy.sparse
from pydantic import BaseModel, ConfigDict, Field

from rydbergscan.errors import ConfigurationError, ContractViolation, DomainError


_logger = logging.getLogger(__name__)


MAX_SITES = 24
"""Hard cap on the chain length: beyond it the dense propagator is out of contract."""

DEFAULT_EXPONENT = 6
"""Van der Waals interaction, V / |l - k|^6."""

_DENSE_WARNING_SITES = 14


def _check_n_sites(n_sites: int) -> None:
    if not 1 <= n_sites <= MAX_SITES:
        raise ConfigurationError(f"n_sites must be between 1 and {MAX_SITES}, got {n_sites}")


@dc.dataclass(frozen=True, order=True)
class BasisState:
    """A canonical product state |s_0 s_1 ... s_{N-1}>, encoded as an occupation bit pattern."""

    bits: int
    n_sites: int

    def __post_init__(self):
        _check_n_sites(self.n_sites)
        if not 0 <= self.bits < (1 << self.n_sites):
            raise ContractViolation(f"bits={self.bits:#b} does not fit in a chain of {self.n_sites} sites")

    @property
    def n_e(self) -> int:
        return n_e(self.bits)

    @property
    def n_ee(self) -> int:
        return n_ee(self.bits)

    def is_excited(self, site: int) -> bool:
        return bool((self.bits >> site) & 1)

    def label(self) -> str:
        """Spell the state in g/e letters, site 0 first. 0b0110110 on 7 sites is 'geegeeg'."""
        return "".join("e" if self.is_excited(site) else "g" for site in range(self.n_sites))

    @classmethod
    def from_label(cls, label: str) -> "BasisState":
        if not label or set(label) - {"g", "e"}:
            raise ContractViolation(f"A state label may only contain 'g' and 'e', got {label!r}")
        bits = sum(1 << site for site, letter in enumerate(label) if letter == "e")
        return cls(bits=bits, n_sites=len(label))

    def reflected(self) -> "BasisState":
        """The same configuration read from the other end of the chain."""
        return BasisState(bits=_reverse_bits(self.bits, self.n_sites), n_sites=self.n_sites)

    def __str__(self) -> str:
        return f"|{self.label()}>"


StateLike = Union[BasisState, int]


def _bits_of(state: StateLike) -> int:
    if isinstance(state, BasisState):
        return state.bits
    bits = int(state)
    if bits < 0:
        raise ContractViolation(f"A basis state index can not be negative, got {bits}")
    return bits


def _reverse_bits(bits: int, n_sites: int) -> int:
    reversed_bits = 0
    for site in range(n_sites):
        if (bits >> site) & 1:
            reversed_bits |= 1 << (n_sites - 1 - site)
    return reversed_bits


def enumerate_basis(n_sites: int) -> List[BasisState]:
    """All 2^N canonical product states in ascending bits order.

    The position of a state in the returned list equals its bits value.
    """
    _check_n_sites(n_sites)
    return [BasisState(bits=bits, n_sites=n_sites) for bits in range(1 << n_sites)]


def n_e(state: StateLike) -> int:
    """Total number of Rydberg excitations."""
    return _bits_of(state).bit_count()


def n_ee(state: StateLike) -> int:
    """Number of neighboring excitation pairs on the open chain."""
    bits = _bits_of(state)
    return (bits & (bits >> 1)).bit_count()


def unperturbed_energy(state: StateLike, detuning: float, interaction: float, n_sites: int) -> float:
    """Energy of a canonical product state under H0: Δ (N_e - N/2) + V N_ee."""
    return detuning * (n_e(state) - n_sites / 2) + interaction * n_ee(state)


def collective_rabi(single_atom_rabi: float, filling: int) -> float:
    """Rabi frequency of a superatom made of `filling` atoms: sqrt(N0) Ω0."""
    if filling < 1:
        raise DomainError(f"filling must be at least 1, got {filling}")
    return math.sqrt(filling) * single_atom_rabi


def _popcount(values: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(values)
    remaining = values.copy()
    while np.any(remaining):
        counts += remaining & 1
        remaining >>= 1
    return counts


@functools.lru_cache(maxsize=None)
def _basis_indices(n_sites: int) -> np.ndarray:
    indices = np.arange(1 << n_sites, dtype=np.int64)
    indices.setflags(write=False)
    return indices


@functools.lru_cache(maxsize=None)
def pair_counts(n_sites: int, distance: int) -> np.ndarray:
    """Number of excited pairs at exactly `distance` sites apart, for every basis state."""
    _check_n_sites(n_sites)
    states = _basis_indices(n_sites)
    counts = _popcount(states & (states >> distance))
    counts.setflags(write=False)
    return counts


@functools.lru_cache(maxsize=None)
def _excitation_counts(n_sites: int) -> np.ndarray:
    counts = _popcount(_basis_indices(n_sites))
    counts.setflags(write=False)
    return counts


def excitation_numbers(n_sites: int) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of N_e and N_ee over the whole basis, as read-only arrays indexed by bits."""
    _check_n_sites(n_sites)
    return _excitation_counts(n_sites), pair_counts(n_sites, 1)


@functools.lru_cache(maxsize=None)
def reflection_permutation(n_sites: int) -> np.ndarray:
    """Index map of the site-reversal symmetry: state i goes to state permutation[i]."""
    _check_n_sites(n_sites)
    permutation = np.array([_reverse_bits(bits, n_sites) for bits in range(1 << n_sites)], dtype=np.int64)
    permutation.setflags(write=False)
    return permutation


class LatticeParams(BaseModel):
    """The parameters of the chain Hamiltonian: N, Ω, Δ, V and the interaction exponent m."""

    model_config = ConfigDict(frozen=True)

    n_sites: int = Field(ge=1)
    rabi: float
    detuning: float = 0.0
    # Repulsive, as for nS Rydberg states.
    interaction: float = Field(default=1.0, gt=0)
    exponent: int = Field(default=DEFAULT_EXPONENT, ge=1)

    @property
    def dimension(self) -> int:
        return 1 << self.n_sites

    def with_detuning(self, detuning: float) -> "LatticeParams":
        return self.model_copy(update={"detuning": float(detuning)})


@dc.dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """A real symmetric matrix over the basis, rows and columns ordered by bits."""

    n_sites: int
    entries: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.entries)
        if np.iscomplexobj(raw) and np.any(raw.imag != 0):
            raise ContractViolation("Hamiltonian entries must be real, got complex values")
        entries = np.array(raw.real if np.iscomplexobj(raw) else raw, dtype=float)
        dimension = 1 << self.n_sites
        if entries.shape != (dimension, dimension):
            raise ContractViolation(
                f"A Hamiltonian on {self.n_sites} sites must be {dimension}x{dimension}, got {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def entry(self, row: StateLike, column: StateLike) -> float:
        return float(self.entries[_bits_of(row), _bits_of(column)])

    def is_hermitian(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.conj().T))

    def is_diagonal(self) -> bool:
        return not np.any(self.entries - np.diag(self.diagonal))

    def max_abs_difference(self, other: "HamiltonianMatrix") -> float:
        return float(np.max(np.abs(self.entries - other.entries)))

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(self.entries)

    def __add__(self, other: "HamiltonianMatrix") -> "HamiltonianMatrix":
        if not isinstance(other, HamiltonianMatrix):
            return NotImplemented
        if other.n_sites != self.n_sites:
            raise ContractViolation(f"Can not add Hamiltonians on {self.n_sites} and {other.n_sites} sites")
        return HamiltonianMatrix(n_sites=self.n_sites, entries=self.entries + other.entries)


def _detuning_diagonal(params: LatticeParams) -> np.ndarray:
    excitations, _ = excitation_numbers(params.n_sites)
    return params.detuning * (excitations - params.n_sites / 2)


def _interaction_diagonal(params: LatticeParams, min_distance: int, max_distance: int) -> np.ndarray:
    diagonal = np.zeros(params.dimension)
    for distance in range(min_distance, min(max_distance, params.n_sites - 1) + 1):
        strength = params.interaction / distance**params.exponent
        diagonal += strength * pair_counts(params.n_sites, distance)
    return diagonal


def _laser_coupling(params: LatticeParams) -> np.ndarray:
    """Ω/2 between every pair of states that differ by exactly one excitation."""
    states = _basis_indices(params.n_sites)
    coupling = np.zeros((params.dimension, params.dimension))
    for site in range(params.n_sites):
        coupling[states, states ^ (1 << site)] = params.rabi / 2
    return coupling


def _check_dimension(params: LatticeParams) -> None:
    _check_n_sites(params.n_sites)
    if params.n_sites > _DENSE_WARNING_SITES:
        _logger.warning(
            f"Building a dense {params.dimension}x{params.dimension} Hamiltonian, this needs "
            f"{params.dimension**2 * 8 / 2**30:.1f} GiB"
        )


def _h0_diagonal(params: LatticeParams) -> np.ndarray:
    return _detuning_diagonal(params) + _interaction_diagonal(params, min_distance=1, max_distance=1)


def _long_range_diagonal(params: LatticeParams) -> np.ndarray:
    return _interaction_diagonal(params, min_distance=2, max_distance=params.n_sites - 1)


def build_h0(params: LatticeParams) -> HamiltonianMatrix:
    """The dominant, diagonal part: detuning plus nearest-neighbor interaction."""
    _check_dimension(params)
    return HamiltonianMatrix(n_sites=params.n_sites, entries=np.diag(_h0_diagonal(params)))


def build_hprime(params: LatticeParams) -> HamiltonianMatrix:
    """The perturbation: laser coupling plus all interactions at site distance 2 and more."""
    _check_dimension(params)
    entries = _laser_coupling(params) + np.diag(_long_range_diagonal(params))
    return HamiltonianMatrix(n_sites=params.n_sites, entries=entries)


def build_full_hamiltonian(params: LatticeParams) -> HamiltonianMatrix:
    """The complete chain Hamiltonian, with every pair interaction V / |l - k|^m.

    The diagonal is assembled from the same two parts as build_h0 and
    build_hprime, so build_h0 + build_hprime reproduces it bit for bit.
    """
    _check_dimension(params)
    _logger.debug(f"Building full Hamiltonian: N={params.n_sites}, dimension={params.dimension}")
    entries = _laser_coupling(params) + np.diag(_h0_diagonal(params) + _long_range_diagonal(params))
    return HamiltonianMatrix(n_sites=params.n_sites, entries=entries)
