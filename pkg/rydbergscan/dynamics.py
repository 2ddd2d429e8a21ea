"""Unitary time evolution of the chain and detuning sweeps of the excitation numbers.

Every propagation starts from the canonical ground state |G> = |gg...g>.
Cycle times are given in units of 1/Ω, as in the excitation-spectrum figures,
and converted to the reduced time unit 1/V internally.
"""

import dataclasses as dc
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg

from rydbergscan.errors import ConfigurationError, ContractViolation, NumericalError, RydbergScanError
from rydbergscan.lattice import (
    BasisState,
    HamiltonianMatrix,
    LatticeParams,
    build_full_hamiltonian,
    excitation_numbers,
    reflection_permutation,
)


_logger = logging.getLogger(__name__)


NORM_TOLERANCE = 1e-9

DEFAULT_CYCLE_TIMES = (15.0, 30.0, 64)
"""(min, max, count) of the averaging set, in units of 1/Ω."""

FIGURE_TRACE_TIMES = (15.0, 18.0, 21.0, 24.0, 27.0)
"""Excitation durations of the individual traces, in units of 1/Ω."""

DEFAULT_DETUNING_GRID = (-1.1, 0.35, 581)
"""(min, max, count) of the Δ/V grid, a spacing of 0.0025."""


@dc.dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes over the 2^N canonical product states, indexed by bits."""

    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (1 << self.n_sites,):
            raise ContractViolation(
                f"A wave function on {self.n_sites} sites needs {1 << self.n_sites} amplitudes, "
                f"got shape {amplitudes.shape}"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_state(cls, state: BasisState) -> "WaveFunction":
        amplitudes = np.zeros(1 << state.n_sites, dtype=complex)
        amplitudes[state.bits] = 1.0
        return cls(n_sites=state.n_sites, amplitudes=amplitudes)

    @classmethod
    def ground(cls, n_sites: int) -> "WaveFunction":
        """The canonical ground state |G>, every site in |g>."""
        return cls.from_state(BasisState(bits=0, n_sites=n_sites))

    @classmethod
    def superposition(cls, weights: Dict[BasisState, complex]) -> "WaveFunction":
        """Normalized superposition of basis states with the given (unnormalized) weights."""
        n_sites = {state.n_sites for state in weights}
        if len(n_sites) != 1:
            raise ContractViolation(f"All states of a superposition must live on the same chain, got {n_sites}")
        chain_length = n_sites.pop()
        amplitudes = np.zeros(1 << chain_length, dtype=complex)
        for state, weight in weights.items():
            amplitudes[state.bits] += weight
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise ContractViolation("Can not normalize a superposition with zero norm")
        return cls(n_sites=chain_length, amplitudes=amplitudes / norm)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm - 1.0) <= tolerance

    def overlap(self, other: "WaveFunction") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def reflected(self) -> "WaveFunction":
        """The state with the chain read from the other end."""
        return WaveFunction(n_sites=self.n_sites, amplitudes=self.amplitudes[reflection_permutation(self.n_sites)])


def _check_normalized(state: WaveFunction) -> None:
    if not state.is_normalized():
        raise ContractViolation(f"Wave function is not normalized: norm={state.norm!r}")


@dc.dataclass(frozen=True)
class Observables:
    """Expectation values of the total excitation number and the neighbor-pair number."""

    ne: float
    nee: float


def observables(state: WaveFunction) -> Observables:
    """<N_e> and <N_ee>; both operators are diagonal in the canonical basis."""
    _check_normalized(state)
    excitations, pairs = excitation_numbers(state.n_sites)
    probabilities = state.probabilities
    return Observables(ne=float(probabilities @ excitations), nee=float(probabilities @ pairs))


def energy_expectation(hamiltonian: HamiltonianMatrix, state: WaveFunction) -> float:
    return float(np.real(np.vdot(state.amplitudes, hamiltonian.entries @ state.amplitudes)))


class Propagator:
    """exp(-i H t) for a fixed Hamiltonian, through one eigendecomposition.

    The matrix is real symmetric, so H = U Λ U^T with a real orthogonal U and
    psi(t) = U exp(-i Λ t) U^T psi(0). The decomposition is computed once and
    reused for every duration.
    """

    def __init__(self, hamiltonian: HamiltonianMatrix):
        if not hamiltonian.is_hermitian():
            raise ContractViolation("Can only propagate with a Hermitian Hamiltonian")
        self._n_sites = hamiltonian.n_sites
        try:
            self._energies, self._eigenvectors = scipy.linalg.eigh(hamiltonian.entries)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Eigendecomposition of the Hamiltonian failed: {exc}") from exc

    @property
    def energies(self) -> np.ndarray:
        return self._energies

    def evolve(self, initial: WaveFunction, duration: float) -> WaveFunction:
        return self.evolve_many(initial, [duration])[0]

    def evolve_many(self, initial: WaveFunction, durations: Sequence[float]) -> List[WaveFunction]:
        """psi(T) for every T in durations, all from the same initial state."""
        _check_normalized(initial)
        if initial.n_sites != self._n_sites:
            raise ContractViolation(
                f"Wave function on {initial.n_sites} sites does not match a Hamiltonian on {self._n_sites} sites"
            )
        times = np.asarray(durations, dtype=float)
        coefficients = self._eigenvectors.T @ initial.amplitudes
        phases = np.exp(-1j * np.outer(self._energies, times))
        evolved = self._eigenvectors @ (phases * coefficients[:, np.newaxis])

        states = []
        for column, duration in enumerate(times):
            state = WaveFunction(n_sites=self._n_sites, amplitudes=evolved[:, column])
            drift = abs(state.norm - 1.0)
            if drift > NORM_TOLERANCE:
                raise NumericalError(f"Norm drifted by {drift:.3g} at T={duration!r}")
            states.append(state)
        return states


def propagate(hamiltonian: HamiltonianMatrix, initial: WaveFunction, duration: float) -> WaveFunction:
    """psi(T) = exp(-i H T) psi(0). The global phase is not meaningful, only observables are."""
    return Propagator(hamiltonian).evolve(initial, duration)


def two_level_excitation(rabi: float, detuning: float, duration: float) -> float:
    """Excited-state population of a single driven two-level system starting in |g>."""
    generalized = math.hypot(rabi, detuning)
    if generalized == 0:
        return 0.0
    return (rabi / generalized) ** 2 * math.sin(generalized * duration / 2) ** 2


def linear_grid(start: float, stop: float, count: int) -> np.ndarray:
    return np.linspace(start, stop, count)


def default_cycle_times() -> np.ndarray:
    return linear_grid(*DEFAULT_CYCLE_TIMES)


def default_detuning_grid() -> np.ndarray:
    return linear_grid(*DEFAULT_DETUNING_GRID)


def time_label(cycle_time: float) -> str:
    """Column suffix for a cycle time: 'T15' for 15.0, the full repr otherwise."""
    short = f"{cycle_time:g}"
    if float(short) == cycle_time:
        return f"T{short}"
    return f"T{cycle_time!r}"


@dc.dataclass(frozen=True, eq=False)
class SweepResult:
    """Excitation numbers after a laser cycle, over a Δ/V grid and a set of cycle times.

    ne_per_t and nee_per_t are [grid x cycle_times]; ne_avg and nee_avg are their
    row means. trace_times are extra durations recorded individually but kept
    out of the averages; the trace arrays are [grid x trace_times].
    """

    params: LatticeParams
    detuning_grid: np.ndarray
    cycle_times: np.ndarray
    ne_per_t: np.ndarray
    nee_per_t: np.ndarray
    ne_avg: np.ndarray
    nee_avg: np.ndarray
    trace_times: np.ndarray
    ne_traces: np.ndarray
    nee_traces: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.params.n_sites

    def averaged(self, observable: str) -> np.ndarray:
        if observable == "ne":
            return self.ne_avg
        if observable == "nee":
            return self.nee_avg
        raise ContractViolation(f"Unknown observable {observable!r}, expected 'ne' or 'nee'")

    def bounds_violations(self, tolerance: float = NORM_TOLERANCE) -> List[str]:
        """Check 0 <= <N_e> <= N and 0 <= <N_ee> <= N - 1 everywhere. Returns the violations found."""
        n_sites = self.n_sites
        slack = tolerance * n_sites
        errors = []
        for name, values, upper in [
            ("ne", np.hstack([self.ne_per_t, self.ne_traces]), n_sites),
            ("nee", np.hstack([self.nee_per_t, self.nee_traces]), n_sites - 1),
        ]:
            if values.size and values.min() < -slack:
                errors.append(f"<{name}> below 0: {values.min()!r}")
            if values.size and values.max() > upper + slack:
                errors.append(f"<{name}> above {upper}: {values.max()!r}")
        return errors

    def to_dataframe(self, detuning_unit_hz: Optional[float] = None) -> pd.DataFrame:
        """Tabular form with columns delta_over_v, [delta_hz], ne_T..., ne_avg, nee_T..., nee_avg.

        The per-T columns are the trace times when there are any, the averaging
        set otherwise. detuning_unit_hz is V/2π in Hz; when given, a physical
        detuning column is added.
        """
        if self.trace_times.size:
            shown_times, ne_columns, nee_columns = self.trace_times, self.ne_traces, self.nee_traces
        else:
            shown_times, ne_columns, nee_columns = self.cycle_times, self.ne_per_t, self.nee_per_t

        columns = {"delta_over_v": self.detuning_grid}
        if detuning_unit_hz is not None:
            columns["delta_hz"] = self.detuning_grid * detuning_unit_hz
        for prefix, values, average in [("ne", ne_columns, self.ne_avg), ("nee", nee_columns, self.nee_avg)]:
            for index, cycle_time in enumerate(shown_times):
                columns[f"{prefix}_{time_label(cycle_time)}"] = values[:, index]
            columns[f"{prefix}_avg"] = average
        return pd.DataFrame(columns)

    @classmethod
    def from_dataframe(cls, frame: pd.DataFrame, params: LatticeParams) -> "SweepResult":
        """Rebuild a sweep from its tabular form.

        The per-T columns of a table come back as trace times and the averaging
        set is left empty: only its averages survive in the table.
        """
        missing = {"delta_over_v", "ne_avg", "nee_avg"} - set(frame.columns)
        if missing:
            raise ContractViolation(f"Sweep table is missing the columns {sorted(missing)}")

        labels = [column[len("ne_") :] for column in frame.columns if column.startswith("ne_T")]
        try:
            traces = np.array([float(label[1:]) for label in labels])
        except ValueError as exc:
            raise ContractViolation(f"Can not read cycle times from the sweep columns: {exc}") from exc

        grid = frame["delta_over_v"].to_numpy(dtype=float)
        no_times = np.empty((grid.size, 0))
        return cls(
            params=params,
            detuning_grid=grid,
            cycle_times=np.empty(0),
            ne_per_t=no_times,
            nee_per_t=no_times,
            ne_avg=frame["ne_avg"].to_numpy(dtype=float),
            nee_avg=frame["nee_avg"].to_numpy(dtype=float),
            trace_times=traces,
            ne_traces=frame[[f"ne_{label}" for label in labels]].to_numpy(dtype=float).reshape(grid.size, -1),
            nee_traces=frame[[f"nee_{label}" for label in labels]].to_numpy(dtype=float).reshape(grid.size, -1),
        )


def _check_sweep_grids(template: LatticeParams, grid: np.ndarray, times: np.ndarray, traces: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigurationError("The detuning grid of a sweep must be a non-empty 1-D sequence")
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ContractViolation("The detuning grid of a sweep must be strictly monotone")
    if times.ndim != 1 or times.size == 0:
        raise ConfigurationError("A sweep needs at least one cycle time")
    if np.any(times < 0) or np.any(traces < 0):
        raise ConfigurationError("Cycle times can not be negative")
    for name, values in [("cycle times", times), ("trace times", traces)]:
        labels = [time_label(value) for value in values]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"The {name} of a sweep must not repeat, got {values.tolist()}")
    if template.rabi == 0:
        raise ConfigurationError("Cycle times are in units of 1/Ω, which needs a non-zero Rabi frequency")


def sweep(
    template: LatticeParams,
    detuning_grid: Sequence[float],
    cycle_times: Sequence[float],
    trace_times: Sequence[float] = (),
    max_workers: Optional[int] = None,
) -> SweepResult:
    """Propagate |G> under H(Δ) for every Δ/V of the grid and every cycle time.

    :param template: lattice parameters; its detuning is replaced by Δ/V * V at each grid point.
    :param detuning_grid: strictly monotone Δ/V values.
    :param cycle_times: averaging set, in units of 1/Ω.
    :param trace_times: extra durations (1/Ω) recorded individually, not averaged.
    :param max_workers: threads used for the independent grid points.
    :return: a SweepResult in grid order, whatever order the points finished in.
    """
    grid = np.asarray(detuning_grid, dtype=float)
    times = np.asarray(cycle_times, dtype=float)
    traces = np.asarray(trace_times, dtype=float)
    _check_sweep_grids(template, grid, times, traces)

    all_times = np.concatenate([times, traces])
    durations = all_times / abs(template.rabi)
    ground = WaveFunction.ground(template.n_sites)

    def run_point(ratio: float) -> np.ndarray:
        params = template.with_detuning(ratio * template.interaction)
        try:
            states = Propagator(build_full_hamiltonian(params)).evolve_many(ground, durations)
        except RydbergScanError as exc:
            raise NumericalError(f"Sweep failed at Δ/V={ratio!r}: {exc}") from exc
        _logger.debug(f"Sweep point Δ/V={ratio:.6g} done")
        return np.array([[values.ne, values.nee] for values in map(observables, states)])

    _logger.info(
        f"Sweeping N={template.n_sites}, Ω={template.rabi}: {grid.size} detunings x "
        f"{times.size} averaged + {traces.size} traced cycle times"
    )
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        rows = list(executor.map(run_point, grid))

    data = np.stack(rows)
    n_averaged = times.size
    ne_per_t = data[:, :n_averaged, 0]
    nee_per_t = data[:, :n_averaged, 1]
    return SweepResult(
        params=template,
        detuning_grid=grid,
        cycle_times=times,
        ne_per_t=ne_per_t,
        nee_per_t=nee_per_t,
        ne_avg=ne_per_t.mean(axis=1),
        nee_avg=nee_per_t.mean(axis=1),
        trace_times=traces,
        ne_traces=data[:, n_averaged:, 0],
        nee_traces=data[:, n_averaged:, 1],
    )
