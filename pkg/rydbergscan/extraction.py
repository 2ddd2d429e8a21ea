"""Resonance peaks in the excitation spectrum, their κ labels, and the inversion to C6.

Peak positions are read in units of the grid they were detected on, normally
Δ/V. Turning them into C6 needs the interaction V in the unit the answer
should carry, and the lattice spacing a:

    absolute:  C6 = -κ / (κ - 1) · Δ_κ · a^m
    relative:  C6 = κ (κ + 1) · (Δ_κ - Δ_{κ+1}) · a^m
"""

import dataclasses as dc
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal
from pydantic import BaseModel, ConfigDict, Field

from rydbergscan.dynamics import SweepResult, sweep
from rydbergscan.errors import (
    ContractViolation,
    DomainError,
    KappaIdentificationError,
    PipelineError,
    RydbergScanError,
)
from rydbergscan.lattice import DEFAULT_EXPONENT, LatticeParams
from rydbergscan.spectrum import ratio_identity, resonance_detuning


_logger = logging.getLogger(__name__)


MIN_SAMPLES = 5
RATIO_WINDOW = (0.70, 1.0)
STATUS_OK = "ok"
STATUS_NO_PEAKS = "no peaks"


class PeakOptions(BaseModel):
    """Tuning of the peak detection and κ labelling."""

    model_config = ConfigDict(frozen=True)

    # In units of the analyzed observable.
    min_prominence: float = Field(default=0.1, gt=0)
    # Peaks with |position| below this are the broad Δ=0 line, not a resonance.
    exclusion_half_width: float = Field(default=0.15, ge=0)
    max_kappa: int = Field(default=10, ge=3)


@dc.dataclass(frozen=True)
class Peak:
    position: float
    height: float
    prominence: float
    width: float
    kappa: Optional[int] = None
    residual: Optional[float] = None
    low_confidence: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return dc.asdict(self)


@dc.dataclass(frozen=True)
class PeakSet:
    """Detected peaks in increasing position order, with the observable and grid they came from."""

    peaks: Tuple[Peak, ...]
    observable: str
    grid_range: Tuple[float, float]

    def __post_init__(self):
        positions = [peak.position for peak in self.peaks]
        if any(later <= earlier for earlier, later in zip(positions, positions[1:])):
            raise ContractViolation(f"Peak positions must be strictly increasing, got {positions}")
        low, high = self.grid_range
        if any(not low <= position <= high for position in positions):
            raise ContractViolation(f"Peak positions {positions} are not all inside the grid [{low}, {high}]")

    @property
    def status(self) -> str:
        return STATUS_OK if self.peaks else STATUS_NO_PEAKS

    @property
    def positions(self) -> List[float]:
        return [peak.position for peak in self.peaks]

    def by_kappa(self, kappa: int) -> Optional[Peak]:
        for peak in self.peaks:
            if peak.kappa == kappa:
                return peak
        return None

    @property
    def kappas(self) -> List[int]:
        return sorted(peak.kappa for peak in self.peaks if peak.kappa is not None)


def _refine_vertex(positions: np.ndarray, signal: np.ndarray, index: int) -> Tuple[float, float]:
    """Vertex of the parabola through the three samples around a local maximum."""
    window = slice(index - 1, index + 2)
    curvature, slope, offset = np.polyfit(positions[window], signal[window], 2)
    if curvature >= 0:
        return float(positions[index]), float(signal[index])
    vertex = -slope / (2 * curvature)
    vertex = min(max(vertex, positions[index - 1]), positions[index + 1])
    return float(vertex), float(np.polyval([curvature, slope, offset], vertex))


def detect_peaks(
    positions: Sequence[float],
    signal: Sequence[float],
    options: PeakOptions = PeakOptions(),
    observable: str = "ne",
) -> PeakSet:
    """Local maxima of `signal` with enough prominence, refined by quadratic interpolation.

    An empty result is a valid outcome, reported through PeakSet.status.
    """
    grid = np.asarray(positions, dtype=float)
    values = np.asarray(signal, dtype=float)
    if grid.shape != values.shape or grid.ndim != 1:
        raise ContractViolation(f"Grid and signal shapes differ: {grid.shape} vs {values.shape}")
    if grid.size < MIN_SAMPLES:
        raise ContractViolation(f"Peak detection needs at least {MIN_SAMPLES} samples, got {grid.size}")
    steps = np.diff(grid)
    if np.all(steps < 0):
        grid, values = grid[::-1], values[::-1]
    elif not np.all(steps > 0):
        raise ContractViolation("Peak detection needs a strictly monotone grid")

    indices, properties = scipy.signal.find_peaks(values, prominence=options.min_prominence)
    if indices.size:
        _, _, left_ips, right_ips = scipy.signal.peak_widths(
            values,
            indices,
            rel_height=0.5,
            prominence_data=(properties["prominences"], properties["left_bases"], properties["right_bases"]),
        )
        sample_numbers = np.arange(grid.size)
        widths = np.interp(right_ips, sample_numbers, grid) - np.interp(left_ips, sample_numbers, grid)
    else:
        widths = np.empty(0)

    peaks = []
    for index, prominence, width in zip(indices, properties["prominences"], widths):
        position, height = _refine_vertex(grid, values, index)
        if abs(position) < options.exclusion_half_width:
            _logger.debug(f"Skipping the Δ=0 line at {position:.6g}")
            continue
        peaks.append(Peak(position=position, height=height, prominence=float(prominence), width=float(width)))

    _logger.info(f"Detected {len(peaks)} peaks in <{observable}>")
    return PeakSet(peaks=tuple(peaks), observable=observable, grid_range=(float(grid[0]), float(grid[-1])))


@dc.dataclass(frozen=True)
class KappaIdentification:
    kappa: int
    residual: float
    ratio: float


def identify_kappa(pos_k: float, pos_k_plus_1: float, max_kappa: int = 10) -> KappaIdentification:
    """The κ whose ratio law Δ_κ / Δ_{κ+1} = 1 - κ^-2 best matches two neighboring peaks.

    The ratio test is scale free: it does not check that the peaks sit at the
    absolute Δ_κ positions.
    """
    if pos_k >= 0 or pos_k_plus_1 >= 0:
        raise DomainError(f"Resonance positions must be negative, got {pos_k} and {pos_k_plus_1}")
    ratio = pos_k / pos_k_plus_1
    low, high = RATIO_WINDOW
    if not low < ratio < high:
        raise KappaIdentificationError(ratio)

    candidates = range(2, max_kappa + 1)
    residuals = [abs(ratio - ratio_identity(kappa)) for kappa in candidates]
    best = int(np.argmin(residuals))
    return KappaIdentification(kappa=candidates[best], residual=residuals[best], ratio=ratio)


def _nearest_resonance(position: float, interaction: float, kappas: Sequence[int]) -> Tuple[int, float]:
    distances = [abs(position - resonance_detuning(kappa, interaction)) for kappa in kappas]
    best = int(np.argmin(distances))
    return kappas[best], distances[best] / interaction


def assign_kappas(peak_set: PeakSet, interaction: float = 1.0, max_kappa: int = 10) -> PeakSet:
    """Label the negative-detuning peaks with κ, the one closest to zero having the smallest κ.

    The pair closest to zero fixes κ through the ratio law. The scale it
    implies, V = -Δ_κ κ / (κ - 1), places the remaining peaks on the next free
    resonances. A lone peak falls back to the nearest Δ_κ for the given
    interaction and is marked low-confidence.
    """
    negative = sorted((peak for peak in peak_set.peaks if peak.position < 0), key=lambda p: -p.position)
    labelled: Dict[float, Peak] = {}

    if len(negative) == 1:
        peak = negative[0]
        kappa, residual = _nearest_resonance(peak.position, interaction, range(2, max_kappa + 1))
        _logger.warning(f"Single peak at {peak.position:.6g}: κ={kappa} assigned by position only (low confidence)")
        labelled[peak.position] = dc.replace(peak, kappa=kappa, residual=residual, low_confidence=True)
    elif len(negative) >= 2:
        first, second = negative[0], negative[1]
        identification = identify_kappa(first.position, second.position, max_kappa=max_kappa)
        kappa = identification.kappa
        labelled[first.position] = dc.replace(first, kappa=kappa, residual=identification.residual)
        scale = -first.position * kappa / (kappa - 1)
        for peak in negative[1:]:
            candidates = range(kappa + 1, max(max_kappa, kappa + 1) + 1)
            kappa, residual = _nearest_resonance(peak.position, scale, candidates)
            if residual > 0.02:
                _logger.warning(f"Peak at {peak.position:.6g} is {residual:.1%} away from the κ={kappa} resonance")
            labelled[peak.position] = dc.replace(peak, kappa=kappa, residual=residual)

    peaks = tuple(labelled.get(peak.position, peak) for peak in peak_set.peaks)
    return dc.replace(peak_set, peaks=peaks)


def _check_kappa(kappa: int) -> None:
    if kappa < 2:
        raise DomainError(f"kappa must be at least 2, got {kappa}")


def extract_c6_absolute(delta_kappa: float, kappa: int, spacing: float, exponent: int = DEFAULT_EXPONENT) -> float:
    """C6 from one resonance position: -κ/(κ-1) · Δ_κ · a^m."""
    _check_kappa(kappa)
    if delta_kappa >= 0:
        raise DomainError(f"A resonance detuning must be negative, got {delta_kappa}")
    if spacing <= 0:
        raise DomainError(f"The lattice spacing must be positive, got {spacing}")
    return -kappa / (kappa - 1) * delta_kappa * spacing**exponent


def extract_c6_relative(
    spacing_between_peaks: float, kappa: int, lattice_spacing: float, exponent: int = DEFAULT_EXPONENT
) -> float:
    """C6 from the distance between the κ and κ+1 resonances: κ(κ+1) · (Δ_κ - Δ_{κ+1}) · a^m."""
    _check_kappa(kappa)
    if spacing_between_peaks <= 0:
        raise DomainError(f"Peak separation must be positive, got {spacing_between_peaks}: peaks are mis-ordered")
    if lattice_spacing <= 0:
        raise DomainError(f"The lattice spacing must be positive, got {lattice_spacing}")
    return kappa * (kappa + 1) * spacing_between_peaks * lattice_spacing**exponent


@dc.dataclass(frozen=True)
class ExtractionReport:
    """Outcome of detect, identify and extract on one observable.

    c6 values are in units of interaction · length^m. kappa_absolute is the
    resonance behind c6_absolute, kappa_pair the lower κ of the pair behind
    c6_relative. true_c6 is only known for simulated round trips.
    """

    peak_set: PeakSet
    c6_absolute: Optional[float] = None
    c6_relative: Optional[float] = None
    kappa_absolute: Optional[int] = None
    kappa_pair: Optional[int] = None
    true_c6: Optional[float] = None

    @property
    def status(self) -> str:
        return self.peak_set.status

    @staticmethod
    def _relative_error(value: Optional[float], truth: Optional[float]) -> Optional[float]:
        if value is None or truth is None:
            return None
        return abs(value - truth) / abs(truth)

    @property
    def error_absolute(self) -> Optional[float]:
        return self._relative_error(self.c6_absolute, self.true_c6)

    @property
    def error_relative(self) -> Optional[float]:
        return self._relative_error(self.c6_relative, self.true_c6)

    @property
    def method_disagreement(self) -> Optional[float]:
        """Relative difference of the two estimates."""
        return self._relative_error(self.c6_absolute, self.c6_relative)

    def to_dict(self) -> Dict[str, Any]:
        report = {
            "status": self.status,
            "observable": self.peak_set.observable,
            "peaks": [peak.to_dict() for peak in self.peak_set.peaks],
            "c6_absolute": self.c6_absolute,
            "c6_relative": self.c6_relative,
            "kappa_absolute": self.kappa_absolute,
            "kappa_pair": self.kappa_pair,
            "method_disagreement": self.method_disagreement,
        }
        if self.true_c6 is not None:
            report["true_c6"] = self.true_c6
            report["relative_error_vs_truth"] = {"absolute": self.error_absolute, "relative": self.error_relative}
        return report


def _c6_estimates(
    peak_set: PeakSet, interaction: float, lattice_spacing: float, exponent: int
) -> Tuple[Optional[float], Optional[int], Optional[float], Optional[int]]:
    kappas = peak_set.kappas
    if not kappas:
        return None, None, None, None

    kappa_absolute = kappas[0]
    delta = peak_set.by_kappa(kappa_absolute).position * interaction
    c6_absolute = extract_c6_absolute(delta, kappa_absolute, lattice_spacing, exponent)

    c6_relative = kappa_pair = None
    for kappa in kappas:
        if kappa + 1 in kappas:
            kappa_pair = kappa
            separation = (peak_set.by_kappa(kappa).position - peak_set.by_kappa(kappa + 1).position) * interaction
            c6_relative = extract_c6_relative(separation, kappa, lattice_spacing, exponent)
            break
    return c6_absolute, kappa_absolute, c6_relative, kappa_pair


def extract(
    positions: Sequence[float],
    signal: Sequence[float],
    options: PeakOptions = PeakOptions(),
    lattice_spacing: float = 1.0,
    interaction: float = 1.0,
    observable: str = "ne",
    exponent: int = DEFAULT_EXPONENT,
) -> ExtractionReport:
    """Run detect, identify and extract on a spectrum sampled over Δ/V.

    The absolute estimate uses the smallest κ found, the relative one the
    first consecutive pair (κ, κ+1). Failures are re-raised as PipelineError
    naming the stage.
    """
    stage = "detect"
    try:
        peak_set = detect_peaks(positions, signal, options, observable=observable)
        if peak_set.status == STATUS_NO_PEAKS:
            _logger.warning("No resonance peaks found, nothing to extract")
            return ExtractionReport(peak_set=peak_set)

        stage = "identify"
        peak_set = assign_kappas(peak_set, interaction=1.0, max_kappa=options.max_kappa)

        stage = "extract"
        c6_absolute, kappa_absolute, c6_relative, kappa_pair = _c6_estimates(
            peak_set, interaction, lattice_spacing, exponent
        )
    except PipelineError:
        raise
    except RydbergScanError as exc:
        raise PipelineError(stage, exc) from exc

    _logger.info(
        f"C6 estimates: absolute={c6_absolute} (κ={kappa_absolute}), relative={c6_relative} (κ={kappa_pair})"
    )
    return ExtractionReport(
        peak_set=peak_set,
        c6_absolute=c6_absolute,
        c6_relative=c6_relative,
        kappa_absolute=kappa_absolute,
        kappa_pair=kappa_pair,
    )


def extract_from_sweep(
    result: SweepResult,
    options: PeakOptions = PeakOptions(),
    lattice_spacing: float = 1.0,
    interaction: Optional[float] = None,
    observable: str = "ne",
) -> ExtractionReport:
    """extract on the cycle-time averaged observable of a sweep.

    interaction defaults to the V the sweep was simulated with.
    """
    if interaction is None:
        interaction = result.params.interaction
    return extract(
        result.detuning_grid,
        result.averaged(observable),
        options=options,
        lattice_spacing=lattice_spacing,
        interaction=interaction,
        observable=observable,
        exponent=result.params.exponent,
    )


def round_trip(
    params: LatticeParams,
    detuning_grid: Sequence[float],
    cycle_times: Sequence[float],
    options: PeakOptions = PeakOptions(),
    lattice_spacing: float = 1.0,
    observable: str = "ne",
    max_workers: Optional[int] = None,
) -> ExtractionReport:
    """Simulate a sweep with a known C6 = V a^m and extract it back.

    Both estimates are required: a sweep that does not resolve a consecutive
    κ pair fails in the identify stage.
    """
    true_c6 = params.interaction * lattice_spacing**params.exponent
    try:
        result = sweep(params, detuning_grid, cycle_times, max_workers=max_workers)
    except RydbergScanError as exc:
        raise PipelineError("sweep", exc) from exc

    report = extract_from_sweep(result, options, lattice_spacing=lattice_spacing, observable=observable)
    if report.c6_absolute is None or report.c6_relative is None:
        raise PipelineError(
            "identify", DomainError(f"Need a consecutive κ pair for a round trip, found κ={report.peak_set.kappas}")
        )
    report = dc.replace(report, true_c6=true_c6)
    _logger.info(
        f"Round trip: C6={true_c6}, errors absolute={report.error_absolute:.3%}, relative={report.error_relative:.3%}"
    )
    return report
