"""Physical units, collective parameters and the feasibility numbers of an experiment.

Angular and ordinary frequencies are different types here. A laser Rabi
frequency of 2π × 146 kHz is AngularFrequency(146, "2pi*kHz"), which stores
9.17e5 rad/s; the same number as an ordinary frequency is
Frequency(146, "kHz"). Adding, subtracting or comparing the two raises
TypeError, and the only way across is to_frequency() / to_angular().

Quantities subclass float and store their value in the base unit (rad/s, Hz,
m, s), so they drop into numpy and math without ceremony. Multiplying or
dividing by a plain number keeps the type; any other arithmetic gives a plain
float.
"""

import dataclasses as dc
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rydbergscan.errors import DomainError
from rydbergscan.lattice import DEFAULT_EXPONENT, collective_rabi
from rydbergscan.spectrum import resonance_detuning


_logger = logging.getLogger(__name__)


TWO_PI = 2 * math.pi

LINEWIDTH_PREFACTOR_GHZ = 0.699
LINEWIDTH_EXPONENT = -2.94
C6_SCALING_EXPONENT = 11

DEFAULT_RESOLVABILITY_THRESHOLD = 5.0
DEFAULT_KAPPAS = tuple(range(2, 11))

FREQUENCY_CONVENTION = "frequencies are ordinary frequencies f = omega / 2pi, in Hz"
SCALING_NOTE = (
    "The linewidth falls as (n*)^-2.94, roughly n^-3, while C6 and with it every peak "
    "separation grows as (n*)^11: higher Rydberg states resolve more resonances."
)


class Quantity(float):
    """A float tagged with a physical dimension, stored in the base unit of its class."""

    _base_unit: str = ""
    _units: Dict[str, float] = {}

    def __new__(cls, value: float, unit: Optional[str] = None):
        if unit is None:
            unit = cls._base_unit
        if unit not in cls._units:
            raise ValueError(f"Unit {unit!r} is not defined for {cls.__name__}, use one of {sorted(cls._units)}")
        return super().__new__(cls, float(value) * cls._units[unit])

    def _like(self, base_value: float) -> "Quantity":
        return type(self)(base_value)

    def _check_compatible(self, other: Any, operation: str) -> None:
        if type(other) is not type(self):
            raise TypeError(f"Can not {operation} {type(self).__name__} and {type(other).__name__}")

    @property
    def si(self) -> float:
        return float(self)

    def in_unit(self, unit: str) -> float:
        if unit not in self._units:
            raise ValueError(f"Unit {unit!r} is not defined for {type(self).__name__}")
        return float(self) / self._units[unit]

    def __add__(self, other):
        self._check_compatible(other, "add")
        return self._like(float(self) + float(other))

    def __sub__(self, other):
        self._check_compatible(other, "subtract")
        return self._like(float(self) - float(other))

    def __radd__(self, other):
        # sum() starts from a plain 0
        if not isinstance(other, Quantity) and other == 0:
            return self._like(float(self))
        return self.__add__(other)

    def __rsub__(self, other):
        self._check_compatible(other, "subtract")
        return self._like(float(other) - float(self))

    def __neg__(self):
        return self._like(-float(self))

    def __abs__(self):
        return self._like(abs(float(self)))

    def __mul__(self, other):
        if isinstance(other, Quantity):
            return float(self) * float(other)
        return self._like(float(self) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Quantity):
            return float(self) / float(other)
        return self._like(float(self) / other)

    def __eq__(self, other):
        if isinstance(other, Quantity):
            self._check_compatible(other, "compare")
        elif not isinstance(other, (int, float)):
            return NotImplemented
        return float(self) == float(other)

    def __ne__(self, other):
        equal = self.__eq__(other)
        return equal if equal is NotImplemented else not equal

    def __lt__(self, other):
        if isinstance(other, Quantity):
            self._check_compatible(other, "compare")
        return float(self) < float(other)

    def __le__(self, other):
        return self < other or self == other

    def __gt__(self, other):
        if isinstance(other, Quantity):
            self._check_compatible(other, "compare")
        return float(self) > float(other)

    def __ge__(self, other):
        return self > other or self == other

    __hash__ = float.__hash__

    def __repr__(self) -> str:
        return f"{type(self).__name__}({float(self)!r}, {self._base_unit!r})"


class AngularFrequency(Quantity):
    _base_unit = "rad/s"
    _units = {
        "rad/s": 1.0,
        "2pi*Hz": TWO_PI,
        "2pi*kHz": TWO_PI * 1e3,
        "2pi*MHz": TWO_PI * 1e6,
        "2pi*GHz": TWO_PI * 1e9,
    }

    def to_frequency(self) -> "Frequency":
        return Frequency(float(self) / TWO_PI)


class Frequency(Quantity):
    _base_unit = "Hz"
    _units = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}

    def to_angular(self) -> AngularFrequency:
        return AngularFrequency(float(self) * TWO_PI)


class Length(Quantity):
    _base_unit = "m"
    _units = {"m": 1.0, "um": 1e-6, "nm": 1e-9}


class Duration(Quantity):
    _base_unit = "s"
    _units = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


class InteractionCoefficient(Quantity):
    """C_m of a V = C_m / r^m interaction, in rad/s · m^m.

    Unit names use 'um^m' for micrometers to the power of the exponent.
    """

    _base_unit = "rad/s*m^m"
    _units = {"rad/s*m^m": 1.0, "2pi*Hz*um^m": TWO_PI, "2pi*kHz*um^m": TWO_PI * 1e3, "2pi*GHz*um^m": TWO_PI * 1e9}

    def __new__(cls, value: float, unit: Optional[str] = None, exponent: int = DEFAULT_EXPONENT):
        unit = cls._base_unit if unit is None else unit
        micrometer_scale = 1.0 if unit == cls._base_unit else 1e-6**exponent
        coefficient = super().__new__(cls, float(value) * micrometer_scale, unit)
        coefficient.exponent = exponent
        return coefficient

    def _like(self, base_value: float) -> "InteractionCoefficient":
        return InteractionCoefficient(base_value, exponent=self.exponent)

    def _check_compatible(self, other: Any, operation: str) -> None:
        super()._check_compatible(other, operation)
        if other.exponent != self.exponent:
            raise TypeError(f"Can not {operation} C_{self.exponent} and C_{other.exponent}")

    def in_unit(self, unit: str) -> float:
        micrometer_scale = 1.0 if unit == self._base_unit else 1e-6**self.exponent
        return super().in_unit(unit) / micrometer_scale

    def __repr__(self) -> str:
        return f"InteractionCoefficient({float(self)!r}, 'rad/s*m^m', exponent={self.exponent})"


AnyFrequency = Union[AngularFrequency, Frequency]


class PhysicalConfig(BaseModel):
    """The experimental side of a run: Rydberg level, lattice and laser.

    Frequencies are ordinary frequencies; c6_ghz_um6 is C6 / 2π. The default
    C6 for 70S is derived from a 2π × 146 kHz separation of the κ=2 and κ=3
    resonances at a = 10 μm, it is not an ab initio value.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    c6_ghz_um6: float = Field(default=876.0, gt=0)
    lattice_spacing_um: float = Field(default=10.0, gt=0)
    principal_n: int = Field(default=70, gt=0)
    quantum_defect: float = Field(default=3.13, ge=0)
    single_atom_rabi_khz: Optional[float] = Field(default=None, gt=0)
    filling: int = Field(default=1, ge=1)
    exponent: int = Field(default=DEFAULT_EXPONENT, ge=1)
    # Used when no single-atom Rabi frequency is given.
    rabi_over_interaction: float = Field(default=0.15, gt=0)
    max_cycle_time: float = Field(default=30.0, ge=0)
    resolvability_threshold: float = Field(default=DEFAULT_RESOLVABILITY_THRESHOLD, gt=0)

    @model_validator(mode="after")
    def check_quantum_defect(self) -> "PhysicalConfig":
        if self.principal_n <= self.quantum_defect:
            raise ValueError(f"principal_n ({self.principal_n}) must exceed quantum_defect ({self.quantum_defect})")
        return self

    @property
    def c6(self) -> InteractionCoefficient:
        return InteractionCoefficient(self.c6_ghz_um6, "2pi*GHz*um^m", exponent=self.exponent)

    @property
    def lattice_spacing(self) -> Length:
        return Length(self.lattice_spacing_um, "um")

    @property
    def effective_n(self) -> float:
        return self.principal_n - self.quantum_defect


def interaction_strength(config: PhysicalConfig) -> AngularFrequency:
    """V = C_m / a^m."""
    return AngularFrequency(config.c6.si / config.lattice_spacing.si**config.exponent)


def c6_from_interaction(interaction: AngularFrequency, spacing: Length, exponent: int = DEFAULT_EXPONENT):
    return InteractionCoefficient(interaction.si * spacing.si**exponent, exponent=exponent)


def rydberg_linewidth(principal_n: int, quantum_defect: float) -> AngularFrequency:
    """Γ_n = 2π × 0.699 GHz × (n - δ)^-2.94."""
    if principal_n <= quantum_defect:
        raise DomainError(f"principal_n ({principal_n}) must exceed quantum_defect ({quantum_defect})")
    effective_n = principal_n - quantum_defect
    return AngularFrequency(LINEWIDTH_PREFACTOR_GHZ * effective_n**LINEWIDTH_EXPONENT, "2pi*GHz")


def rydberg_lifetime(linewidth: AngularFrequency) -> Duration:
    if not isinstance(linewidth, AngularFrequency):
        raise TypeError(f"A linewidth is a decay rate, expected AngularFrequency, got {type(linewidth).__name__}")
    if linewidth <= AngularFrequency(0):
        raise DomainError(f"The linewidth must be positive, got {linewidth!r}")
    return Duration(1.0 / linewidth.si)


def predicted_peak_separation(config: PhysicalConfig, kappa: int) -> AngularFrequency:
    """Δ_κ - Δ_{κ+1} = C_m / (κ (κ + 1) a^m)."""
    if kappa < 2:
        raise DomainError(f"kappa must be at least 2, got {kappa}")
    return interaction_strength(config) / (kappa * (kappa + 1))


def physical_resonance_detuning(config: PhysicalConfig, kappa: int) -> AngularFrequency:
    return AngularFrequency(resonance_detuning(kappa, interaction_strength(config).si))


def collective_rabi_frequency(config: PhysicalConfig) -> AngularFrequency:
    """sqrt(N0) Ω0 when the single-atom Rabi frequency is known, otherwise a fixed fraction of V."""
    if config.single_atom_rabi_khz is None:
        return interaction_strength(config) * config.rabi_over_interaction
    single_atom = Frequency(config.single_atom_rabi_khz, "kHz").to_angular()
    return AngularFrequency(collective_rabi(single_atom.si, config.filling))


def excitation_timescale(rabi_collective: AnyFrequency, t_max_in_inverse_rabi: float) -> Duration:
    """Physical duration of t_max / Ω.

    The result depends on which frequency Ω is: for an AngularFrequency the
    time is t_max / ω, for an ordinary Frequency it is t_max / f, 2π longer.
    """
    if not isinstance(rabi_collective, (AngularFrequency, Frequency)):
        raise TypeError(f"Expected AngularFrequency or Frequency, got {type(rabi_collective).__name__}")
    if rabi_collective.si <= 0:
        raise DomainError(f"The Rabi frequency must be positive, got {rabi_collective!r}")
    if t_max_in_inverse_rabi < 0:
        raise DomainError(f"The excitation time can not be negative, got {t_max_in_inverse_rabi}")
    return Duration(t_max_in_inverse_rabi / rabi_collective.si)


@dc.dataclass(frozen=True)
class ResolvabilityEntry:
    kappa: int
    resonance_detuning: AngularFrequency
    separation: AngularFrequency
    linewidth: AngularFrequency
    resolvable: bool

    @property
    def ratio(self) -> float:
        return self.separation / self.linewidth

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "resonance_detuning_hz": self.resonance_detuning.to_frequency().si,
            "separation_hz": self.separation.to_frequency().si,
            "linewidth_hz": self.linewidth.to_frequency().si,
            "ratio": self.ratio,
            "resolvable": self.resolvable,
        }


@dc.dataclass(frozen=True)
class ResolvabilityReport:
    entries: List[ResolvabilityEntry]
    threshold: float
    scaling_note: str = SCALING_NOTE

    def entry(self, kappa: int) -> ResolvabilityEntry:
        for entry in self.entries:
            if entry.kappa == kappa:
                return entry
        raise KeyError(f"No entry for kappa={kappa}")

    @property
    def max_resolvable_kappa(self) -> Optional[int]:
        resolvable = [entry.kappa for entry in self.entries if entry.resolvable]
        return max(resolvable) if resolvable else None


def resolvability_report(
    config: PhysicalConfig, threshold: Optional[float] = None, kappas: Iterable[int] = DEFAULT_KAPPAS
) -> ResolvabilityReport:
    """For each κ, whether the κ / κ+1 separation exceeds threshold × Γ_n."""
    threshold = config.resolvability_threshold if threshold is None else threshold
    linewidth = rydberg_linewidth(config.principal_n, config.quantum_defect)
    entries = []
    for kappa in kappas:
        separation = predicted_peak_separation(config, kappa)
        entries.append(
            ResolvabilityEntry(
                kappa=kappa,
                resonance_detuning=physical_resonance_detuning(config, kappa),
                separation=separation,
                linewidth=linewidth,
                resolvable=separation > linewidth * threshold,
            )
        )
    return ResolvabilityReport(entries=entries, threshold=threshold)


@dc.dataclass(frozen=True)
class NScalingEntry:
    principal_n: int
    separation: AngularFrequency
    linewidth: AngularFrequency
    resolvable: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "principal_n": self.principal_n,
            "separation_hz": self.separation.to_frequency().si,
            "linewidth_hz": self.linewidth.to_frequency().si,
            "ratio": self.separation / self.linewidth,
            "resolvable": self.resolvable,
        }


def resolvability_vs_n(
    config: PhysicalConfig, principal_ns: Iterable[int], kappa: int = 2, threshold: Optional[float] = None
) -> List[NScalingEntry]:
    """Separation of the κ / κ+1 pair and the linewidth for other n at fixed spacing.

    C6 is extrapolated from the configured level with the (n*)^11 law.
    """
    threshold = config.resolvability_threshold if threshold is None else threshold
    reference = predicted_peak_separation(config, kappa)
    entries = []
    for principal_n in principal_ns:
        effective_n = principal_n - config.quantum_defect
        if effective_n <= 0:
            raise DomainError(f"principal_n ({principal_n}) must exceed quantum_defect ({config.quantum_defect})")
        separation = reference * (effective_n / config.effective_n) ** C6_SCALING_EXPONENT
        linewidth = rydberg_linewidth(principal_n, config.quantum_defect)
        entries.append(
            NScalingEntry(
                principal_n=principal_n,
                separation=separation,
                linewidth=linewidth,
                resolvable=separation > linewidth * threshold,
            )
        )
    return entries


@dc.dataclass(frozen=True)
class FeasibilityReport:
    """Everything needed to judge an experiment: scales, resolvability and the time budget.

    The excitation time is given for both readings of t_max / Ω; the ordinary
    one, t_max / f, is the one that matches quoted μs-scale cycle times.
    """

    config: PhysicalConfig
    interaction: AngularFrequency
    rabi: AngularFrequency
    linewidth: AngularFrequency
    lifetime: Duration
    excitation_time_angular: Duration
    excitation_time_ordinary: Duration
    resolvability: ResolvabilityReport
    n_scaling: List[NScalingEntry]

    @property
    def lifetime_margin(self) -> float:
        """Lifetime over the excitation time, ordinary reading. Should exceed 10."""
        return self.lifetime / self.excitation_time_ordinary

    @property
    def lifetime_margin_angular(self) -> float:
        return self.lifetime / self.excitation_time_angular

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frequency_convention": FREQUENCY_CONVENTION,
            "physical": self.config.model_dump(),
            "interaction_hz": self.interaction.to_frequency().si,
            "rabi_hz": self.rabi.to_frequency().si,
            "linewidth_hz": self.linewidth.to_frequency().si,
            "lifetime_s": self.lifetime.si,
            "excitation_time_s": {
                "ordinary": self.excitation_time_ordinary.si,
                "angular": self.excitation_time_angular.si,
            },
            "lifetime_margin": {"ordinary": self.lifetime_margin, "angular": self.lifetime_margin_angular},
            "resolvability_threshold": self.resolvability.threshold,
            "kappas": [entry.to_dict() for entry in self.resolvability.entries],
            "max_resolvable_kappa": self.resolvability.max_resolvable_kappa,
            "n_scaling": [entry.to_dict() for entry in self.n_scaling],
            "scaling_note": self.resolvability.scaling_note,
        }


def feasibility_report(config: PhysicalConfig, principal_ns: Iterable[int] = (30, 40, 50, 60, 70, 80, 90, 100)):
    interaction = interaction_strength(config)
    rabi = collective_rabi_frequency(config)
    linewidth = rydberg_linewidth(config.principal_n, config.quantum_defect)
    report = FeasibilityReport(
        config=config,
        interaction=interaction,
        rabi=rabi,
        linewidth=linewidth,
        lifetime=rydberg_lifetime(linewidth),
        excitation_time_angular=excitation_timescale(rabi, config.max_cycle_time),
        excitation_time_ordinary=excitation_timescale(rabi.to_frequency(), config.max_cycle_time),
        resolvability=resolvability_report(config),
        n_scaling=resolvability_vs_n(config, principal_ns),
    )
    _logger.info(
        f"n={config.principal_n}, a={config.lattice_spacing_um} um: "
        f"V/2π={interaction.to_frequency().in_unit('kHz'):.1f} kHz, "
        f"Γ/2π={linewidth.to_frequency().in_unit('kHz'):.2f} kHz, "
        f"resolvable up to κ={report.resolvability.max_resolvable_kappa}"
    )
    return report
