"""
Model classes for the configuration of an experiment run.

These are Pydantic model classes. A configuration file is JSON or TOML with the
same structure; the physics is in reduced units (V = 1 unless lattice.interaction
says otherwise) and the optional `physical` section ties it to a real experiment.
"""

import hashlib
import json
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_core import ErrorDetails

from rydbergscan.dynamics import DEFAULT_CYCLE_TIMES, DEFAULT_DETUNING_GRID
from rydbergscan.errors import ConfigurationError
from rydbergscan.extraction import PeakOptions
from rydbergscan.lattice import DEFAULT_EXPONENT, MAX_SITES, LatticeParams
from rydbergscan.spectrum import DEFAULT_RATIO_GRID
from rydbergscan.units import PhysicalConfig


Mode = Literal["spectrum", "sweep", "extract", "feasibility", "roundtrip"]

MODES_NEEDING_LATTICE = {"spectrum", "sweep", "roundtrip"}


class LatticeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_sites: int = Field(ge=1, le=MAX_SITES)
    rabi: float = 0.15
    # Replaced point by point in spectrum scans and sweeps.
    detuning: float = 0.0
    interaction: float = Field(default=1.0, gt=0)
    exponent: int = Field(default=DEFAULT_EXPONENT, ge=1)

    def to_params(self) -> LatticeParams:
        return LatticeParams(**self.model_dump())


class GridConfig(BaseModel):
    """A linear grid of Δ/V values."""

    model_config = ConfigDict(extra="forbid")

    min: float
    max: float
    count: int

    @model_validator(mode="after")
    def check_grid(self) -> "GridConfig":
        if self.count < 2:
            raise ValueError(f"A grid needs at least 2 points, got count={self.count}")
        if self.min >= self.max:
            raise ValueError(f"Grid min ({self.min}) must be below max ({self.max})")
        return self

    def to_array(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


class CycleTimeConfig(BaseModel):
    """Cycle times in units of 1/Ω: a linear range or an explicit list, plus optional traces."""

    model_config = ConfigDict(extra="forbid")

    min: Optional[float] = None
    max: Optional[float] = None
    count: Optional[int] = None
    values: Optional[List[float]] = None

    # Recorded one by one in the sweep output, left out of the average.
    traces: List[float] = []

    @model_validator(mode="after")
    def check_range_or_values(self) -> "CycleTimeConfig":
        range_fields = [self.min, self.max, self.count]
        if self.values is not None:
            if any(field is not None for field in range_fields):
                raise ValueError("Give either values or min/max/count for the cycle times, not both")
            if not self.values:
                raise ValueError("values must list at least one cycle time")
        elif any(field is None for field in range_fields):
            raise ValueError("A cycle-time range needs min, max and count")
        elif self.count < 2 or self.min > self.max:
            raise ValueError(f"Invalid cycle-time range: min={self.min}, max={self.max}, count={self.count}")
        if any(time < 0 for time in (self.values or []) + self.traces + [self.min or 0.0]):
            raise ValueError("Cycle times can not be negative")
        for name, values in [("values", self.values or []), ("traces", self.traces)]:
            if len(set(values)) != len(values):
                raise ValueError(f"Cycle-time {name} must not repeat, got {values}")
        return self

    def averaging_times(self) -> np.ndarray:
        if self.values is not None:
            return np.array(self.values, dtype=float)
        return np.linspace(self.min, self.max, self.count)


def _default_cycle_times() -> CycleTimeConfig:
    start, stop, count = DEFAULT_CYCLE_TIMES
    return CycleTimeConfig(min=start, max=stop, count=count)


class GridsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # When left out, each mode uses its own default range.
    detuning: Optional[GridConfig] = None
    cycle_times: CycleTimeConfig = Field(default_factory=_default_cycle_times)


class ExtractionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    observable: Literal["ne", "nee"] = "ne"
    min_prominence: float = Field(default=0.1, gt=0)
    exclusion_half_width: float = Field(default=0.15, ge=0)
    max_kappa: int = Field(default=10, ge=3)
    # Reduced units; a physical section takes precedence.
    lattice_spacing: float = Field(default=1.0, gt=0)
    # A stored sweep CSV to analyze instead of simulating one.
    input_file: Optional[Path] = None

    def to_peak_options(self) -> PeakOptions:
        return PeakOptions(
            min_prominence=self.min_prominence,
            exclusion_half_width=self.exclusion_half_width,
            max_kappa=self.max_kappa,
        )


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Path = Path("output")
    # Adds delta_hz to sweep tables when a physical section is present.
    physical_columns: bool = True


class ExperimentConfig(BaseModel):
    """Model, stores the configuration of one experiment run"""

    model_config = ConfigDict(extra="forbid")

    mode: Mode
    lattice: Optional[LatticeConfig] = None
    grids: GridsConfig = Field(default_factory=GridsConfig)
    extraction: ExtractionConfig = Field(default_factory=ExtractionConfig)
    physical: Optional[PhysicalConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def check_required_sections(self) -> "ExperimentConfig":
        if self.mode in MODES_NEEDING_LATTICE and self.lattice is None:
            raise ValueError(f"Mode '{self.mode}' needs a lattice section")
        if self.mode == "extract" and self.lattice is None and self.extraction.input_file is None:
            raise ValueError("Mode 'extract' needs a lattice section or extraction.input_file")
        if self.mode == "feasibility" and self.physical is None:
            raise ValueError("Mode 'feasibility' needs a physical section")
        if self.physical is not None and self.lattice is not None and self.physical.exponent != self.lattice.exponent:
            raise ValueError(
                f"physical.exponent ({self.physical.exponent}) must match lattice.exponent ({self.lattice.exponent})"
            )
        return self

    def detuning_grid(self) -> np.ndarray:
        if self.grids.detuning is not None:
            return self.grids.detuning.to_array()
        start, stop, count = DEFAULT_RATIO_GRID if self.mode == "spectrum" else DEFAULT_DETUNING_GRID
        return np.linspace(start, stop, count)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of everything but the output section."""
        canonical = json.dumps(self.model_dump(mode="json", exclude={"output"}), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_json_str(cls, json_str: str) -> "ExperimentConfig":
        return cls.model_validate_json(json_str)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        cfg_path = Path(path)
        contents = cfg_path.read_text()
        return cls.from_json_str(contents)

    @classmethod
    def from_toml_file(cls, path: str | Path) -> "ExperimentConfig":
        cfg_path = Path(path)
        return cls.model_validate(tomllib.loads(cfg_path.read_text()))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        return cls.model_validate(data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """Load and validate a .json or .toml file, raising ConfigurationError with field diagnostics."""
        cfg_path = Path(path)
        try:
            if cfg_path.suffix == ".toml":
                return cls.from_toml_file(cfg_path)
            return cls.from_json_file(cfg_path)
        except ValidationError as exc:
            raise ConfigurationError(format_validation_errors(exc.errors(), source=str(cfg_path))) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"Invalid TOML in {cfg_path}: {exc}") from exc
        except OSError as exc:
            raise ConfigurationError(f"Can not read config file {cfg_path}: {exc}") from exc


def format_validation_errors(errors: List[ErrorDetails], source: str = "config") -> str:
    """One line per failing field, as dotted paths: 'lattice.n_sites: Field required'."""
    lines = [f"Invalid configuration in {source}:"]
    for error in errors:
        location = ".".join(str(part) for part in error["loc"]) or "(root)"
        lines.append(f"  {location}: {error['msg']}")
    return "\n".join(lines)


def validation_errors(data: Dict[str, Any]) -> List[ErrorDetails]:
    try:
        ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        return exc.errors()
    else:
        return []
