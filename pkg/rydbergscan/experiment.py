"""
Runs an experiment from its configuration and writes the artifacts.

Each mode of ExperimentConfig has an ExperimentMode subclass that registers
itself with ExperimentModeFactory. The ExperimentRunner checks the settings,
picks the mode and hands it an ArtifactWriter; every file goes through that
writer so CSV and JSON output share one header and one formatting.
"""

import abc
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from pydantic import ValidationError

from rydbergscan.config import ExperimentConfig, format_validation_errors
from rydbergscan.dynamics import SweepResult, sweep
from rydbergscan.errors import ArtifactIOError, ConfigurationError, NumericalError, PipelineError, RydbergScanError
from rydbergscan.extraction import ExtractionReport, extract, extract_from_sweep, round_trip
from rydbergscan.presets import load_preset, preset_names, preset_text
from rydbergscan.spectrum import MAX_SITES_SPECTRUM, scan_spectrum
from rydbergscan.units import FREQUENCY_CONVENTION, feasibility_report, interaction_strength


_logger = logging.getLogger(__name__)


SCHEMA_VERSION = "1"


class UnknownExperimentMode(ConfigurationError):
    def __init__(self, mode: str, *args: object) -> None:
        message = f"There is no experiment mode with this name: {mode}"
        super().__init__(message, *args)


def format_float(value: float) -> str:
    """Shortest decimal that reads back as the same double."""
    return repr(float(value))


class ArtifactWriter:
    """Writes CSV and JSON artifacts with the schema version and config hash of a run."""

    def __init__(self, output_dir: Path, config: ExperimentConfig) -> None:
        self._output_dir = Path(output_dir)
        self._mode = config.mode
        self._config_hash = config.config_hash()
        self._written: List[Path] = []

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    @property
    def written(self) -> List[Path]:
        return list(self._written)

    def prepare(self) -> None:
        try:
            self._output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ArtifactIOError(f"Can not create output directory {self._output_dir}: {exc}") from exc

    def _header_lines(self, extra: Optional[Dict[str, str]]) -> List[str]:
        header = {"schema_version": SCHEMA_VERSION, "config_hash": self._config_hash, "mode": self._mode}
        header.update(extra or {})
        return [f"# {key}: {value}" for key, value in header.items()]

    def write_csv(self, name: str, frame: pd.DataFrame, extra_header: Optional[Dict[str, str]] = None) -> Path:
        path = self._output_dir / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as f_out:
                f_out.write("\n".join(self._header_lines(extra_header)) + "\n")
                frame.to_csv(f_out, index=False, float_format=format_float, lineterminator="\n")
        except OSError as exc:
            raise ArtifactIOError(f"Can not write {path}: {exc}") from exc
        _logger.info(f"Wrote {path}")
        self._written.append(path)
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._output_dir / name
        document = {"schema_version": SCHEMA_VERSION, "config_hash": self._config_hash, "mode": self._mode}
        document.update(payload)
        try:
            path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise ArtifactIOError(f"Can not write {path}: {exc}") from exc
        _logger.info(f"Wrote {path}")
        self._written.append(path)
        return path


def read_sweep_csv(path: Union[Path, str]) -> pd.DataFrame:
    """Load a sweep table written by the sweep mode, skipping the '#' header lines."""
    try:
        return pd.read_csv(path, comment="#")
    except FileNotFoundError as exc:
        raise ConfigurationError(f"Sweep input file does not exist: {path}") from exc
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigurationError(f"Can not read sweep input file {path}: {exc}") from exc


class ExperimentModeFactory:
    _implementations = {}

    @classmethod
    def register(cls, mode_class: type):
        cls._implementations[mode_class.name] = mode_class

    @classmethod
    def implementation_names(cls) -> List[str]:
        return sorted(cls._implementations.keys())

    @classmethod
    def from_config(cls, config: ExperimentConfig, max_workers: Optional[int] = None) -> "ExperimentMode":
        if config.mode not in cls._implementations:
            raise UnknownExperimentMode(config.mode)
        return cls._implementations[config.mode](config, max_workers=max_workers)


class ExperimentMode(abc.ABC):
    name: str = ""

    def __init_subclass__(cls) -> None:
        super().__init_subclass__()
        if cls.name:
            ExperimentModeFactory.register(cls)

    def __init__(self, config: ExperimentConfig, max_workers: Optional[int] = None) -> None:
        self._config = config
        self._max_workers = max_workers

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    def get_settings_errors(self) -> List[str]:
        return []

    @abc.abstractmethod
    def run(self, writer: ArtifactWriter) -> None:
        ...

    def _simulate_sweep(self) -> SweepResult:
        config = self._config
        try:
            result = sweep(
                config.lattice.to_params(),
                config.detuning_grid(),
                config.grids.cycle_times.averaging_times(),
                trace_times=config.grids.cycle_times.traces,
                max_workers=self._max_workers,
            )
        except RydbergScanError as exc:
            raise PipelineError("sweep", exc) from exc
        violations = result.bounds_violations()
        if violations:
            raise PipelineError("sweep", NumericalError("; ".join(violations)))
        return result

    def _write_sweep(self, writer: ArtifactWriter, result: SweepResult) -> Path:
        config = self._config
        extra_header = {"time_unit": "1/rabi", "detuning_unit": "V"}
        detuning_unit_hz = None
        if config.physical is not None and config.output.physical_columns:
            detuning_unit_hz = interaction_strength(config.physical).to_frequency().si
            extra_header["frequency_convention"] = FREQUENCY_CONVENTION
        return writer.write_csv("sweep.csv", result.to_dataframe(detuning_unit_hz), extra_header)


class SpectrumMode(ExperimentMode):
    """Eigenvalues of the full Hamiltonian over Δ/V, with the H0 line of |G>."""

    name = "spectrum"

    def get_settings_errors(self) -> List[str]:
        if self._config.lattice.n_sites > MAX_SITES_SPECTRUM:
            return [f"Spectrum scans are limited to {MAX_SITES_SPECTRUM} sites, got {self._config.lattice.n_sites}"]
        return []

    def run(self, writer: ArtifactWriter) -> None:
        config = self._config
        try:
            scan = scan_spectrum(config.lattice.to_params(), config.detuning_grid(), max_workers=self._max_workers)
        except RydbergScanError as exc:
            raise PipelineError("spectrum", exc) from exc
        writer.write_csv("spectrum.csv", scan.to_dataframe(), {"energy_unit": "V", "detuning_unit": "V"})


class SweepMode(ExperimentMode):
    """<N_e> and <N_ee> after a laser cycle, per cycle time and averaged."""

    name = "sweep"

    def run(self, writer: ArtifactWriter) -> None:
        self._write_sweep(writer, self._simulate_sweep())


class ExtractMode(ExperimentMode):
    """C6 from the resonance peaks of a stored or freshly simulated sweep.

    With a physical section the peak positions are scaled by V/2π in Hz and the
    lattice spacing is taken in μm, so C6 comes out in Hz · μm^m.
    """

    name = "extract"

    def _scales(self):
        config = self._config
        if config.physical is not None:
            interaction = interaction_strength(config.physical).to_frequency().si
            return interaction, config.physical.lattice_spacing_um, config.physical.exponent, "Hz*um^m"
        exponent = config.lattice.exponent if config.lattice else 6
        interaction = config.lattice.interaction if config.lattice else 1.0
        return interaction, config.extraction.lattice_spacing, exponent, "reduced"

    def _extract_stored(self) -> ExtractionReport:
        settings = self._config.extraction
        frame = read_sweep_csv(settings.input_file)
        column = f"{settings.observable}_avg"
        if "delta_over_v" not in frame.columns or column not in frame.columns:
            raise ConfigurationError(f"{settings.input_file} has no 'delta_over_v' and '{column}' columns")
        interaction, spacing, exponent, _ = self._scales()
        return extract(
            frame["delta_over_v"].to_numpy(dtype=float),
            frame[column].to_numpy(dtype=float),
            options=settings.to_peak_options(),
            lattice_spacing=spacing,
            interaction=interaction,
            observable=settings.observable,
            exponent=exponent,
        )

    def run(self, writer: ArtifactWriter) -> None:
        settings = self._config.extraction
        if settings.input_file is not None:
            _logger.info(f"Extracting from stored sweep {settings.input_file}")
            report = self._extract_stored()
        else:
            result = self._simulate_sweep()
            self._write_sweep(writer, result)
            interaction, spacing, _, _ = self._scales()
            report = extract_from_sweep(
                result,
                settings.to_peak_options(),
                lattice_spacing=spacing,
                interaction=interaction,
                observable=settings.observable,
            )
        payload = report.to_dict()
        payload["c6_unit"] = self._scales()[3]
        writer.write_json("extraction.json", payload)


class FeasibilityMode(ExperimentMode):
    """Resonance separations against the Rydberg linewidth for a physical setup."""

    name = "feasibility"

    def run(self, writer: ArtifactWriter) -> None:
        writer.write_json("feasibility.json", feasibility_report(self._config.physical).to_dict())


class RoundTripMode(ExperimentMode):
    """Simulate with a known C6 and check that extraction recovers it."""

    name = "roundtrip"

    def run(self, writer: ArtifactWriter) -> None:
        config = self._config
        report = round_trip(
            config.lattice.to_params(),
            config.detuning_grid(),
            config.grids.cycle_times.averaging_times(),
            options=config.extraction.to_peak_options(),
            lattice_spacing=config.extraction.lattice_spacing,
            observable=config.extraction.observable,
            max_workers=self._max_workers,
        )
        payload = report.to_dict()
        payload["c6_unit"] = "reduced"
        writer.write_json("roundtrip.json", payload)


class ExperimentRunner:
    def __init__(
        self, config: ExperimentConfig, output_dir: Optional[Path] = None, max_workers: Optional[int] = None
    ) -> None:
        self._config = config
        self._output_dir = Path(output_dir) if output_dir else config.output.directory
        self._max_workers = max_workers
        self._mode = ExperimentModeFactory.from_config(config, max_workers=max_workers)

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    @property
    def mode(self) -> "ExperimentMode":
        return self._mode

    def get_settings_errors(self) -> List[str]:
        """Check the configuration, but don't raise exceptions. Just list the errors."""
        errors = []
        if self._output_dir.exists() and not self._output_dir.is_dir():
            errors.append(f"Output path exists but is not a directory: {self._output_dir}")
        if self._max_workers is not None and self._max_workers < 1:
            errors.append(f"threads must be at least 1, got {self._max_workers}")
        errors.extend(self._mode.get_settings_errors())
        return errors

    def can_run(self) -> bool:
        return not self.get_settings_errors()

    def validate_settings(self) -> None:
        """Raise ConfigurationError if any configuration errors are found."""
        errors = self.get_settings_errors()
        if errors:
            raise ConfigurationError("\n".join(errors))

    def run(self) -> List[Path]:
        self.validate_settings()
        writer = ArtifactWriter(self._output_dir, self._config)
        writer.prepare()
        _logger.info(f"Running mode '{self._config.mode}', output in {self._output_dir}")
        self._mode.run(writer)
        return writer.written


# ##############################################################################
# Command functions
# ##############################################################################
# These are the entry points for the CLI. They are also easier to test than
# the CLI itself.
# ##############################################################################


def _load_config(config_path: Optional[Path], preset: Optional[str]) -> ExperimentConfig:
    if config_path and preset:
        raise ConfigurationError("Give either a config file or a preset, not both")
    if preset:
        return load_preset(preset)
    if config_path:
        return ExperimentConfig.from_file(Path(config_path).expanduser().absolute())
    raise ConfigurationError("Nothing to run: give a config file or a preset")


def command_run(
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
    output_dir: Optional[Path] = None,
    threads: Optional[int] = None,
) -> int:
    """Run one experiment and return the process exit status."""
    try:
        config = _load_config(config_path, preset)
        runner = ExperimentRunner(
            config, output_dir=Path(output_dir).expanduser() if output_dir else None, max_workers=threads
        )
        for path in runner.run():
            print(path)
    except RydbergScanError as exc:
        _logger.error(str(exc))
        return exc.exit_code
    except ValidationError as exc:
        _logger.error(format_validation_errors(exc.errors()))
        return ConfigurationError.exit_code
    return 0


def command_list_presets() -> None:
    for name in preset_names():
        print(name)


def command_show_preset(name: str) -> int:
    try:
        text = preset_text(name)
    except RydbergScanError as exc:
        _logger.error(str(exc))
        return exc.exit_code
    print(text.rstrip())
    return 0
