"""Shipped experiment configurations, stored as JSON next to the package."""

import importlib.resources
from typing import List

from pydantic import ValidationError

from rydbergscan.errors import ConfigurationError


PRESET_SUFFIX = ".json"


class UnknownPreset(ConfigurationError):
    def __init__(self, name: str, *args: object) -> None:
        message = f"There is no preset with this name: {name}. Available: {', '.join(preset_names())}"
        super().__init__(message, *args)


def _preset_dir():
    return importlib.resources.files("rydbergscan") / "preset_configs"


def preset_names() -> List[str]:
    return sorted(
        entry.name[: -len(PRESET_SUFFIX)] for entry in _preset_dir().iterdir() if entry.name.endswith(PRESET_SUFFIX)
    )


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise UnknownPreset(name)
    return (_preset_dir() / f"{name}{PRESET_SUFFIX}").read_text(encoding="utf-8")


def load_preset(name: str):
    """The validated ExperimentConfig of a preset."""
    from rydbergscan.config import ExperimentConfig, format_validation_errors

    try:
        return ExperimentConfig.from_json_str(preset_text(name))
    except ValidationError as exc:
        raise ConfigurationError(format_validation_errors(exc.errors(), source=f"preset {name}")) from exc
