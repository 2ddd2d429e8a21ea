from pathlib import Path

import pytest

from rydbergscan.lattice import LatticeParams


@pytest.fixture
def data_dir():
    return Path(__file__).parent / "data"


@pytest.fixture
def golden_dir(data_dir):
    return data_dir / "golden"


@pytest.fixture
def test_output_dir(tmp_path):
    return tmp_path / "output"


@pytest.fixture
def fig2_params() -> LatticeParams:
    """The 8-site chain of the excitation-spectrum figures, in units of V."""
    return LatticeParams(n_sites=8, rabi=0.15, interaction=1.0)


@pytest.fixture
def small_params() -> LatticeParams:
    return LatticeParams(n_sites=4, rabi=0.3, detuning=-0.4, interaction=1.0)
