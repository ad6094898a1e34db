import json
from pathlib import Path

import numpy as np
import pytest

from chiralhom.microstructure import LaminateSpec, Phase, PhaseTable

ROOT = Path(__file__).resolve().parents[1]
TWO_PHASE_CONFIG = ROOT / "configs" / "two_phase.json"


@pytest.fixture
def two_phase():
    """(a, kappa, m_sat) = (1, 1, 1) and (2, -1, 0.5), equiprobable."""
    return PhaseTable((Phase(1.0, 1.0, 1.0), Phase(2.0, -1.0, 0.5)), (0.5, 0.5))


@pytest.fixture
def rich_table():
    """Three phases with anisotropy and tilted easy axes."""
    s = 1 / np.sqrt(2)
    return PhaseTable(
        (
            Phase(1.0, 1.0, 1.0, 0.5, (0.0, 0.0, 1.0)),
            Phase(2.0, -1.0, 0.5, 0.2, (s, 0.0, s)),
            Phase(0.7, 0.3, 0.8, 0.0, (1.0, 0.0, 0.0)),
        ),
        (0.3, 0.5, 0.2),
    )


@pytest.fixture
def two_phase_spec(two_phase):
    return LaminateSpec(two_phase, (1.0, 1.0))


@pytest.fixture
def raw_config():
    return json.loads(TWO_PHASE_CONFIG.read_text())


def tangent_input(rng, s=None):
    """Random unit ``s`` and a 3x3 matrix whose rows are tangent at ``s``."""
    if s is None:
        s = rng.standard_normal(3)
        s /= np.linalg.norm(s)
    B = rng.standard_normal((3, 3))
    return s, B - np.outer(B @ s, s)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
