import warnings
from pathlib import Path

import numpy as np
import pytest

from emeflow import GratingSpec
from emeflow.config import load_config
from emeflow.ensemble import simulate

ROOT = Path(__file__).resolve().parents[1]
LAMBDA = 500e-9
CONVERGENCE_SEEDS = tuple(range(1, 11))
CONVERGENCE_PHOTONS = 5000


def ronchi(n: int) -> GratingSpec:
    """d = 20 lambda, slit width d/2, lambda = 500 nm."""
    return GratingSpec(n, 20 * LAMBDA, 10 * LAMBDA, LAMBDA)


@pytest.fixture(scope="session")
def fig3_config():
    return load_config(ROOT / "configs" / "fig3.yaml", "histogram")


@pytest.fixture(scope="session")
def fig3_runs(fig3_config):
    """5000 photons for each of ten seeds; shorter runs are prefixes of these."""
    cfg = fig3_config
    runs = {}
    for seed in CONVERGENCE_SEEDS:
        runs[seed] = simulate(
            cfg.grating, cfg.quadrature, cfg.polarization, cfg.integrator,
            CONVERGENCE_PHOTONS, seed,
        )
    return runs


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def _quiet_paraxial_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*less than 5 wavelengths.*")
        yield


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def add(label: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        print(ACCEPTANCE_LINES[-1])

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
