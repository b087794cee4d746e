from pathlib import Path

import pytest

from ductwarp.env import LinearDuct, load_profile
from ductwarp.synth import Geometry, ModeProvider, SolverConfig, SourcePulse, synthesize_waveform

DATA = Path(__file__).resolve().parents[1] / "src" / "ductwarp" / "data"

# Idealized Arctic surface duct and the geometry used for the 105 km synthetics.
DUCT = LinearDuct(1434.0, 4.359e-5, 400.0)
RANGE = 105e3
T_R = RANGE / DUCT.c0
SEP_GEOMETRY = Geometry(60.0, 60.0, RANGE)
BAND = SourcePulse(10.0, 100.0)
SYNTH_FS = 400.0
SYNTH_DURATION = 4.0
THREE_MODES = SolverConfig(max_modes=3)


@pytest.fixture(scope="session")
def duct():
    return DUCT


@pytest.fixture(scope="session")
def central_ice():
    return load_profile(DATA / "central_ice.csv", "central ice")


@pytest.fixture(scope="session")
def dual_channel():
    return load_profile(DATA / "chukchi_dual.csv", "dual channel")


@pytest.fixture(scope="session")
def duct_provider():
    return ModeProvider(DUCT.to_profile(), THREE_MODES)


@pytest.fixture(scope="session")
def single_mode_waveforms(duct_provider):
    """Mode 1, 2 and 3 synthesized separately on the linear duct at 105 km."""
    return {
        m: synthesize_waveform(DUCT.to_profile(), SEP_GEOMETRY, BAND, SYNTH_FS, SYNTH_DURATION,
                               config=THREE_MODES, modes=[m], provider=duct_provider)
        for m in (1, 2, 3)
    }


# ---------------------------------------------------------------------------
# one pass/fail line per acceptance criterion in the terminal summary

_REPORTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    prev = _REPORTS.get(n)
    failed = rep.failed or (prev is not None and prev[1] == "FAIL")
    if rep.when == "call" or rep.failed:
        _REPORTS[n] = (title, "FAIL" if failed else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _REPORTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_REPORTS):
        title, status = _REPORTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}")
