import warnings

import pytest

from sleepwake import analysis, experiments
from sleepwake.errors import NegativeConcentration
from sleepwake.integrator import simulate
from sleepwake.params import default_parameters


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeConcentration)
        return fn(*a, **kw)


@pytest.fixture(scope="session")
def params():
    return default_parameters()


@pytest.fixture(scope="session")
def default_run(params):
    return _quiet(simulate, params)


@pytest.fixture(scope="session")
def default_report(default_run):
    return experiments.analyze_trajectory(default_run)


@pytest.fixture(scope="session")
def sweep(params):
    return analysis.epsilon_stability_sweep(params, (0.25, 0.40), 0.005)


@pytest.fixture(scope="session")
def knockout(params):
    return _quiet(experiments.run_orexin_knockout, None, 0.2, params)


@pytest.fixture(scope="session")
def camp_replay(params):
    return _quiet(experiments.replay_schedule, experiments.sleep_camp_schedule(0), None, params)


_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line, print it, then assert it."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        request.config.stash[_RESULTS].append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
