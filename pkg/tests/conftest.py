import pytest

from pies.engine import schedule_model
from pies.milp import SolveOptions
from pies.model import ScenarioConfig, example_model


@pytest.fixture(scope="session")
def park():
    return example_model()


@pytest.fixture(scope="session")
def scenario_runs(park):
    """(schedule, solution, problem) for scenarios 1-4 of the shipped config."""
    opts = SolveOptions(backend="highs")
    return {n: schedule_model(park, ScenarioConfig.numbered(n), opts) for n in (1, 2, 3, 4)}


# -- acceptance reporting -------------------------------------------------------

CRITERIA: dict = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        if not ok and not self.detail:
            self.detail = f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        CRITERIA[self.number] = (self.title, ok, self.detail)
        line = f"criterion {self.number} {'PASS' if ok else 'FAIL'}: {self.title}"
        print(line + (f" ({self.detail})" if self.detail else ""))
        return False


@pytest.fixture
def criterion():
    """Context manager that records one acceptance criterion as pass or fail."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok, detail = CRITERIA[n]
        tail = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}{tail}")
