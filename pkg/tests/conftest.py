import pytest

from adios.bans import default_bans, load_bans
from adios.grammar import default_grammar, load_extension

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def std_grammar():
    return default_grammar()


@pytest.fixture(scope="session")
def std_bans(std_grammar):
    return default_bans(std_grammar)


@pytest.fixture(scope="session")
def example():
    return load_extension("example_extension.json")


@pytest.fixture(scope="session")
def example_bans(example):
    return load_bans("example_bans.json", example)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    def record(label, ok, detail=""):
        _ACCEPTANCE.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
