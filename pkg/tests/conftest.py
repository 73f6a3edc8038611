import mpmath
import pytest

_CRITERIA = pytest.StashKey[list]()


@pytest.fixture(autouse=True)
def _ambient_precision():
    """Comparisons in tests run at 192 bits; the package sets its own precision."""
    old = mpmath.mp.prec
    mpmath.mp.prec = 192
    yield
    mpmath.mp.prec = old


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, title, ok, detail, seconds, limit)."""
    log = request.config.stash[_CRITERIA]

    def record(number, title, ok, detail, seconds, limit):
        timed = seconds < limit
        status = "PASS" if ok and timed else "FAIL"
        line = (f"[{status}] criterion {number:>2}: {title} | {detail} | "
                f"{seconds:.3g}s (limit {limit:g}s)")
        log.append((number, line))
        print(line)
        assert ok, line
        assert timed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash[_CRITERIA])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
