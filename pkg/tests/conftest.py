import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def budget_part():
    from symgraph.graphspace import Partition
    return Partition.from_sizes([10, 10])


@pytest.fixture
def rng():
    from symgraph.streams import RandomStream
    return RandomStream(20240601)


def binom_3sigma(freq, p, draws):
    return abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / draws) + 1e-12


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record ``(ok, detail)`` for an acceptance criterion; printed in the terminal summary."""

    def record(ok, detail):
        _ACCEPTANCE[request.node.name] = (bool(ok), detail)
        line = f"{'PASS' if ok else 'FAIL'}  {request.node.name}  {detail}"
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
