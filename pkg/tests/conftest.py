import pytest

from cachetrace.cache import CacheConfig, CacheLevel, Memory

# filled by test_acceptance; printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def make_level(sets=8, ways=4, replacement="lru", prefetcher="none", mshr=16,
               latency=4, memory_latency=200, rq=64):
    cfg = CacheConfig("T", sets * ways * 64, sets, ways, rq, rq, mshr, latency,
                      prefetcher, replacement)
    return CacheLevel(cfg, Memory(memory_latency))


@pytest.fixture
def level():
    return make_level()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
