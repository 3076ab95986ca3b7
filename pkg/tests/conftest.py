import pytest

from sncpa.cache import CriticalValueCache


@pytest.fixture(autouse=True)
def isolated_cache_dir(tmp_path, monkeypatch):
    """Keep every test away from the user's real cache directory."""
    d = tmp_path / "cache"
    monkeypatch.setenv("SNCPA_CACHE_DIR", str(d))
    return d


@pytest.fixture
def shipped_cache(isolated_cache_dir):
    """Lookup restricted to the tables shipped with the package."""
    return CriticalValueCache(isolated_cache_dir)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
