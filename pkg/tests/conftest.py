"""Shared fixtures: fixture-file paths, dataset builders, kernel backends,
and the acceptance-suite summary printed at the end of the run."""

from pathlib import Path

import pytest

from cobar import parse_ratings
from cobar.kernels import available_backends

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def demo_dataset():
    """Five users with nested preference groups; the README walk-through file."""
    return parse_ratings(DATA_DIR / "demo.tsv", name="demo")


@pytest.fixture(scope="session")
def two_clusters_dataset():
    return parse_ratings(DATA_DIR / "two_clusters.tsv", name="two_clusters")


def make_dataset(rows, **kwargs):
    """Dataset from (user, item, rating) triples, via the real parser."""
    lines = [f"{u}\t{i}\t{r!r}" for u, i, r in rows]
    return parse_ratings(lines, **kwargs)


def random_grid_dataset(rng, max_users=20, max_items=15, density=0.45):
    """Random dataset on a 0.5-step rating grid (sums stay exact in binary).

    Every user gets at least one rating; items without ratings do not exist
    in the index space, matching what the parser produces.
    """
    n_users = int(rng.integers(2, max_users + 1))
    n_items = int(rng.integers(2, max_items + 1))
    rows = []
    for u in range(n_users):
        count = max(1, int(rng.binomial(n_items, density)))
        for i in rng.choice(n_items, size=count, replace=False):
            rating = int(rng.integers(1, 9)) / 2.0
            rows.append((f"u{u}", f"i{i}", rating))
    return make_dataset(rows)


def backend_params():
    return [pytest.param(mod, id=name) for name, mod in available_backends().items()]


@pytest.fixture(params=backend_params())
def kernel_backend(request):
    """Runs the test once per importable kernel backend."""
    return request.param


# --- acceptance criteria summary -------------------------------------------

ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): criterion of the acceptance suite")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        label = marker.args[0]
        if report.skipped:
            status = f"SKIP ({report.longrepr[2] if isinstance(report.longrepr, tuple) else 'skipped'})"
        else:
            status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_RESULTS[label] = status
    elif marker and report.when == "setup" and report.skipped:
        ACCEPTANCE_RESULTS[marker.args[0]] = "SKIP"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{label}: {ACCEPTANCE_RESULTS[label]}")
