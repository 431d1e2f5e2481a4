import numpy as np
import pytest

from sfsearch.blocks import BlockSF
from sfsearch.kgdata import TripleStore


def random_sf(rng: np.random.Generator, n_blocks: int | None = None) -> BlockSF:
    """Random substitute matrix; ``n_blocks`` nonzero entries if given."""
    if n_blocks is None:
        n_blocks = int(rng.integers(0, 17))
    entries = [0] * 16
    for p in rng.choice(16, size=n_blocks, replace=False).tolist():
        entries[p] = int(rng.integers(1, 5)) * (1 if rng.random() < 0.5 else -1)
    return BlockSF(tuple(entries))


def random_store(
    rng: np.random.Generator, n_entities: int = 12, n_relations: int = 3, n_triples: int = 40
) -> TripleStore:
    names = [f"e{n}" for n in range(n_entities)]
    rels = [f"r{n}" for n in range(n_relations)]
    seen = set()
    while len(seen) < n_triples:
        h, t = rng.integers(n_entities, size=2).tolist()
        seen.add((names[h], rels[int(rng.integers(n_relations))], names[t]))
    triples = sorted(seen)
    rng.shuffle(triples)
    n_valid = n_triples // 5
    return TripleStore.from_named_triples(
        triples[2 * n_valid :], triples[:n_valid], triples[n_valid : 2 * n_valid]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria: list[tuple[int, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.skipped and report.when in ("setup", "call"):
        _criteria.append((marker.args[0], "SKIP", str(report.longrepr[-1])))
    elif report.when == "call":
        _criteria.append((marker.args[0], "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(_criteria):
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
