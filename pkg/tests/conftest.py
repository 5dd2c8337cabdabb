from importlib.resources import files

import pytest

from ssnfactor.factorize import factorize
from ssnfactor.generate import GeneratorConfig, generate_with_truth
from ssnfactor.rdf import parse_ntriples
from ssnfactor.vocab import default_vocabulary


def packaged_text(relative: str) -> str:
    return files("ssnfactor").joinpath(relative).read_text(encoding="utf-8")


# Acceptance verdict lines, replayed after the run so output capture
# cannot hide them.  test_acceptance._report appends to this list.
CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def weather():
    return parse_ntriples(packaged_text("data/weather_small.nt"))


@pytest.fixture(scope="session")
def weather_factorized():
    return parse_ntriples(packaged_text("data/weather_small_factorized.nt"))


@pytest.fixture(scope="session")
def fixture_queries():
    out = {}
    for entry in files("ssnfactor").joinpath("data/queries").iterdir():
        if entry.name.endswith(".rq"):
            out[entry.name[: -len(".rq")]] = entry.read_text(encoding="utf-8")
    return out


@pytest.fixture(scope="session")
def corpus(vocab):
    """A mid-sized generated graph with its truth and factorization."""
    config = GeneratorConfig(
        observations=400, procedures=2, distinct_values=40, seed=7
    )
    g, truth = generate_with_truth(config, vocab)
    result = factorize(g, vocab)
    return config, g, truth, result
