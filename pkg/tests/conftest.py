import numpy as np
import pytest

from remixkit.dataset import CorpusConfig, SnrLaw, generate_corpus

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_corpus(path, n, law, seed=0, chunk_seconds=0.25, sample_rate=8000, **kw):
    return generate_corpus(CorpusConfig(n, SnrLaw.parse(law), seed, chunk_seconds, sample_rate, **kw), path)


@pytest.fixture(scope="session")
def small_corpora(tmp_path_factory):
    """Tiny 8 kHz corpora shared by trainer/analysis/CLI tests."""
    root = tmp_path_factory.mktemp("corpora")
    return {
        "teach": make_corpus(root / "teach", 48, "gaussian:5:7", seed=1),
        "adapt": make_corpus(root / "adapt", 48, "skewed", seed=2),
        "eval": make_corpus(root / "eval", 30, "uniform:-10:40", seed=3),
    }
