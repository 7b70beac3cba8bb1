import numpy as np
import pytest

from hfsg.corpus import pseudo_real_corpus
from hfsg.latent import fit_pca
from hfsg.signalio import generate_voltage_reference

# short rows (6 cycles at 500 samples per cycle) keep unit tests fast
SHORT_T = 3000


@pytest.fixture(scope="session")
def short_corpus():
    return pseudo_real_corpus(40, n_samples=SHORT_T, seed=3)


@pytest.fixture(scope="session")
def short_model(short_corpus):
    return fit_pca(short_corpus, n_components=8)


@pytest.fixture(scope="session")
def short_voltage():
    return generate_voltage_reference(60.0, 30000.0, SHORT_T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
