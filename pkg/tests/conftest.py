import numpy as np
import pytest

import gram

# pass/fail lines from the acceptance tests, echoed after the run so the
# verdict for each numbered criterion is visible in plain pytest output
_criterion_lines: list[str] = []


@pytest.fixture
def record_criterion():
    def _record(line: str) -> None:
        _criterion_lines.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tree7():
    return gram.gen_binary_tree(7)


@pytest.fixture
def ring7():
    return gram.gen_double_ring(7)


@pytest.fixture
def tiny_config():
    # small dims keep finite-difference sweeps cheap
    return gram.VgaeConfig(
        gcn_layers=2, hidden_dim=4, latent_dim=3, dropout_rate=0.0, epochs=1
    )
