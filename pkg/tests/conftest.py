import pytest

from acceptance_log import ACCEPTANCE
from descsel.synthgen import SynthSpec, generate


@pytest.fixture(scope="session")
def planted_bundle():
    """Default planted store plus ground truth; built once per session."""
    store, planted, _pairs = generate(SynthSpec())
    return store, planted


@pytest.fixture(scope="session")
def small_planted_bundle():
    """Smaller planted store for tests where runtime matters more than scale."""
    spec = SynthSpec(
        n_classes=6,
        dim=64,
        train_per_class=10,
        test_per_class=10,
        pool_size=40,
        planted_per_class=3,
        seed=11,
        dataset_name="synthetic_small",
    )
    store, planted, _pairs = generate(spec)
    return store, planted


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
