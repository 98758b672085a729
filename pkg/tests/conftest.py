import numpy as np
import pytest
import torch

from cqcodec.synthetic import synthetic_speech


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture(scope="session")
def speech():
    """Three seconds of speech-like audio."""
    return synthetic_speech(3.0, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stable_lpc(rng, order=16, kmax=0.95):
    """Step-up recursion from reflection coefficients drawn in (-kmax, kmax)."""
    a = np.zeros(0)
    for k in rng.uniform(-kmax, kmax, order):
        a = np.concatenate([a - k * a[::-1], [k]])
    return a


TINY = dict(channels=8, bottleneck_channels=4, epochs=1, warmup_epochs=0, batch_size=16,
            lsp_centroids=16, residual_centroids=8, mel_bank_sizes=(8,), control_bitrate=False,
            validation_seconds=1.0, learning_rate=1e-3)


@pytest.fixture(scope="session")
def tiny_corpus():
    from cqcodec.synthetic import synthetic_corpus

    return synthetic_corpus(2, 1.5, seed=3)


@pytest.fixture(scope="session")
def tiny_codec(tiny_corpus):
    """A minimal model trained for one epoch; only its mechanics are tested."""
    from cqcodec import CQCodec

    torch.set_num_threads(1)
    return CQCodec(**TINY).fit(tiny_corpus)


# -- acceptance reporting ---------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test backs acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"passed": True, "notes": []})
    entry["passed"] &= report.passed
    entry["notes"] += [v for k, v in item.user_properties if k == "detail" and report.when == "call"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        notes = "; ".join(dict.fromkeys(entry["notes"]))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if entry['passed'] else 'FAIL'}"
                                    + (f"  ({notes})" if notes else ""))
