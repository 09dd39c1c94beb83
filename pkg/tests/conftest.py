import numpy as np
import pytest

from sempri.synth import generate_scenes


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scenes():
    """Ten small scenes, enough for fast pipeline and CLI smoke tests."""
    return list(generate_scenes(10, seed=3, shape=(60, 80)))


@pytest.fixture(scope="session")
def small_estimator(small_scenes):
    from sempri.pipeline import SemanticPriorSaliency

    est = SemanticPriorSaliency(n_segments=60, n_trees=8, max_depth=8, texton_samples=5000, seed=1)
    return est.fit([s.image for s in small_scenes], [s.scores for s in small_scenes], [s.mask for s in small_scenes])


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): one release acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, title = marker.args
    if call.when == "teardown":
        return
    _, verdict, secs = _ACCEPTANCE.get(cid, (title, "PASS", 0.0))
    # setup time counts too: shared fixtures train the end-to-end model
    if call.excinfo is not None:
        verdict = "FAIL"
    _ACCEPTANCE[cid] = (title, verdict, secs + call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        title, verdict, secs = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"{verdict}  {cid}  {title}  ({secs:.1f} s)")
