import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from voxwofe.config import load_config  # noqa: E402
from voxwofe.pipeline import run_pipeline  # noqa: E402
from voxwofe.synthetic import generate  # noqa: E402


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Synthetic borehole data set with its ready-to-run config."""
    d = tmp_path_factory.mktemp("fixture")
    generate(d)
    return d


@pytest.fixture(scope="session")
def pipeline_run(fixture_dir):
    """One full pipeline run on the synthetic fixture, shared by several tests.

    Returns the config and the wall time of the run in seconds.
    """
    cfg = load_config(fixture_dir / "pipeline.cfg", fixture_dir / "run_a")
    start = time.perf_counter()
    run_pipeline(cfg)
    return cfg, time.perf_counter() - start


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    @contextmanager
    def record(number, title):
        info = {"detail": ""}
        start = time.perf_counter()
        passed = False
        try:
            yield info
            passed = True
        finally:
            took = time.perf_counter() - start
            line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  [{took:.2f}s]"
            if info["detail"]:
                line += f"  {info['detail']}"
            ACCEPTANCE[number] = line
            print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
