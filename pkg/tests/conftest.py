import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from posecomp.geometry import CameraIntrinsics  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def kitti_K():
    return CameraIntrinsics(721.5377, 721.5377, 609.5593, 172.854, 1280, 375)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
