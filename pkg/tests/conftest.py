import numpy as np
import pytest

from evmaploc.geometry import CameraIntrinsics, PoseSE3
from evmaploc.synth import SceneSpec, synth_scene


@pytest.fixture(scope="session")
def room():
    """Synthetic room without events: ~150k points, 20 poses at 480x300."""
    return synth_scene(SceneSpec(with_events=False), seed=0)


@pytest.fixture(scope="session")
def noisy_room():
    """Room with 30% salt-and-pepper events over four windows."""
    return synth_scene(SceneSpec(n_poses=4, noise_rate=0.3), seed=0)


@pytest.fixture
def K():
    return CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


def random_pose(rng, t_scale=1.0, max_angle=np.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return PoseSE3.from_rotvec(axis * rng.uniform(0, max_angle), rng.uniform(-t_scale, t_scale, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdict lines, printed once at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
