import numpy as np
import pytest

from polaniso.scene import RegionSpec, SceneSpec, simulate
from polaniso.slc import AcqMeta, SlcImage

BAND1 = [(-0.5, -1 / 6)]
BAND2 = [(-1 / 6, 1 / 6)]
BAND3 = [(1 / 6, 0.5)]


def random_psd(rng, n=None, rank=3, scale=1.0):
    """Random Hermitian PSD matrices with shape (3, 3) or (n, 3, 3)."""
    shape = (3, rank) if n is None else (n, 3, rank)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return scale * a @ np.conj(np.swapaxes(a, -1, -2))


def white_slc(rows, cols, seed=0, meta=None):
    rng = np.random.default_rng(seed)
    data = (rng.standard_normal((3, rows, cols)) + 1j * rng.standard_normal((3, rows, cols))) / np.sqrt(2)
    return SlcImage(data, meta or AcqMeta(label="white"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def isotropic_scene():
    spec = SceneSpec(1024, 256, [RegionSpec(0, 256)], rng_seed=2024)
    return simulate(spec)


@pytest.fixture(scope="session")
def banded_spec():
    """Isotropic strips either side of a strip whose power lives only in band 2, plus weak noise."""
    return SceneSpec(
        512,
        128,
        [RegionSpec(0, 48), RegionSpec(48, 80, np.diag([2.0, 1.0, 1.0]), BAND2), RegionSpec(80, 128), RegionSpec(48, 80, 0.01 * np.eye(3), layer=1)],
        rng_seed=99,
    )


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        status, title, elapsed, detail = mod.RESULTS[number]
        tr.write_line(f"{status} criterion {number}: {title} ({elapsed:.2f}s) {detail}")
