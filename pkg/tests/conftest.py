import numpy as np
import pytest

from confcover import meshgen
from confcover.diskmap import DiskMapOptions, build_disk_map


@pytest.fixture(scope="session")
def hemisphere():
    # 547 vertices: the ~500-vertex hemisphere of the harmonic checks
    return meshgen.hemisphere(13)


@pytest.fixture(scope="session")
def flat():
    return meshgen.flat_disk(18)


@pytest.fixture(scope="session")
def hexflat():
    return meshgen.hex_disk(18)


@pytest.fixture(scope="session")
def bump():
    return meshgen.gaussian_bump(13, height=1.5, center=(0.0, 0.5), width=0.35)


@pytest.fixture(scope="session")
def terrain():
    return meshgen.terrain_patch(13, seed=0)


@pytest.fixture(scope="session")
def hemi_map(hemisphere):
    return build_disk_map(hemisphere)


@pytest.fixture(scope="session")
def flat_map(flat):
    return build_disk_map(flat)


@pytest.fixture(scope="session")
def hex_map(hexflat):
    return build_disk_map(hexflat)


@pytest.fixture(scope="session")
def bump_maps(bump):
    return build_disk_map(bump, DiskMapOptions(correction=False)), build_disk_map(bump)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
