import numpy as np
import pytest

from oareco import build_forward_operator, desk_profile, disks, simulate_sinogram

# Shared desk-scale fixtures. The operator build is the expensive part, so
# it is session scoped; tests must not mutate it.


@pytest.fixture(scope="session")
def profile():
    return desk_profile()


@pytest.fixture(scope="session")
def operator(profile):
    return build_forward_operator(profile)


@pytest.fixture(scope="session")
def phantom(profile):
    return disks(profile.grid, num_disks=4, seed=11)


@pytest.fixture(scope="session")
def sinogram(phantom, operator):
    return simulate_sinogram(phantom, operator)
