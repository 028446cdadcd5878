import os

import pytest

from semispec.services import (
    CauchyService, LinalgService, LocalSpectralService, SemigroupService, StabilityService,
    StorageService, ZooService,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def linalg():
    return LinalgService()


@pytest.fixture
def semigroup(linalg):
    return SemigroupService(linalg)


@pytest.fixture
def cauchy(linalg, semigroup):
    return CauchyService(linalg, semigroup)


@pytest.fixture
def local(linalg, cauchy):
    return LocalSpectralService(linalg, cauchy)


@pytest.fixture
def stability(linalg, semigroup, local):
    return StabilityService(linalg, semigroup, local)


@pytest.fixture
def zoo(linalg, stability):
    return ZooService(linalg, stability)


@pytest.fixture
def storage(tmp_path):
    return StorageService(str(tmp_path))


@pytest.fixture
def fixture_path():
    def resolve(name):
        return os.path.join(FIXTURES, name)
    return resolve
