import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hfk.models import (Euclidean, HarmonicAsymptotics, PerturbedSchwarzschild,
                        SchwarzschildIsotropic, YorkModel)
from hfk.reduction import build_foliation

settings.register_profile("hfk", deadline=None, max_examples=15, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow,
                                                 HealthCheck.function_scoped_fixture])
settings.load_profile("hfk")

RADII = (8.0, 16.0, 32.0)
P = (0.1, 0.0, 0.0)
# padding of the conformal factor that keeps the momentum models inside the DEC
PADDING = 0.02


def harmonic(**kw):
    return HarmonicAsymptotics(1.0, P, dec_padding=PADDING, **kw)


def york(**kw):
    return YorkModel(1.0, P, dec_padding=PADDING, **kw)


def random_points(n, radius, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    return radius * x / np.linalg.norm(x, axis=1)[:, None]


@pytest.fixture(scope="session")
def euclid():
    return Euclidean()


@pytest.fixture(scope="session")
def schw():
    return SchwarzschildIsotropic(1.0)


@pytest.fixture(scope="session")
def schw_foliation(schw):
    return build_foliation(schw, RADII)


@pytest.fixture(scope="session")
def translated_foliation():
    model = SchwarzschildIsotropic(1.0, c=(1.0, 0.0, 0.0))
    return model, build_foliation(model, RADII)


@pytest.fixture(scope="session")
def harmonic_foliation():
    model = harmonic()
    return model, build_foliation(model, RADII)


@pytest.fixture(scope="session")
def york_foliation():
    model = york()
    return model, build_foliation(model, RADII)


@pytest.fixture(scope="session")
def perturbed_odd():
    return PerturbedSchwarzschild(1.0, 0.5, decay=2.0, parity="odd")
