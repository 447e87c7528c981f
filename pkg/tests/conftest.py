import pytest
from hypothesis import HealthCheck, settings

from polymart import build_family, builtin

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def wiener6():
    # family order 6 with moments to 12, the CLI's default layout
    return build_family(builtin("wiener", 12), 6)


@pytest.fixture(scope="session")
def poisson6():
    return build_family(builtin("poisson", 12, 1), 6)


@pytest.fixture(scope="session")
def gamma6():
    return build_family(builtin("gamma", 12), 6)
