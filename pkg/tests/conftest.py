import pytest

from suas_pursuit.sim import bundled_scenario, load_scenario, run_scenario


@pytest.fixture(scope="session")
def bundled_run():
    """Cached runs of the bundled scenarios at their own seeds."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_scenario(load_scenario(bundled_scenario(name)))
        return cache[name]

    return get
