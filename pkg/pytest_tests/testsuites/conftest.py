import logging

import allure
import pytest
from ces_spectra.grid import Grid
from ces_spectra.oracle import suggest_grid
from ces_spectra.potential import DkvParams
from ces_spectra.spectrum import BoundState, enumerate_levels
from env_properties import save_env_properties
from package_versions import get_package_versions
from parameter_sets import FOUR_LEVELS, SINGLE_LEVEL, TWO_LEVELS

logger = logging.getLogger("CesLogger")


def pytest_collection_modifyitems(items):
    # Run long tests last based on @pytest.mark.long
    def priority(item: pytest.Item) -> int:
        return 1 if item.get_closest_marker("long") else 0

    items.sort(key=lambda item: priority(item))


@pytest.fixture(scope="session", autouse=True)
@allure.title("Collect package versions")
def collect_package_versions(request):
    versions = get_package_versions()
    logger.info(f"Numeric stack: {versions}")
    save_env_properties(request.config, versions)


@pytest.fixture(scope="session")
def single_level_params() -> DkvParams:
    return DkvParams(A=SINGLE_LEVEL.A, B=SINGLE_LEVEL.B)


@pytest.fixture(scope="session")
def single_level_state(single_level_params: DkvParams) -> BoundState:
    return enumerate_levels(single_level_params, 5)[0]


@pytest.fixture(scope="session")
def two_level_params() -> DkvParams:
    return DkvParams(A=TWO_LEVELS.A, B=TWO_LEVELS.B)


@pytest.fixture(scope="session")
def two_level_states(two_level_params: DkvParams) -> list[BoundState]:
    return enumerate_levels(two_level_params, 5)


@pytest.fixture(scope="session")
def four_level_params() -> DkvParams:
    return DkvParams(A=FOUR_LEVELS.A, B=FOUR_LEVELS.B)


@pytest.fixture(scope="session")
def four_level_states(four_level_params: DkvParams) -> list[BoundState]:
    return enumerate_levels(four_level_params, 10)


@pytest.fixture(scope="session")
@allure.title("Prepare oracle grid for the four-level couplings")
def four_level_grid(four_level_params: DkvParams, four_level_states: list[BoundState]) -> Grid:
    return suggest_grid(four_level_params, four_level_states)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    yield tmp_path
