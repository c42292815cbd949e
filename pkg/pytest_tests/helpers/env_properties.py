import logging
from pathlib import Path
from typing import Optional

import allure
from pytest import Config

logger = logging.getLogger("CesLogger")


def _properties_file(config: Config) -> Optional[Path]:
    environment_dir = config.getoption("--alluredir", default=None)
    if not environment_dir:
        return None
    return Path(environment_dir) / "environment.properties"


@allure.step("Read environment.properties")
def read_env_properties(config: Config) -> dict:
    file_path = _properties_file(config)
    if file_path is None or not file_path.exists():
        return {}

    env_properties = {}
    for line in file_path.read_text().splitlines():
        key, separator, value = line.partition("=")
        if not separator:
            logger.warning(f"Could not parse env property from {line}")
            continue
        env_properties[key] = value
    return env_properties


@allure.step("Update data in environment.properties")
def save_env_properties(config: Config, env_data: dict) -> None:
    file_path = _properties_file(config)
    if file_path is None:
        logger.debug("No --alluredir given, environment.properties is not written")
        return

    file_path.parent.mkdir(parents=True, exist_ok=True)
    merged = {**read_env_properties(config), **env_data}
    with open(file_path, "w") as env_file:
        for env, env_value in sorted(merged.items()):
            env_file.write(f"{env}={env_value}\n")
