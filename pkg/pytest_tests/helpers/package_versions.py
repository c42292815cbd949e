import logging
import platform
from importlib.metadata import PackageNotFoundError, version

logger = logging.getLogger("CesLogger")

NUMERIC_PACKAGES = ("numpy", "scipy", "mpmath", "hypothesis", "ces-spectra")


def get_package_versions() -> dict[str, str]:
    """Versions of the numeric stack the results depend on, for the allure environment."""
    versions = {"python": platform.python_version()}
    for package in NUMERIC_PACKAGES:
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            logger.info(f"{package} is not installed as a distribution")
            versions[package] = "Unknown"
    return versions
