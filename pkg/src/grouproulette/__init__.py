import copy
from functools import lru_cache
from importlib import resources
from importlib.metadata import PackageNotFoundError, version

import yaml

from grouproulette.logging_config import setup_logging

try:
    __version__ = version(__name__)
except PackageNotFoundError:
    __version__ = "0.0.0"

setup_logging()


@lru_cache(maxsize=None)
def _load_settings() -> dict:
    with resources.files(__name__).joinpath("settings.yaml").open("r") as f:
        return yaml.safe_load(f)


def get_settings() -> dict:
    """Package defaults from settings.yaml

    Returns:
        dict: a fresh copy of the parsed settings, safe to mutate
    """
    return copy.deepcopy(_load_settings())
