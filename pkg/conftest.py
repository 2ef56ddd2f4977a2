"""
[Purpose] Shared pytest fixtures for the hub grid studio test suite
[Comment] Long EMT-step runs are marked slow; select them with `pytest -m slow`, skip with `-m "not slow"`
"""

import pytest

from src.models.schemas import RunConfig
from src.services.grid_model import build_hub_network


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: time-domain runs at the EMT step (tens of seconds)")


@pytest.fixture(scope="session")
def default_config() -> RunConfig:
    return RunConfig()


@pytest.fixture(scope="session")
def zero_inertia_network(default_config):
    gfm = default_config.devices.gfm
    return build_hub_network(
        default_config.network,
        inertia="zero",
        converter_transformer_x=gfm.transformer_x,
        converter_transformer_r=gfm.transformer_r,
        converter_rating=gfm.rating,
        converter_filter_b=gfm.c_f,
    )


@pytest.fixture(scope="session")
def low_inertia_network(default_config):
    gfl = default_config.devices.gfl
    return build_hub_network(
        default_config.network,
        inertia="low",
        converter_transformer_x=gfl.transformer_x,
        converter_transformer_r=gfl.transformer_r,
        converter_rating=gfl.rating,
        converter_filter_b=gfl.c_f,
        sc_count=default_config.devices.sc.count,
    )
