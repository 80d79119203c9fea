"""Shared fixtures: the three canonical car-sales markets.

private_market   type-independent costs; target prices pin IR(low) and
                 IC(high) to zero slack.
adverse_market   same tastes, type-dependent costs (high-taste buyers are
                 cheaper to serve) -> adverse selection against sellers.
swap_market      tastes tuned so swapping goods between the two types
                 leaves total consumption utility unchanged.
"""

import json

import pytest

from intermed.applications import make_car_sales


@pytest.fixture
def private_market():
    return make_car_sales(interdependent=False)


@pytest.fixture
def adverse_market():
    return make_car_sales(interdependent=True)


@pytest.fixture
def swap_market():
    return make_car_sales(variant="swap")


def economy_file(tmp_path, economy, scr, name="economy.json"):
    from intermed.economy import economy_document

    path = tmp_path / name
    path.write_text(json.dumps(economy_document(economy, scr)))
    return path
