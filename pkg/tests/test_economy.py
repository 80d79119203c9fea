import json

import pytest
from hypothesis import given, strategies as st

from intermed.economy import (
    AgentType,
    Bundle,
    Economy,
    Good,
    NULL_BUNDLE,
    SocialChoiceRule,
    economy_document,
    load_economy,
    target_distribution,
    target_profit,
)
from intermed.errors import ValidationError


def test_fixture_prices_solve_binding_constraints(private_market):
    # re-derive the target prices instead of trusting the builder:
    # participation binds for the low type, self-selection for the high type
    economy, scr = private_market
    y_low = economy.utility["low"]["L"]
    y_high = economy.utility["high"]["H"] - (economy.utility["high"]["L"] - y_low)
    assert scr.bundle("low") == Bundle("L", y_low) == Bundle("L", 10.0)
    assert scr.bundle("high") == Bundle("H", y_high) == Bundle("H", 18.0)
    # the remaining constraints are slack
    assert economy.utility_of(scr.bundle("high"), "low") < 0
    assert economy.utility_of(scr.bundle("high"), "high") > 0


def test_load_round_trip(private_market):
    economy, scr = private_market
    text = json.dumps(economy_document(economy, scr))
    loaded, loaded_scr = load_economy(text)
    assert loaded.type_names() == economy.type_names()
    assert loaded.good_names() == economy.good_names()
    assert loaded.utility == economy.utility
    assert loaded.cost == economy.cost
    assert loaded_scr.assignment == scr.assignment


def test_load_rejects_bad_masses(private_market):
    economy, scr = private_market
    doc = economy_document(economy, scr)
    doc["types"][0]["mass"] = 0.5
    doc["types"][1]["mass"] = 0.6
    with pytest.raises(ValidationError, match="sum"):
        load_economy(json.dumps(doc))


def test_load_rejects_empty_goods(private_market):
    economy, scr = private_market
    doc = economy_document(economy, scr)
    doc["goods"] = []
    with pytest.raises(ValidationError):
        load_economy(json.dumps(doc))


def test_load_rejects_missing_table_entry(private_market):
    economy, scr = private_market
    doc = economy_document(economy, scr)
    del doc["utility"]["low"]["H"]
    with pytest.raises(ValidationError, match="low.*H|H.*low"):
        load_economy(json.dumps(doc))


def test_load_rejects_unknown_target_good(private_market):
    economy, scr = private_market
    doc = economy_document(economy, scr)
    doc["target"]["low"]["good"] = "M"
    with pytest.raises(ValidationError, match="M"):
        load_economy(json.dumps(doc))


def test_null_target_allowed(private_market):
    economy, scr = private_market
    doc = economy_document(economy, scr)
    doc["target"]["low"] = "null"
    _, loaded_scr = load_economy(json.dumps(doc))
    assert loaded_scr.bundle("low").is_null
    assert loaded_scr.active_types() == ("high",)


def test_utility_and_profit_values(private_market, adverse_market):
    e1, scr1 = private_market
    assert e1.utility_of(Bundle("L", 10.0), "low") == 0.0
    assert e1.utility_of(Bundle("H", 18.0), "high") == 2.0
    assert e1.utility_of(NULL_BUNDLE, "low") == 0.0
    e2, _ = adverse_market
    assert e2.profit_of(Bundle("L", 10.0), "high") == 7.0
    assert e2.profit_of(Bundle("L", 10.0), "low") == 5.0
    assert e2.profit_of(NULL_BUNDLE, "high") == 0.0


def test_unknown_good_raises(private_market):
    economy, _ = private_market
    with pytest.raises(ValidationError, match="M"):
        economy.utility_of(Bundle("M", 1.0), "low")


def test_target_profit_values(private_market, adverse_market, swap_market):
    e1, s1 = private_market
    assert target_profit(e1, s1, "L") == 5.0
    assert target_profit(e1, s1, "H") == 9.0
    e2, s2 = adverse_market
    assert target_profit(e2, s2, "L") == 5.0
    assert target_profit(e2, s2, "H") == 11.0
    e3, s3 = swap_market
    assert target_profit(e3, s3, "L") == 4.0
    assert target_profit(e3, s3, "H") == 6.0


def test_target_profit_matches_brute_force(private_market):
    # independent oracle: explicit mass-weighted sum over targeted types
    economy, scr = private_market
    for good in scr.assigned_goods():
        price = scr.price_of_good(good)
        targeted = [t for t in economy.type_names() if scr.bundle(t).good == good]
        mass = sum(economy.mass(t) for t in targeted)
        expected = (
            sum(
                economy.mass(t) * (price - economy.cost[t][good])
                for t in targeted
            )
            / mass
        )
        assert target_profit(economy, scr, good) == pytest.approx(expected, abs=1e-12)


def test_target_profit_requires_single_price(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 10.0), "high": Bundle("L", 11.0)})
    with pytest.raises(ValidationError, match="different prices"):
        target_profit(economy, scr, "L")


def test_target_profit_requires_assigned_good(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 10.0), "high": Bundle("L", 10.0)})
    with pytest.raises(ValidationError, match="not assigned"):
        target_profit(economy, scr, "H")


def test_target_distribution_values(private_market, swap_market):
    e1, s1 = private_market
    assert target_distribution(e1, s1).as_dict() == {"L": 0.8, "H": 0.2}
    e3, s3 = swap_market
    assert target_distribution(e3, s3).as_dict() == {"L": 0.5, "H": 0.5}


def test_target_distribution_single_type():
    economy = Economy(
        types=[AgentType("only", 1.0)],
        goods=[Good("g", (1.0,))],
        utility={"only": {"g": 3.0}},
        cost={"only": {"g": 1.0}},
    )
    scr = SocialChoiceRule({"only": Bundle("g", 2.0)})
    assert target_distribution(economy, scr).as_dict() == {"g": 1.0}


def test_target_distribution_rejects_all_null(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": NULL_BUNDLE, "high": NULL_BUNDLE})
    with pytest.raises(ValidationError):
        target_distribution(economy, scr)


def test_distribution_weights_sum_to_one(private_market, adverse_market, swap_market):
    for economy, scr in (private_market, adverse_market, swap_market):
        total = sum(target_distribution(economy, scr).as_dict().values())
        assert total == pytest.approx(1.0, abs=1e-9)


@given(
    price=st.floats(-50, 50, allow_nan=False),
    shift=st.floats(-20, 20, allow_nan=False),
)
def test_payoffs_affine_in_price(price, shift):
    economy, _ = make_market_for_properties()
    base_u = economy.utility_of(Bundle("L", price), "low")
    base_p = economy.profit_of(Bundle("L", price), "low")
    assert economy.utility_of(Bundle("L", price + shift), "low") == pytest.approx(
        base_u - shift, abs=1e-9
    )
    assert economy.profit_of(Bundle("L", price + shift), "low") == pytest.approx(
        base_p + shift, abs=1e-9
    )


def make_market_for_properties():
    from intermed.applications import make_car_sales

    return make_car_sales()


def test_private_values_flag(private_market, adverse_market):
    assert private_market[0].private_values()
    assert not adverse_market[0].private_values()
