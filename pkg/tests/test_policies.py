import pytest
from hypothesis import given, strategies as st

from intermed.economy import target_distribution, target_profit
from intermed.errors import ValidationError
from intermed.policies import (
    Fee,
    PolicyKind,
    Violation,
    assess_fee,
    cross_subsidy_schedules,
    make_distribution_policy,
    make_per_unit_policy,
    per_unit_policy,
)


def test_break_even_fee_tables(private_market, adverse_market, swap_market):
    e1, s1 = private_market
    assert make_per_unit_policy(e1, s1).fee_table() == {"L": 5.0, "H": 9.0}
    e2, s2 = adverse_market
    assert make_per_unit_policy(e2, s2).fee_table() == {"L": 5.0, "H": 11.0}
    e3, s3 = swap_market
    assert make_per_unit_policy(e3, s3).fee_table() == {"L": 4.0, "H": 6.0}


def test_distribution_policy_variants(private_market, swap_market):
    e3, s3 = swap_market
    p = make_distribution_policy(e3, s3, "target")
    assert p.kind is PolicyKind.TARGET_DISTRIBUTION
    assert p.distribution.as_dict() == {"L": 0.5, "H": 0.5}
    assert p.fee_table() == {"L": 4.0, "H": 6.0}

    e1, s1 = private_market
    full = make_distribution_policy(e1, s1, "full-line")
    assert full.kind is PolicyKind.FULL_LINE
    assert set(full.fee_table()) == {"L", "H"}

    mono = make_distribution_policy(e1, s1, "monopoly")
    # revenue-maximal prices coincide with the target prices here, so the
    # refined fees equal the break-even ones
    assert mono.fee_table() == {"L": 5.0, "H": 9.0}
    assert mono.required_mass == pytest.approx(1.0)


def test_per_unit_fee_is_linear(adverse_market):
    e2, s2 = adverse_market
    policy = make_per_unit_policy(e2, s2)
    out = assess_fee(policy, {"L": 0.8, "H": 0.2})
    assert out == Fee(pytest.approx(0.8 * 5 + 0.2 * 11))


@given(
    a=st.floats(0, 2, allow_nan=False),
    b=st.floats(0, 2, allow_nan=False),
    c=st.floats(0, 2, allow_nan=False),
    d=st.floats(0, 2, allow_nan=False),
)
def test_per_unit_fee_additive(a, b, c, d):
    policy = per_unit_policy({"L": 2.5, "H": -1.0})
    f1 = assess_fee(policy, {"L": a, "H": b}).amount
    f2 = assess_fee(policy, {"L": c, "H": d}).amount
    joint = assess_fee(policy, {"L": a + c, "H": b + d}).amount
    assert joint == pytest.approx(f1 + f2, abs=1e-9)


def test_target_distribution_violation_and_fee(swap_market):
    e3, s3 = swap_market
    policy = make_distribution_policy(e3, s3, "target")
    assert isinstance(assess_fee(policy, {"L": 1.0}), Violation)
    out = assess_fee(policy, {"L": 0.25, "H": 0.25})
    assert out == Fee(pytest.approx(0.25 * 4 + 0.25 * 6))


def test_zero_measure_pays_zero_everywhere(private_market, swap_market):
    e3, s3 = swap_market
    for variant in ("target", "match", "full-line", "monopoly"):
        policy = make_distribution_policy(e3, s3, variant)
        assert assess_fee(policy, {}) == Fee(0.0)
        assert assess_fee(policy, {"L": 0.0, "H": 0.0}) == Fee(0.0)


def test_punish_inactive_flag(swap_market):
    e3, s3 = swap_market
    policy = make_distribution_policy(e3, s3, "target", punish_inactive=True)
    assert isinstance(assess_fee(policy, {}), Violation)


def test_full_line_requires_every_good(private_market):
    e1, s1 = private_market
    policy = make_distribution_policy(e1, s1, "full-line")
    assert isinstance(assess_fee(policy, {"L": 1.0}), Violation)
    out = assess_fee(policy, {"L": 0.7, "H": 0.3})
    assert isinstance(out, Fee)


def test_full_line_agrees_with_target_on_fees(swap_market):
    e3, s3 = swap_market
    full = make_distribution_policy(e3, s3, "full-line")
    target = make_distribution_policy(e3, s3, "target")
    measure = {"L": 0.5, "H": 0.5}
    assert assess_fee(full, measure).amount == pytest.approx(
        assess_fee(target, measure).amount
    )


def test_match_each_other_semantics(adverse_market):
    e2, s2 = adverse_market
    policy = make_distribution_policy(e2, s2, "match")
    half = {"L": 0.4, "H": 0.1}
    # both active with equal shapes -> per-unit fee
    out = assess_fee(policy, half, [half])
    assert out == Fee(pytest.approx(0.4 * 5 + 0.1 * 11))
    # active against an inactive rival -> violation
    assert isinstance(assess_fee(policy, {"L": 1.0}, [{}]), Violation)
    # shape mismatch -> violation
    assert isinstance(
        assess_fee(policy, {"L": 1.0}, [{"L": 0.4, "H": 0.1}]), Violation
    )
    # inactive self -> exempt
    assert assess_fee(policy, {}, [half]) == Fee(0.0)


def test_monopoly_requires_exact_mass(private_market):
    e1, s1 = private_market
    policy = make_distribution_policy(e1, s1, "monopoly")
    good = assess_fee(policy, {"L": 0.8, "H": 0.2})
    assert isinstance(good, Fee)
    scaled = assess_fee(policy, {"L": 0.4, "H": 0.1})
    assert isinstance(scaled, Violation)


def test_break_even_on_path(private_market, adverse_market, swap_market):
    # serving the whole population at target bundles nets exactly zero
    for economy, scr in (private_market, adverse_market, swap_market):
        policy = make_per_unit_policy(economy, scr)
        measure: dict[str, float] = {}
        gross = 0.0
        for t in economy.type_names():
            b = scr.bundle(t)
            measure[b.good] = measure.get(b.good, 0.0) + economy.mass(t)
            gross += economy.mass(t) * economy.profit_of(b, t)
        fee = assess_fee(policy, measure)
        assert gross - fee.amount == pytest.approx(0.0, abs=1e-9)


def test_fee_requires_known_good(private_market):
    policy = per_unit_policy({"L": 1.0})
    with pytest.raises(ValidationError, match="H"):
        assess_fee(policy, {"H": 0.5})


def test_negative_mass_rejected(private_market):
    e1, s1 = private_market
    policy = make_per_unit_policy(e1, s1)
    with pytest.raises(ValidationError, match="negative"):
        assess_fee(policy, {"L": -0.1})


def test_policy_requires_fully_assigned_goods(private_market):
    from intermed.economy import NULL_BUNDLE, SocialChoiceRule

    economy, scr = private_market
    partial = SocialChoiceRule(
        {"low": NULL_BUNDLE, "high": scr.bundle("high")}
    )
    with pytest.raises(ValidationError, match="L"):
        make_per_unit_policy(economy, partial)


def test_cross_subsidy_schedules(adverse_market):
    economy, scr = adverse_market
    schedules = cross_subsidy_schedules(economy, scr, "L", 0.0, 12.0, 0.5)
    assert len(schedules) == 25
    dist = target_distribution(economy, scr).as_dict()
    breakeven = sum(dist[g] * target_profit(economy, scr, g) for g in ("L", "H"))
    assert breakeven == pytest.approx(6.2)
    for policy in schedules:
        t = policy.fee_table()
        assert dist["L"] * t["L"] + dist["H"] * t["H"] == pytest.approx(6.2, abs=1e-9)
    fees_L = [p.fee_table()["L"] for p in schedules]
    assert fees_L[0] == 0.0 and fees_L[-1] == 12.0
    # the bundle-wise break-even schedule sits on this grid
    assert any(
        p.fee_table() == pytest.approx({"L": 5.0, "H": 11.0}) for p in schedules
    )
