import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from intermed.applications import make_car_sales
from intermed.economy import AgentType, Bundle, Economy, Good, SocialChoiceRule
from intermed.errors import GuardError, PreconditionError
from intermed.incentives import (
    NotImplementable,
    check_cmon,
    check_du,
    check_ic_ir,
    check_permuted_not_implementable,
    construct_transfers,
    find_indifferent_pairs,
)

# ---------------------------------------------------------------- oracles


def cycles_nonnegative_brute(economy, x, tol=1e-9):
    """Enumerate every simple cycle of pairwise constraints explicitly."""
    names = sorted(x)
    for size in range(2, len(names) + 1):
        for subset in itertools.combinations(names, size):
            first, rest = subset[0], subset[1:]
            for perm in itertools.permutations(rest):
                cycle = (first,) + perm
                total = 0.0
                for i, tail in enumerate(cycle):
                    head = cycle[(i + 1) % len(cycle)]
                    total += (
                        economy.utility[head][x[head]] - economy.utility[head][x[tail]]
                    )
                if total < -tol:
                    return False
    return True


def ic_system_feasible_lp(economy, x, tol=1e-9):
    """Feasibility of the IC price system, solved as a linear program."""
    names = sorted(x)
    index = {t: i for i, t in enumerate(names)}
    rows, rhs = [], []
    for t in names:
        for s in names:
            if s == t:
                continue
            # y_t - y_s <= v(x_t, t) - v(x_s, t)
            row = [0.0] * len(names)
            row[index[t]] = 1.0
            row[index[s]] = -1.0
            rows.append(row)
            rhs.append(economy.utility[t][x[t]] - economy.utility[t][x[s]] + tol)
    res = linprog(
        c=[0.0] * len(names),
        A_ub=rows,
        b_ub=rhs,
        bounds=[(None, None)] * len(names),
        method="highs",
    )
    return res.status == 0


def random_instance(rng, n_types=None, n_goods=None):
    n_types = n_types or rng.integers(2, 6)
    n_goods = n_goods or rng.integers(2, 6)
    types = [f"t{i}" for i in range(n_types)]
    goods = [f"g{j}" for j in range(n_goods)]
    masses = rng.uniform(0.2, 1.0, size=n_types)
    masses = masses / masses.sum()
    masses = list(masses)
    masses[-1] = 1.0 - sum(masses[:-1])
    economy = Economy(
        types=[AgentType(t, m) for t, m in zip(types, masses)],
        goods=[Good(g, (float(j),)) for j, g in enumerate(goods)],
        utility={
            t: {g: float(rng.uniform(0, 10)) for g in goods} for t in types
        },
        cost={t: {g: float(rng.uniform(0, 5)) for g in goods} for t in types},
    )
    x = {t: goods[int(rng.integers(0, n_goods))] for t in types}
    return economy, x


# ---------------------------------------------------------------- IC / IR


def test_ic_ir_holds_on_fixtures(private_market, adverse_market, swap_market):
    for economy, scr in (private_market, adverse_market, swap_market):
        report = check_ic_ir(economy, scr)
        assert report.holds
        assert report.ic_holds and report.ir_holds


def test_ic_violation_when_high_price_raised(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 10.0), "high": Bundle("H", 19.0)})
    report = check_ic_ir(economy, scr)
    assert not report.holds
    assert report.violations == ((("high", "low", pytest.approx(-1.0))),)
    assert report.ir_holds


def test_constant_rule_holds(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 9.0), "high": Bundle("L", 9.0)})
    assert check_ic_ir(economy, scr).holds


def test_ir_violation_recorded(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 11.0), "high": Bundle("H", 18.0)})
    report = check_ic_ir(economy, scr)
    assert report.ir_violations == (("low", pytest.approx(-1.0)),)


def test_price_shift_preserves_ic_verdict(private_market):
    economy, scr = private_market
    rng = np.random.default_rng(7)
    for _ in range(20):
        d = float(rng.uniform(-3, 3))
        shifted = SocialChoiceRule(
            {
                t: Bundle(b.good, b.price + d)
                for t, b in scr.assignment.items()
            }
        )
        assert check_ic_ir(economy, shifted).ic_holds == check_ic_ir(economy, scr).ic_holds
        assert check_ic_ir(economy, shifted).violations == ()


# ---------------------------------------------------------------- CMON


def test_cmon_target_rule(private_market):
    economy, scr = private_market
    assert check_cmon(economy, scr.consumption()).holds


def test_cmon_permuted_rule_fails_with_witness(private_market):
    economy, _ = private_market
    result = check_cmon(economy, {"low": "H", "high": "L"})
    assert not result.holds
    assert set(result.cycle) == {"low", "high"}
    assert result.cycle_sum == pytest.approx(-4.0)  # 26 - 30


def test_cmon_common_good_rule(private_market):
    economy, _ = private_market
    assert check_cmon(economy, {"low": "L", "high": "L"}).holds


def test_cmon_agrees_with_oracles():
    rng = np.random.default_rng(20260809)
    disagreements = 0
    for _ in range(60):
        economy, x = random_instance(rng)
        fast = check_cmon(economy, x).holds
        brute = cycles_nonnegative_brute(economy, x)
        lp = ic_system_feasible_lp(economy, x)
        if not (fast == brute == lp):
            disagreements += 1
    assert disagreements == 0


# ---------------------------------------------------------------- transfers


def test_maximal_transfers_reproduce_target(private_market):
    economy, scr = private_market
    rule = construct_transfers(economy, scr.consumption(), mode="maximal")
    assert rule.as_dict() == pytest.approx({"low": 10.0, "high": 18.0})


def test_minimal_transfers_are_agent_best(private_market):
    economy, scr = private_market
    maximal = construct_transfers(economy, scr.consumption(), mode="maximal")
    minimal = construct_transfers(economy, scr.consumption(), mode="minimal")
    assert minimal.as_dict() == pytest.approx({"low": 10.0, "high": 14.0})
    for t in economy.type_names():
        assert minimal.price(t) <= maximal.price(t) + 1e-12


def test_transfers_infeasible_with_witness(private_market):
    economy, _ = private_market
    with pytest.raises(NotImplementable) as err:
        construct_transfers(economy, {"low": "H", "high": "L"})
    assert set(err.value.cycle) == {"low", "high"}


def test_single_type_maximal_binds_participation():
    economy = Economy(
        types=[AgentType("only", 1.0)],
        goods=[Good("g", (1.0,))],
        utility={"only": {"g": 7.0}},
        cost={"only": {"g": 2.0}},
    )
    rule = construct_transfers(economy, {"only": "g"}, mode="maximal")
    assert rule.as_dict() == {"only": 7.0}


def test_transfers_sound_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(60):
        economy, x = random_instance(rng)
        try:
            for mode in ("maximal", "minimal"):
                rule = construct_transfers(economy, x, mode=mode)
                scr = SocialChoiceRule(
                    {t: Bundle(x[t], rule.price(t)) for t in x}
                )
                assert check_ic_ir(economy, scr).ic_holds
        except NotImplementable:
            assert not cycles_nonnegative_brute(economy, x)


# ---------------------------------------------------------------- DU


def test_du_holds_on_private_market(private_market):
    economy, scr = private_market
    report = check_du(economy, scr.consumption())
    assert report.holds


def test_du_violated_on_swap_market(swap_market):
    economy, scr = swap_market
    report = check_du(economy, scr.consumption())
    assert not report.holds
    assert len(report.violations) == 1
    v = report.violations[0]
    assert v.subset == ("high", "low")
    assert v.successor_map() == {"high": "low", "low": "high"}
    assert v.gap == pytest.approx(0.0, abs=1e-12)


def test_du_violated_when_tastes_identical():
    economy = Economy(
        types=[AgentType("a", 0.5), AgentType("b", 0.5)],
        goods=[Good("g1", (1.0,)), Good("g2", (2.0,))],
        utility={"a": {"g1": 3, "g2": 5}, "b": {"g1": 3, "g2": 5}},
        cost={"a": {"g1": 1, "g2": 1}, "b": {"g1": 1, "g2": 1}},
    )
    assert not check_du(economy, {"a": "g1", "b": "g2"}).holds


def test_du_guard_rejects_large_type_spaces():
    n = 12
    types = [AgentType(f"t{i:02d}", 1.0 / n) for i in range(n)]
    goods = [Good(f"g{i:02d}", (float(i),)) for i in range(n)]
    economy = Economy(
        types=types,
        goods=goods,
        utility={t.name: {g.name: float(i + j) for j, g in enumerate(goods)} for i, t in enumerate(types)},
        cost={t.name: {g.name: 0.0 for g in goods} for t in types},
    )
    x = {t.name: goods[i].name for i, t in enumerate(types)}
    with pytest.raises(GuardError, match="enumeration"):
        check_du(economy, x)


def test_du_enumeration_counts_cyclic_permutations():
    # three distinct goods -> one 3-subset with (3-1)! = 2 cycles plus
    # three 2-subsets; identical tastes violate all of them
    types = [AgentType(t, 1 / 3) for t in ("a", "b", "c")]
    goods = [Good(g, (1.0,)) for g in ("g1", "g2", "g3")]
    row = {"g1": 1.0, "g2": 2.0, "g3": 4.0}
    economy = Economy(
        types=types,
        goods=goods,
        utility={t.name: dict(row) for t in types},
        cost={t.name: {g: 0.0 for g in row} for t in types},
    )
    report = check_du(economy, {"a": "g1", "b": "g2", "c": "g3"})
    assert len(report.violations) == 3 + 2


# ------------------------------------------------- indifference structure


def test_indifference_on_private_market(private_market):
    economy, scr = private_market
    report = find_indifferent_pairs(economy, scr)
    assert report.ir_binding == ("low",)
    assert len(report.pairs) == 1
    pair = report.pairs[0]
    assert pair.who == "high"
    assert pair.own == Bundle("H", 18.0)
    assert pair.other == Bundle("L", 10.0)


def test_indifference_removed_by_price_cut(private_market):
    economy, _ = private_market
    scr = SocialChoiceRule({"low": Bundle("L", 10.0), "high": Bundle("H", 17.5)})
    report = find_indifferent_pairs(economy, scr)
    assert report.pairs == ()
    assert report.ir_binding == ("low",)


def test_indifference_empty_when_all_slack():
    economy = Economy(
        types=[AgentType("only", 1.0)],
        goods=[Good("g", (1.0,))],
        utility={"only": {"g": 7.0}},
        cost={"only": {"g": 2.0}},
    )
    scr = SocialChoiceRule({"only": Bundle("g", 5.0)})
    report = find_indifferent_pairs(economy, scr)
    assert report.pairs == () and report.ir_binding == ()


# -------------------------------------- permuted rules are blocked


def test_permuted_not_implementable_on_private_market(private_market):
    economy, scr = private_market
    assert check_permuted_not_implementable(economy, scr.consumption())


def test_permuted_check_requires_du(swap_market):
    economy, scr = swap_market
    with pytest.raises(PreconditionError, match="distinct-totals"):
        check_permuted_not_implementable(economy, scr.consumption())


def test_permuted_blocked_on_three_type_ladder():
    # single crossing: v = theta * quality, identity assignment
    thetas = {"t0": 1.0, "t1": 2.0, "t2": 3.0}
    goods = {"g0": 1.0, "g1": 2.0, "g2": 3.0}
    economy = Economy(
        types=[AgentType(t, 1 / 3) for t in thetas],
        goods=[Good(g, (q,)) for g, q in goods.items()],
        utility={t: {g: th * q for g, q in goods.items()} for t, th in thetas.items()},
        cost={t: {g: 0.5 for g in goods} for t in thetas},
    )
    x = {"t0": "g0", "t1": "g1", "t2": "g2"}
    assert check_cmon(economy, x).holds
    assert check_du(economy, x).holds
    assert check_permuted_not_implementable(economy, x)


def test_du_failure_forces_indifference(swap_market):
    economy, scr = swap_market
    x = scr.consumption()
    violation = check_du(economy, x).violations[0]
    successor = violation.successor_map()
    rng = np.random.default_rng(3)
    for mode in ("maximal", "minimal"):
        rule = construct_transfers(economy, x, mode=mode)
        prices = [rule.as_dict()]
        # IC-preserving perturbations: constant shifts of a valid price vector
        for _ in range(5):
            d = float(rng.uniform(-2, 2))
            prices.append({t: p + d for t, p in rule.as_dict().items()})
        for price in prices:
            for t in violation.subset:
                own = economy.utility[t][x[t]] - price[t]
                succ = successor[t]
                other = economy.utility[t][x[succ]] - price[succ]
                assert own == pytest.approx(other, abs=1e-9)
