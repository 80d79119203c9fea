"""Regulator policies over sold-good measures.

A policy maps an intermediary's sold-good measure to either a money fee or
a Violation, the tagged stand-in for the regulator's ruinous penalty.  The
penalty is a value, never a large float, so fee arithmetic can't silently
absorb it.

Per-unit schedules always return a fee.  Distribution regulations return
the per-unit fee only when the measure passes their test: matching the
target distribution, matching every rival, covering the full product line,
or (monopoly refinement) hitting the target distribution at exact mass.
Inactive intermediaries (zero measure) pay zero and are exempt from the
tests unless ``punish_inactive`` is set; without the exemption no-entry
play would be unsustainable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .economy import Economy, GoodDistribution, SocialChoiceRule, target_distribution, target_profit
from .errors import ValidationError
from .tolerances import EPS_DISTR, EPS_TOL

#: Sold mass below this is treated as "not sold" for support and activity tests.
ACTIVITY_EPS = 1e-12


class PolicyKind(enum.Enum):
    PER_UNIT = "per-unit"
    TARGET_DISTRIBUTION = "target-distribution"
    MATCH_EACH_OTHER = "match-each-other"
    FULL_LINE = "full-line"
    MONOPOLY = "monopoly-distribution"


@dataclass(frozen=True)
class Fee:
    amount: float


@dataclass(frozen=True)
class Violation:
    reason: str


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    fees: tuple[tuple[str, float], ...]
    distribution: GoodDistribution | None = None
    distr_tol: float = EPS_DISTR
    punish_inactive: bool = False
    required_mass: float | None = None  # monopoly refinement: exact total mass

    def fee_of(self, good: str) -> float:
        table = dict(self.fees)
        if good not in table:
            raise ValidationError(f"policy has no fee for good {good}")
        return table[good]

    def fee_table(self) -> dict[str, float]:
        return dict(self.fees)

    def describe(self) -> dict:
        payload: dict = {"kind": self.kind.value, "fees": dict(self.fees)}
        if self.distribution is not None:
            payload["distribution"] = self.distribution.as_dict()
        if self.required_mass is not None:
            payload["required_mass"] = self.required_mass
        return payload


def _target_fee_table(economy: Economy, scr: SocialChoiceRule) -> tuple[tuple[str, float], ...]:
    assigned = set(scr.assigned_goods())
    missing = [g for g in economy.good_names() if g not in assigned]
    if missing:
        raise ValidationError(
            f"target rule assigns no type to goods {missing}; break-even fees "
            "are undefined off the target line"
        )
    return tuple(
        sorted((g, target_profit(economy, scr, g)) for g in economy.good_names())
    )


def make_per_unit_policy(
    economy: Economy, scr: SocialChoiceRule, punish_inactive: bool = False
) -> Policy:
    """Per-unit schedule charging each good its break-even target profit."""
    return Policy(
        kind=PolicyKind.PER_UNIT,
        fees=_target_fee_table(economy, scr),
        punish_inactive=punish_inactive,
    )


def per_unit_policy(fees: Mapping[str, float]) -> Policy:
    """Custom per-unit schedule (cross-subsidizing schedules included)."""
    return Policy(kind=PolicyKind.PER_UNIT, fees=tuple(sorted(fees.items())))


def make_distribution_policy(
    economy: Economy,
    scr: SocialChoiceRule,
    variant: str = "target",
    distr_tol: float = EPS_DISTR,
    punish_inactive: bool = False,
) -> Policy:
    """Distribution regulation in one of four variants.

    target      sold-good distribution must match the target distribution
    match       must match every rival's distribution (target not needed)
    full-line   must sell every good
    monopoly    target distribution at exact target mass, fees charged at
                the revenue-maximal prices supporting the target consumption
    """
    fees = _target_fee_table(economy, scr)
    if variant == "target":
        return Policy(
            kind=PolicyKind.TARGET_DISTRIBUTION,
            fees=fees,
            distribution=target_distribution(economy, scr),
            distr_tol=distr_tol,
            punish_inactive=punish_inactive,
        )
    if variant == "match":
        return Policy(
            kind=PolicyKind.MATCH_EACH_OTHER,
            fees=fees,
            distr_tol=distr_tol,
            punish_inactive=punish_inactive,
        )
    if variant == "full-line":
        return Policy(
            kind=PolicyKind.FULL_LINE,
            fees=fees,
            distr_tol=distr_tol,
            punish_inactive=punish_inactive,
        )
    if variant == "monopoly":
        from .incentives import construct_transfers

        x = scr.consumption()
        rule = construct_transfers(economy, x, mode="maximal", anchor_utility=0.0)
        max_fees: dict[str, float] = {}
        for g in economy.good_names():
            targeted = [t for t in x if x[t] == g]
            mass = sum(economy.mass(t) for t in targeted)
            max_fees[g] = (
                sum(
                    economy.mass(t) * (rule.price(t) - economy.cost[t][g])
                    for t in targeted
                )
                / mass
            )
        active_mass = sum(economy.mass(t) for t in scr.active_types())
        return Policy(
            kind=PolicyKind.MONOPOLY,
            fees=tuple(sorted(max_fees.items())),
            distribution=target_distribution(economy, scr),
            distr_tol=distr_tol,
            punish_inactive=punish_inactive,
            required_mass=active_mass,
        )
    raise ValidationError(f"unknown distribution-policy variant {variant}")


# -- fee assessment -----------------------------------------------------------


def _total(measure: Mapping[str, float]) -> float:
    return sum(measure.values())


def _is_inactive(measure: Mapping[str, float]) -> bool:
    return _total(measure) <= ACTIVITY_EPS


def _normalized(measure: Mapping[str, float]) -> dict[str, float]:
    total = _total(measure)
    return {g: m / total for g, m in measure.items()}


def _sup_distance(
    a: Mapping[str, float], b: Mapping[str, float]
) -> float:
    goods = set(a) | set(b)
    return max(abs(a.get(g, 0.0) - b.get(g, 0.0)) for g in goods)


def _per_unit_total(policy: Policy, measure: Mapping[str, float]) -> Fee:
    return Fee(sum(policy.fee_of(g) * m for g, m in measure.items() if m != 0.0))


def assess_fee(
    policy: Policy,
    measure: Mapping[str, float],
    others: Sequence[Mapping[str, float]] = (),
) -> Fee | Violation:
    """Fee charged to an intermediary with sold-good measure ``measure``.

    ``others`` carries the rivals' measures; only the match-each-other
    variant reads it.  Negative masses are rejected; everything else
    returns a value (Violation included) rather than raising.
    """
    for g, m in measure.items():
        if m < -ACTIVITY_EPS:
            raise ValidationError(f"negative sold mass for good {g}")

    inactive = _is_inactive(measure)
    if inactive and not policy.punish_inactive:
        return Fee(0.0)

    if policy.kind is PolicyKind.PER_UNIT:
        return _per_unit_total(policy, measure)

    if policy.kind is PolicyKind.FULL_LINE:
        if inactive:
            return Violation("inactive intermediary punished under full-line forcing")
        sold = {g for g, m in measure.items() if m > ACTIVITY_EPS}
        required = set(dict(policy.fees))
        if sold != required:
            missing = sorted(required - sold)
            return Violation(f"full line not carried: missing {missing}")
        return _per_unit_total(policy, measure)

    if policy.kind is PolicyKind.MATCH_EACH_OTHER:
        if inactive:
            return Violation("inactive intermediary punished under matching rule")
        mine = _normalized(measure)
        for other in others:
            if _is_inactive(other):
                # an active seller facing an inactive rival cannot match it
                return Violation("distribution mismatch: rival sold nothing")
            if _sup_distance(mine, _normalized(other)) > policy.distr_tol:
                return Violation("distribution mismatch with rival")
        return _per_unit_total(policy, measure)

    # target-distribution and its monopoly refinement
    if inactive:
        return Violation("inactive intermediary punished under distribution rule")
    assert policy.distribution is not None
    mine = _normalized(measure)
    if _sup_distance(mine, policy.distribution.as_dict()) > policy.distr_tol:
        return Violation("distribution mismatch")
    if policy.kind is PolicyKind.MONOPOLY and policy.required_mass is not None:
        if abs(_total(measure) - policy.required_mass) > policy.distr_tol:
            return Violation(
                f"total sold mass {_total(measure):g} != required "
                f"{policy.required_mass:g}"
            )
    return _per_unit_total(policy, measure)


def cross_subsidy_schedules(
    economy: Economy,
    scr: SocialChoiceRule,
    sweep_good: str,
    lo: float,
    hi: float,
    step: float,
) -> list[Policy]:
    """Two-good per-unit schedules breaking even on average at target masses.

    Sweeps the fee on ``sweep_good`` over [lo, hi] and solves the other
    good's fee from mass-weighted break-even; the schedule equal to the
    bundle-wise break-even one is included when the grid hits it.
    """
    goods = list(economy.good_names())
    if len(goods) != 2:
        raise ValidationError("cross-subsidy sweep needs exactly two goods")
    other = goods[0] if goods[1] == sweep_good else goods[1]
    if sweep_good not in goods:
        raise ValidationError(f"unknown good {sweep_good}")
    dist = target_distribution(economy, scr).as_dict()
    breakeven = sum(
        dist[g] * target_profit(economy, scr, g) for g in goods
    )
    schedules = []
    n = int(round((hi - lo) / step))
    for k in range(n + 1):
        t_sweep = round(lo + k * step, 10)
        t_other = (breakeven - dist[sweep_good] * t_sweep) / dist[other]
        schedules.append(per_unit_policy({sweep_good: t_sweep, other: t_other}))
    return schedules
