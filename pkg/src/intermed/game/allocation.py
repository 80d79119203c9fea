"""Agent choice over posted menus.

Agents are divisible type-masses.  Each type ranks every posted bundle
plus the ever-present null option and places its mass on utility-maximal
choices; how ties are split is the tie-breaking rule.  A type walks away
only when every purchase is strictly worse than nothing — at exact
indifference with the null option it buys, which is what lets break-even
equilibria exist.

Tie-break rules:

favor-target   mass goes to the bundle carrying the type's target good when
               one is utility-maximal, split equally across the sellers
               posting that bundle
lowest-index   the single maximal option with the smallest seller index
split-uniform  equal split over every maximal (seller, bundle) option
adversarial    no fixed selection; verifiers enumerate all pure selections
               via :func:`iter_selection_allocations`
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..economy import Bundle, Economy, SocialChoiceRule
from ..errors import ValidationError
from ..policies import Fee, Policy, Violation, assess_fee
from ..tolerances import EPS_TOL


@dataclass(frozen=True)
class TieBreakRule:
    """Named tie-break; ``goal`` matters only for the adversarial rule,
    which quantifies over selections instead of fixing one."""

    kind: str
    goal: str = "pro-deviation"


FAVOR_TARGET = TieBreakRule("favor-target")
LOWEST_INDEX = TieBreakRule("lowest-index")
SPLIT_UNIFORM = TieBreakRule("split-uniform")
ADVERSARIAL = TieBreakRule("adversarial")

TIEBREAK_NAMES = {
    "favor-target": FAVOR_TARGET,
    "lowest-index": LOWEST_INDEX,
    "split-uniform": SPLIT_UNIFORM,
    "adversarial": ADVERSARIAL,
}


def _canonical_menu(bundles: Sequence[Bundle]) -> tuple[Bundle, ...]:
    return tuple(sorted(set(bundles), key=lambda b: (b.good or "", b.price)))


@dataclass(frozen=True)
class MenuProfile:
    """One finite bundle menu per intermediary, canonically sorted."""

    menus: tuple[tuple[Bundle, ...], ...]

    @staticmethod
    def of(menus: Sequence[Sequence[Bundle]]) -> "MenuProfile":
        return MenuProfile(tuple(_canonical_menu(m) for m in menus))

    @staticmethod
    def target(scr: SocialChoiceRule, intermediaries: int = 2) -> "MenuProfile":
        menu = _canonical_menu(
            [b for b in scr.assignment.values() if not b.is_null]
        )
        return MenuProfile(tuple(menu for _ in range(intermediaries)))

    def replace(self, i: int, menu: Sequence[Bundle]) -> "MenuProfile":
        menus = list(self.menus)
        menus[i] = _canonical_menu(menu)
        return MenuProfile(tuple(menus))

    def __len__(self) -> int:
        return len(self.menus)

    def to_payload(self) -> list[list[dict]]:
        return [
            [{"good": b.good, "price": b.price} for b in menu] for menu in self.menus
        ]


#: a share is (seller index or None for the null option, bundle, mass)
Share = tuple[int | None, Bundle, float]


@dataclass(frozen=True)
class Allocation:
    shares: tuple[tuple[str, tuple[Share, ...]], ...]
    measures: tuple[tuple[tuple[str, float], ...], ...]
    utilities: tuple[tuple[str, float], ...]

    def shares_of(self, type_name: str) -> tuple[Share, ...]:
        return dict(self.shares)[type_name]

    def measure(self, i: int) -> dict[str, float]:
        return dict(self.measures[i])

    def all_measures(self) -> list[dict[str, float]]:
        return [dict(m) for m in self.measures]

    def utility(self, type_name: str) -> float:
        return dict(self.utilities)[type_name]

    def to_payload(self) -> dict:
        return {
            "shares": {
                t: [
                    {
                        "intermediary": seller,
                        "good": bundle.good,
                        "price": bundle.price,
                        "mass": mass,
                    }
                    for seller, bundle, mass in entries
                ]
                for t, entries in self.shares
            },
            "measures": [dict(m) for m in self.measures],
            "utilities": dict(self.utilities),
        }


def _split_mass(mass: float, k: int) -> list[float]:
    # last share takes the float residual so the total is exact
    if k == 1:
        return [mass]
    part = mass / k
    parts = [part] * (k - 1)
    parts.append(mass - part * (k - 1))
    return parts


def _assemble(
    economy: Economy,
    n_intermediaries: int,
    per_type: dict[str, list[Share]],
) -> Allocation:
    measures: list[dict[str, float]] = [dict() for _ in range(n_intermediaries)]
    utilities = {}
    for t, entries in per_type.items():
        for seller, bundle, mass in entries:
            if seller is not None and not bundle.is_null:
                m = measures[seller]
                m[bundle.good] = m.get(bundle.good, 0.0) + mass
        utilities[t] = economy.utility_of(entries[0][1], t)
    return Allocation(
        shares=tuple(sorted((t, tuple(v)) for t, v in per_type.items())),
        measures=tuple(tuple(sorted(m.items())) for m in measures),
        utilities=tuple(sorted(utilities.items())),
    )


def _options(
    profile: MenuProfile,
) -> list[tuple[int, Bundle]]:
    return [
        (i, bundle)
        for i, menu in enumerate(profile.menus)
        for bundle in menu
    ]


def _maximizers(
    economy: Economy,
    options: list[tuple[int, Bundle]],
    t: str,
    tol: float,
) -> tuple[list[tuple[int, Bundle, float]], float]:
    """Utility-maximal purchase options and the overall ceiling (incl. null)."""
    scored = [(i, b, economy.utility_of(b, t)) for i, b in options]
    purchase_max = max((u for _, _, u in scored), default=float("-inf"))
    ceiling = max(purchase_max, 0.0)
    if purchase_max < -tol:
        return [], 0.0
    best = [(i, b, u) for i, b, u in scored if u >= ceiling - tol]
    return best, ceiling


def allocate(
    economy: Economy,
    profile: MenuProfile,
    scr: SocialChoiceRule | None = None,
    tiebreak: TieBreakRule = FAVOR_TARGET,
    tol: float = EPS_TOL,
) -> Allocation:
    """Distribute every type's mass over utility-maximal options.

    ``scr`` is consulted only by the favor-target rule.  The adversarial
    rule has no single allocation; call :func:`iter_selection_allocations`
    instead.
    """
    if tiebreak.kind == "adversarial":
        raise ValidationError(
            "adversarial tie-breaking does not induce a single allocation; "
            "enumerate selections instead"
        )
    if tiebreak.kind == "favor-target" and scr is None:
        raise ValidationError("favor-target tie-breaking needs the target rule")

    options = _options(profile)
    per_type: dict[str, list[Share]] = {}
    for t in economy.type_names():
        best, _ = _maximizers(economy, options, t, tol)
        if not best:
            per_type[t] = [(None, Bundle(None, 0.0), economy.mass(t))]
            continue
        mass = economy.mass(t)

        if tiebreak.kind == "favor-target":
            target = scr.bundle(t)
            if target.is_null:
                # favoring the target means staying out when that is maximal
                if all(u <= tol for _, _, u in best):
                    per_type[t] = [(None, Bundle(None, 0.0), mass)]
                    continue
                chosen = min(best, key=lambda e: (e[1].good or "", e[1].price))[1]
            else:
                targeted = [e for e in best if e[1].good == target.good]
                pool = targeted or best
                chosen = min(pool, key=lambda e: (e[1].price, e[1].good or ""))[1]
            sellers = sorted(i for i, b, _ in best if b == chosen)
            parts = _split_mass(mass, len(sellers))
            per_type[t] = [
                (i, chosen, part) for i, part in zip(sellers, parts)
            ]
        elif tiebreak.kind == "lowest-index":
            i, b, _ = min(best, key=lambda e: (e[0], e[1].good or "", e[1].price))
            per_type[t] = [(i, b, mass)]
        elif tiebreak.kind == "split-uniform":
            ordered = sorted(best, key=lambda e: (e[0], e[1].good or "", e[1].price))
            parts = _split_mass(mass, len(ordered))
            per_type[t] = [
                (i, b, part) for (i, b, _), part in zip(ordered, parts)
            ]
        else:
            raise ValidationError(f"unknown tie-break rule {tiebreak.kind}")

    return _assemble(economy, len(profile), per_type)


def iter_selection_allocations(
    economy: Economy,
    profile: MenuProfile,
    tol: float = EPS_TOL,
) -> Iterator[Allocation]:
    """All pure selections of utility-maximal options, one per type.

    The null option participates as a selectable vertex whenever it is
    utility-maximal.  This is the finite quantifier behind adversarial
    tie-breaking.
    """
    options = _options(profile)
    per_type_choices: list[tuple[str, list[Share]]] = []
    for t in economy.type_names():
        best, ceiling = _maximizers(economy, options, t, tol)
        mass = economy.mass(t)
        choices: list[Share] = [(i, b, mass) for i, b, _ in best]
        if not best or 0.0 >= ceiling - tol:
            choices.append((None, Bundle(None, 0.0), mass))
        choices.sort(key=lambda e: (e[0] if e[0] is not None else 10**9, e[1].good or "", e[1].price))
        per_type_choices.append((t, choices))

    names = [t for t, _ in per_type_choices]
    for combo in itertools.product(*(c for _, c in per_type_choices)):
        per_type = {t: [share] for t, share in zip(names, combo)}
        yield _assemble(economy, len(profile), per_type)


def intermediary_profit(
    economy: Economy,
    alloc: Allocation,
    policy: Policy,
    i: int,
) -> float | Violation:
    """Gross sales profit of intermediary ``i`` minus its fee under ``policy``."""
    gross = 0.0
    for t, entries in alloc.shares:
        for seller, bundle, mass in entries:
            if seller == i:
                gross += mass * economy.profit_of(bundle, t)
    others = [m for j, m in enumerate(alloc.all_measures()) if j != i]
    fee = assess_fee(policy, alloc.measure(i), others)
    if isinstance(fee, Violation):
        return fee
    return gross - fee.amount
