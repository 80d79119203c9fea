"""Brute-force search over menus: profitable deviations and equilibrium sets.

All searches quantify over finite menus drawn from goods x a uniform price
grid, so existence claims hold "at grid resolution" and refutations are
exact.  Deviations are unilateral: one intermediary replaces its menu, the
others stand pat, and agents re-sort.

Two re-sorting semantics are used.  When a tie-break rule is given, the
deviated profile is re-allocated from scratch under that rule.  When a
baseline allocation is pinned (verifying a constructed equilibrium whose
selection a fresh re-allocation would not reproduce), agents move only for
strict utility improvements and otherwise keep their baseline seats —
agents use the same tie-breaking behaviour on and off the path.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..economy import Bundle, Economy, SocialChoiceRule
from ..errors import GuardError, ValidationError
from ..policies import Policy, PolicyKind, Violation, assess_fee
from ..tolerances import EPS_DEV, EPS_TOL
from .allocation import (
    ADVERSARIAL,
    FAVOR_TARGET,
    Allocation,
    MenuProfile,
    TieBreakRule,
    allocate,
    intermediary_profit,
    iter_selection_allocations,
)

#: cap on candidate menus per intermediary in deviation_search
MAX_CANDIDATE_MENUS = 5_000_000

#: guards for exhaustive equilibrium enumeration
ENUM_MAX_BUNDLES = 40
ENUM_MAX_MENU_SIZE = 2
ENUM_INTERMEDIARIES = 2


@dataclass(frozen=True)
class PriceGrid:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValidationError("grid step must be positive")
        if self.hi < self.lo:
            raise ValidationError("grid upper bound below lower bound")

    @property
    def prices(self) -> tuple[float, ...]:
        n = int(round((self.hi - self.lo) / self.step))
        return tuple(round(self.lo + k * self.step, 10) for k in range(n + 1))

    @staticmethod
    def default_for(scr: SocialChoiceRule, step: float = 0.1, pad: float = 5.0) -> "PriceGrid":
        prices = [b.price for b in scr.assignment.values() if not b.is_null]
        if not prices:
            raise ValidationError("target rule assigns no bundles; grid undefined")
        return PriceGrid(min(prices) - pad, max(prices) + pad, step)

    def covers(self, price: float) -> bool:
        return any(abs(p - price) <= 1e-9 for p in self.prices)

    def require_covers(self, scr: SocialChoiceRule) -> None:
        for b in scr.assignment.values():
            if not b.is_null and not self.covers(b.price):
                raise ValidationError(
                    f"grid [{self.lo}, {self.hi}] step {self.step} misses the "
                    f"target price {b.price:g}"
                )

    def bundles(self, economy: Economy) -> tuple[Bundle, ...]:
        return tuple(
            Bundle(g, p)
            for g in sorted(economy.good_names())
            for p in self.prices
        )


def _menu_count(n_bundles: int, max_menu_size: int) -> int:
    total = 1  # the empty menu
    comb = 1
    for k in range(1, max_menu_size + 1):
        comb = comb * (n_bundles - k + 1) // k
        total += comb
    return total


def _candidate_menus(
    bundles: Sequence[Bundle], max_menu_size: int
) -> Iterator[tuple[Bundle, ...]]:
    """Empty menu first, then sizes ascending, lexicographic within a size."""
    yield ()
    for k in range(1, max_menu_size + 1):
        yield from itertools.combinations(bundles, k)


def _menu_key(menu: tuple[Bundle, ...]) -> tuple:
    return tuple((b.good, b.price) for b in menu)


@dataclass(frozen=True)
class DeviationWitness:
    deviator: int
    menu: tuple[Bundle, ...]
    profit_gain: float
    baseline_profit: float | None
    deviation_profit: float
    allocation: Allocation | None

    def to_payload(self) -> dict:
        return {
            "deviator": self.deviator,
            "menu": [{"good": b.good, "price": b.price} for b in self.menu],
            "profit_gain": self.profit_gain if self.profit_gain != float("inf") else None,
            "baseline_profit": self.baseline_profit,
            "deviation_profit": self.deviation_profit,
            "allocation": self.allocation.to_payload() if self.allocation else None,
        }


def _value(profit: float | Violation) -> float:
    return float("-inf") if isinstance(profit, Violation) else profit


# -- deviation evaluation ------------------------------------------------------


class _Context:
    """Per-search immutable bundle of everything a menu evaluation needs."""

    def __init__(
        self,
        economy: Economy,
        scr: SocialChoiceRule,
        policy: Policy,
        profile: MenuProfile,
        tiebreak: TieBreakRule,
        baseline: Allocation | None,
        tol: float,
    ):
        self.economy = economy
        self.scr = scr
        self.policy = policy
        self.profile = profile
        self.tiebreak = tiebreak
        self.baseline = baseline
        self.tol = tol
        if baseline is None:
            onpath_rule = FAVOR_TARGET if tiebreak.kind == "adversarial" else tiebreak
            self.baseline_alloc = allocate(economy, profile, scr, onpath_rule, tol)
        else:
            self.baseline_alloc = baseline
        self.base_profits = [
            _value(intermediary_profit(economy, self.baseline_alloc, policy, i))
            for i in range(len(profile))
        ]

    def deviation_value(self, i: int, menu: tuple[Bundle, ...]) -> float:
        if self.baseline is not None:
            return _sticky_best_profit(self, i, menu)
        new_profile = self.profile.replace(i, menu)
        if self.tiebreak.kind == "adversarial":
            best = float("-inf")
            for alloc in iter_selection_allocations(self.economy, new_profile, self.tol):
                best = max(
                    best, _value(intermediary_profit(self.economy, alloc, self.policy, i))
                )
            return best
        alloc = allocate(self.economy, new_profile, self.scr, self.tiebreak, self.tol)
        return _value(intermediary_profit(self.economy, alloc, self.policy, i))


def _sticky_best_profit(ctx: _Context, deviator: int, menu: tuple[Bundle, ...]) -> float:
    """Deviator's best profit over all tie realizations under sticky movement.

    A type moves to the deviator only when the new menu strictly beats its
    baseline utility; displaced customers (the deviator withdrew their
    bundle) go to a rival posting the identical bundle, and failing that
    re-optimize over what remains.  Ties inside the deviator's own menu or
    in re-optimization are enumerated and resolved in the deviator's favor.
    """
    economy, tol = ctx.economy, ctx.tol
    rival_options = [
        (j, b)
        for j, m in enumerate(ctx.profile.menus)
        if j != deviator
        for b in m
    ]
    per_type_branches: list[list[tuple[tuple[int | None, Bundle, float], ...]]] = []
    type_order = []
    for t, entries in ctx.baseline_alloc.shares:
        type_order.append(t)
        mass = economy.mass(t)
        base_u = ctx.baseline_alloc.utility(t)
        menu_scored = [(b, economy.utility_of(b, t)) for b in menu]
        menu_best = max((u for _, u in menu_scored), default=float("-inf"))

        if menu_best > base_u + tol:
            tied = [b for b, u in menu_scored if u >= menu_best - tol]
            per_type_branches.append([((deviator, b, mass),) for b in tied])
            continue

        kept: list[tuple[int | None, Bundle, float]] = []
        displaced = 0.0
        for seller, bundle, share_mass in entries:
            if seller != deviator:
                kept.append((seller, bundle, share_mass))
            elif bundle in menu:
                kept.append((deviator, bundle, share_mass))
            else:
                hosts = sorted(j for j, b in rival_options if b == bundle)
                if hosts:
                    kept.append((hosts[0], bundle, share_mass))
                else:
                    displaced += share_mass
        if displaced <= 0.0:
            per_type_branches.append([tuple(kept)])
            continue
        # the withdrawn bundle is gone everywhere: re-optimize the remainder
        scored = [
            (j, b, economy.utility_of(b, t)) for j, b in rival_options
        ] + [(deviator, b, u) for b, u in menu_scored]
        purchase_max = max((u for _, _, u in scored), default=float("-inf"))
        ceiling = max(purchase_max, 0.0)
        choices: list[tuple[int | None, Bundle]] = [
            (j, b) for j, b, u in scored if u >= ceiling - tol
        ]
        if not choices or 0.0 >= ceiling - tol:
            choices.append((None, Bundle(None, 0.0)))
        branches = [tuple(kept) + ((j, b, displaced),) for j, b in choices]
        per_type_branches.append(branches)

    best = float("-inf")
    for combo in itertools.product(*per_type_branches):
        measures: list[dict[str, float]] = [dict() for _ in range(len(ctx.profile))]
        gross = 0.0
        for t, entries in zip(type_order, combo):
            for seller, bundle, share_mass in entries:
                if seller is None or bundle.is_null:
                    continue
                m = measures[seller]
                m[bundle.good] = m.get(bundle.good, 0.0) + share_mass
                if seller == deviator:
                    gross += share_mass * economy.profit_of(bundle, t)
        others = [m for j, m in enumerate(measures) if j != deviator]
        fee = assess_fee(ctx.policy, measures[deviator], others)
        if isinstance(fee, Violation):
            continue
        best = max(best, gross - fee.amount)
    return best


def _better(a: tuple, b: tuple | None) -> bool:
    # candidates are (gain, deviator, menu_size, menu_key, menu)
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    return (a[1], a[2], a[3]) < (b[1], b[2], b[3])


# worker-side state for parallel scans
_WORKER_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _scan_chunk(args: tuple) -> tuple | None:
    deviator, menus, dev_eps, mode = args
    ctx = _WORKER_CTX
    best: tuple | None = None
    base = ctx.base_profits[deviator]
    for menu in menus:
        value = ctx.deviation_value(deviator, menu)
        if value == float("-inf"):
            continue
        gain = value - base if base != float("-inf") else float("inf")
        if gain > dev_eps:
            cand = (gain, deviator, len(menu), _menu_key(menu), menu)
            if mode == "any":
                return cand
            if _better(cand, best):
                best = cand
    return best


def deviation_search(
    economy: Economy,
    scr: SocialChoiceRule,
    policy: Policy,
    profile: MenuProfile,
    tiebreak: TieBreakRule = FAVOR_TARGET,
    grid: PriceGrid | None = None,
    max_menu_size: int = 2,
    mode: str = "best",
    baseline: Allocation | None = None,
    jobs: int = 1,
    tol: float = EPS_TOL,
    dev_eps: float = EPS_DEV,
) -> DeviationWitness | None:
    """Search all unilateral menu deviations for a profitable one.

    mode="best" scans everything and returns the deviation with the largest
    gain (ties: smaller menu, lexicographic menu, lower intermediary index);
    mode="any" stops at the first profitable candidate in enumeration
    order.  ``baseline`` pins the on-path allocation and switches agent
    movement to sticky semantics.  Returns None when no menu of at most
    ``max_menu_size`` grid bundles gains more than ``dev_eps``.
    """
    if grid is None:
        grid = PriceGrid.default_for(scr)
    grid.require_covers(scr)
    if max_menu_size < 1:
        raise ValidationError("max menu size must be at least 1")
    bundles = grid.bundles(economy)
    count = _menu_count(len(bundles), max_menu_size)
    if count > MAX_CANDIDATE_MENUS:
        raise GuardError(
            f"deviation search over {count} menus per intermediary exceeds the "
            f"cap {MAX_CANDIDATE_MENUS}; shrink the grid ({len(bundles)} bundles) "
            f"or the menu size {max_menu_size}"
        )
    if baseline is not None:
        _check_baseline(profile, baseline)

    ctx = _Context(economy, scr, policy, profile, tiebreak, baseline, tol)
    best: tuple | None = None
    deviators = range(len(profile))

    if jobs <= 1:
        _init_worker(ctx)
        for i in deviators:
            found = _scan_chunk((i, list(_candidate_menus(bundles, max_menu_size)), dev_eps, mode))
            if found is not None:
                if mode == "any":
                    best = found
                    break
                if _better(found, best):
                    best = found
    else:
        menus = list(_candidate_menus(bundles, max_menu_size))
        chunk_size = max(1, len(menus) // (jobs * 8))
        tasks = [
            (i, menus[k : k + chunk_size], dev_eps, mode)
            for i in deviators
            for k in range(0, len(menus), chunk_size)
        ]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
            for found in pool.map(_scan_chunk, tasks, chunksize=1):
                if found is None:
                    continue
                if mode == "any":
                    best = found
                    break
                if _better(found, best):
                    best = found

    if best is None:
        return None
    gain, deviator, _, _, menu = best
    value = ctx.deviation_value(deviator, menu)
    base = ctx.base_profits[deviator]
    witness_alloc = None
    if baseline is None and tiebreak.kind != "adversarial":
        witness_alloc = allocate(
            economy, profile.replace(deviator, menu), scr, tiebreak, tol
        )
    return DeviationWitness(
        deviator=deviator,
        menu=menu,
        profit_gain=gain,
        baseline_profit=None if base == float("-inf") else base,
        deviation_profit=value,
        allocation=witness_alloc,
    )


def _check_baseline(profile: MenuProfile, baseline: Allocation) -> None:
    for t, entries in baseline.shares:
        for seller, bundle, _ in entries:
            if seller is None:
                continue
            if seller >= len(profile) or bundle not in profile.menus[seller]:
                raise ValidationError(
                    f"baseline allocation sells {bundle.label()} through "
                    f"intermediary {seller}, which does not post it"
                )


# -- exhaustive equilibrium enumeration ------------------------------------------


@dataclass(frozen=True)
class Equilibrium:
    profile: MenuProfile
    allocation: Allocation
    profits: tuple[float, ...]

    def to_payload(self) -> dict:
        return {
            "menus": self.profile.to_payload(),
            "allocation": self.allocation.to_payload(),
            "profits": list(self.profits),
        }


def enumerate_equilibria(
    economy: Economy,
    scr: SocialChoiceRule,
    policy: Policy,
    grid: PriceGrid,
    max_menu_size: int = 2,
    intermediaries: int = 2,
    jobs: int = 1,
    tol: float = EPS_TOL,
    dev_eps: float = EPS_DEV,
) -> list[Equilibrium]:
    """All grid menu profiles and selections no unilateral deviation upsets.

    Enumerates unordered menu pairs (profiles are reported with the two
    menus in canonical order; the mirrored profile is an equilibrium by
    symmetry) and, per profile, every pure selection of utility-maximal
    bundles (mass splits equally across the sellers of the chosen bundle;
    walking away is a selectable option at exact indifference).  A
    candidate survives if neither intermediary has a sticky-semantics
    deviation gaining more than ``dev_eps``.
    """
    if intermediaries != ENUM_INTERMEDIARIES:
        raise GuardError("exhaustive enumeration is limited to 2 intermediaries")
    if max_menu_size > ENUM_MAX_MENU_SIZE:
        raise GuardError("exhaustive enumeration is limited to menus of 2 bundles")
    grid.require_covers(scr)
    bundles = grid.bundles(economy)
    if len(bundles) > ENUM_MAX_BUNDLES:
        raise GuardError(
            f"{len(bundles)} grid bundles exceed the enumeration cap "
            f"{ENUM_MAX_BUNDLES}; shrink the grid"
        )

    from ._enumerate import run_enumeration

    return run_enumeration(
        economy, scr, policy, bundles, max_menu_size, jobs, tol, dev_eps
    )
