"""Exhaustive equilibrium enumeration over a bundle grid.

Candidates are (menu pair, selection) states: each type picks one
utility-maximal bundle (or walks away at exact indifference) and splits
its mass over the sellers posting that bundle.  A candidate survives when
neither intermediary has a deviation menu whose sticky-semantics profit
beats its on-path profit.

The scan over ~10^5 profiles x ~600 deviation menus is pruned with exact
layers, cheapest first:

  1. an intermediary earning less than -eps exits profitably: dead;
  2. a deviator with no on-path customers earns exactly the best
     strict-capture value, memoized per utility vector: decided O(1);
  3. a sound per-menu upper bound (capture exact, retention bounded by the
     best reachable per-customer margin) clears survivors vectorized;
  4. a short-circuiting exact scan settles the rest.

Layers 2-4 take the per-unit additive shortcut (realization branches are
independent across types); distribution policies go straight to a small
exact scan, which their grid guard keeps cheap.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..economy import Bundle, Economy, SocialChoiceRule
from ..policies import Policy, PolicyKind, Violation, assess_fee
from .allocation import Allocation, MenuProfile

NEG_INF = float("-inf")


class _EnumContext:
    def __init__(
        self,
        economy: Economy,
        scr: SocialChoiceRule,
        policy: Policy,
        bundles: tuple[Bundle, ...],
        max_menu_size: int,
        tol: float,
        dev_eps: float,
    ):
        self.economy = economy
        self.scr = scr
        self.policy = policy
        self.bundles = bundles
        self.tol = tol
        self.dev_eps = dev_eps
        self.per_unit = policy.kind is PolicyKind.PER_UNIT

        self.types = list(economy.type_names())
        self.masses = [economy.mass(t) for t in self.types]
        T, B = len(self.types), len(bundles)
        self.goods = [b.good for b in bundles]
        self.u = np.array(
            [[economy.utility_of(b, t) for b in bundles] for t in self.types]
        )
        self.profit = np.array(
            [[economy.profit_of(b, t) for b in bundles] for t in self.types]
        )
        fee_row = np.array([policy.fee_of(b.good) for b in bundles])
        self.net = self.profit - fee_row[None, :]

        menus: list[tuple[int, ...]] = [()]
        for k in range(1, max_menu_size + 1):
            menus.extend(itertools.combinations(range(B), k))
        self.menus = menus
        M = len(menus)
        self.menu_sets = [frozenset(m) for m in menus]

        self.mb_u = np.full((T, M), NEG_INF)
        self.cap_net = np.full((T, M), NEG_INF)
        self.max_net = np.full((T, M), NEG_INF)
        self.achievers: list[list[tuple[int, ...]]] = [[() for _ in range(M)] for _ in range(T)]
        for mi, menu in enumerate(menus):
            if not menu:
                continue
            ids = np.array(menu)
            for ti in range(T):
                us = self.u[ti, ids]
                best = us.max()
                self.mb_u[ti, mi] = best
                top = ids[us >= best - tol]
                self.achievers[ti][mi] = tuple(int(x) for x in top)
                self.cap_net[ti, mi] = self.net[ti, top].max()
                self.max_net[ti, mi] = self.net[ti, ids].max()

        self._capture_memo: dict[tuple, float] = {}

    # -- layer 2: best pure-capture value for a customer-less deviator ------

    def best_capture(self, u_vec: tuple[float, ...]) -> float:
        key = u_vec
        cached = self._capture_memo.get(key)
        if cached is not None:
            return cached
        total = np.zeros(len(self.menus))
        for ti, ut in enumerate(u_vec):
            captured = self.mb_u[ti] > ut + self.tol
            total += np.where(captured, self.masses[ti] * self.cap_net[ti], 0.0)
        value = float(total.max())
        self._capture_memo[key] = value
        return value

    # -- layer 3: sound upper bound over all deviation menus ----------------

    def deviation_upper_bound(
        self,
        u_vec: tuple[float, ...],
        choice: tuple[int | None, ...],
        dev_share: tuple[float, ...],
    ) -> float:
        total = np.zeros(len(self.menus))
        for ti, ut in enumerate(u_vec):
            captured = self.mb_u[ti] > ut + self.tol
            cap_term = self.masses[ti] * self.cap_net[ti]
            share = dev_share[ti]
            if share > 0.0:
                c = choice[ti]
                keep = max(0.0, float(self.net[ti, c]))
                stay_term = share * np.maximum(
                    keep, np.maximum(0.0, self.max_net[ti])
                )
            else:
                stay_term = 0.0
            total += np.where(captured, cap_term, stay_term)
        return float(total.max())

    # -- layer 4: exact sticky profit of one deviation menu -----------------

    def exact_profit_per_unit(
        self,
        mi: int,
        rival_menu: frozenset[int],
        rival_best_u: tuple[float, ...],
        u_vec: tuple[float, ...],
        choice: tuple[int | None, ...],
        dev_share: tuple[float, ...],
    ) -> float:
        """Per-unit policies: realization branches are independent across
        types, so the deviator-best profit is the sum of per-type maxima."""
        total = 0.0
        menu_set = self.menu_sets[mi]
        for ti in range(len(self.types)):
            mb = self.mb_u[ti, mi]
            if mb > u_vec[ti] + self.tol:
                total += self.masses[ti] * self.cap_net[ti, mi]
                continue
            share = dev_share[ti]
            if share <= 0.0:
                continue
            c = choice[ti]
            if c in menu_set:
                total += share * self.net[ti, c]
                continue
            if c in rival_menu:
                continue
            # displaced: re-optimize over rival menu, new menu, and exit
            ceiling = max(rival_best_u[ti], mb, 0.0)
            if mb >= ceiling - self.tol:
                best = max(
                    self.net[ti, a]
                    for a in self.achievers[ti][mi]
                    if self.u[ti, a] >= ceiling - self.tol
                )
                if rival_best_u[ti] >= ceiling - self.tol or 0.0 >= ceiling - self.tol:
                    best = max(best, 0.0)
                total += share * best
        return total

    def exact_profit_general(
        self,
        mi: int,
        rival_mi: int,
        u_vec: tuple[float, ...],
        choice: tuple[int | None, ...],
        dev_share: tuple[float, ...],
        rival_share: tuple[float, ...],
    ) -> float:
        """Distribution policies: enumerate realization branches and assess
        the fee on the realized measures."""
        menu_set = self.menu_sets[mi]
        rival_menu = self.menu_sets[rival_mi]
        rival_best_u = tuple(
            float(self.mb_u[ti, rival_mi]) for ti in range(len(self.types))
        )
        branches_per_type: list[list[tuple[tuple[int | None, float], ...]]] = []
        for ti in range(len(self.types)):
            mass = self.masses[ti]
            c = choice[ti]
            mb = self.mb_u[ti, mi]
            if mb > u_vec[ti] + self.tol:
                branches_per_type.append(
                    [(( "dev", a, mass),) for a in self.achievers[ti][mi]]  # type: ignore[list-item]
                )
                continue
            seats: list[tuple[str, int | None, float]] = []
            displaced = 0.0
            if c is not None:
                if dev_share[ti] > 0.0:
                    if c in menu_set:
                        seats.append(("dev", c, dev_share[ti]))
                    elif c in rival_menu:
                        seats.append(("rival", c, dev_share[ti]))
                    else:
                        displaced = dev_share[ti]
                if rival_share[ti] > 0.0:
                    seats.append(("rival", c, rival_share[ti]))
            if displaced <= 0.0:
                branches_per_type.append([tuple(seats)])
                continue
            ceiling = max(rival_best_u[ti], mb, 0.0)
            options: list[tuple[str, int | None]] = []
            if mb >= ceiling - self.tol:
                options += [
                    ("dev", a)
                    for a in self.achievers[ti][mi]
                    if self.u[ti, a] >= ceiling - self.tol
                ]
            if rival_best_u[ti] >= ceiling - self.tol:
                options += [
                    ("rival", a)
                    for a in self.achievers[ti][rival_mi]
                    if self.u[ti, a] >= ceiling - self.tol
                ]
            if 0.0 >= ceiling - self.tol or not options:
                options.append(("null", None))
            branches_per_type.append(
                [tuple(seats) + ((side, a, displaced),) for side, a in options]
            )

        best = NEG_INF
        for combo in itertools.product(*branches_per_type):
            dev_measure: dict[str, float] = {}
            rival_measure: dict[str, float] = {}
            gross = 0.0
            for ti, seats in enumerate(combo):
                for side, a, mass in seats:
                    if side == "null" or a is None:
                        continue
                    good = self.goods[a]
                    if side == "dev":
                        dev_measure[good] = dev_measure.get(good, 0.0) + mass
                        gross += mass * self.profit[ti, a]
                    else:
                        rival_measure[good] = rival_measure.get(good, 0.0) + mass
            fee = assess_fee(self.policy, dev_measure, [rival_measure])
            if isinstance(fee, Violation):
                continue
            best = max(best, gross - fee.amount)
        return best

    # -- per-deviator survival ----------------------------------------------

    def deviator_survives(
        self,
        dev_mi: int,
        rival_mi: int,
        base: float,
        u_vec: tuple[float, ...],
        choice: tuple[int | None, ...],
        dev_share: tuple[float, ...],
        rival_share: tuple[float, ...],
    ) -> bool:
        if base < -self.dev_eps:
            return False
        threshold = base + self.dev_eps
        if self.per_unit:
            if all(s <= 0.0 for s in dev_share):
                return self.best_capture(u_vec) <= threshold
            if self.deviation_upper_bound(u_vec, choice, dev_share) <= threshold:
                return True
            rival_menu = self.menu_sets[rival_mi]
            rival_best_u = tuple(
                float(self.mb_u[ti, rival_mi]) for ti in range(len(self.types))
            )
            for mi in range(len(self.menus)):
                value = self.exact_profit_per_unit(
                    mi, rival_menu, rival_best_u, u_vec, choice, dev_share
                )
                if value > threshold:
                    return False
            return True
        for mi in range(len(self.menus)):
            value = self.exact_profit_general(
                mi, rival_mi, u_vec, choice, dev_share, rival_share
            )
            if value > threshold:
                return False
        return True


def _selections(ctx: _EnumContext, a: int, b: int):
    """Per-type maximizer choices for the profile (menu a, menu b)."""
    per_type: list[list[int | None]] = []
    for ti in range(len(ctx.types)):
        best = max(ctx.mb_u[ti, a], ctx.mb_u[ti, b])
        ceiling = max(best, 0.0)
        choices: list[int | None] = []
        if best >= -ctx.tol:
            ids = sorted(set(ctx.menus[a]) | set(ctx.menus[b]))
            choices = [c for c in ids if ctx.u[ti, c] >= ceiling - ctx.tol]
        if 0.0 >= ceiling - ctx.tol:
            choices.append(None)
        per_type.append(choices)
    return itertools.product(*per_type)


def _evaluate_profile(ctx: _EnumContext, a: int, b: int) -> list[tuple]:
    """Surviving (selection, base profits) states of one canonical profile."""
    survivors = []
    for selection in _selections(ctx, a, b):
        u_vec = []
        share_a = []
        share_b = []
        base_a = 0.0
        base_b = 0.0
        measures = ({}, {})  # only needed for distribution policies
        for ti, c in enumerate(selection):
            if c is None:
                u_vec.append(0.0)
                share_a.append(0.0)
                share_b.append(0.0)
                continue
            u_vec.append(float(ctx.u[ti, c]))
            in_a = c in ctx.menu_sets[a]
            in_b = c in ctx.menu_sets[b]
            k = int(in_a) + int(in_b)
            part = ctx.masses[ti] / k
            share_a.append(part if in_a else 0.0)
            share_b.append(part if in_b else 0.0)
            if ctx.per_unit:
                base_a += (part if in_a else 0.0) * ctx.net[ti, c]
                base_b += (part if in_b else 0.0) * ctx.net[ti, c]
            else:
                good = ctx.goods[c]
                gross = ctx.profit[ti, c]
                if in_a:
                    measures[0][good] = measures[0].get(good, 0.0) + part
                    base_a += part * gross
                if in_b:
                    measures[1][good] = measures[1].get(good, 0.0) + part
                    base_b += part * gross
        if not ctx.per_unit:
            fee_a = assess_fee(ctx.policy, measures[0], [measures[1]])
            fee_b = assess_fee(ctx.policy, measures[1], [measures[0]])
            if isinstance(fee_a, Violation) or isinstance(fee_b, Violation):
                continue
            base_a -= fee_a.amount
            base_b -= fee_b.amount

        u_t = tuple(u_vec)
        ch = tuple(selection)
        if not ctx.deviator_survives(
            a, b, base_a, u_t, ch, tuple(share_a), tuple(share_b)
        ):
            continue
        if not ctx.deviator_survives(
            b, a, base_b, u_t, ch, tuple(share_b), tuple(share_a)
        ):
            continue
        survivors.append((selection, (base_a, base_b)))
    return survivors


def _build_equilibrium(
    ctx: _EnumContext, a: int, b: int, selection: tuple, profits: tuple[float, float]
):
    from .search import Equilibrium

    menus = (
        tuple(ctx.bundles[i] for i in ctx.menus[a]),
        tuple(ctx.bundles[i] for i in ctx.menus[b]),
    )
    profile = MenuProfile.of(menus)
    per_type: dict[str, list] = {}
    measures: list[dict[str, float]] = [{}, {}]
    utilities = {}
    for ti, c in enumerate(selection):
        t = ctx.types[ti]
        mass = ctx.masses[ti]
        if c is None:
            per_type[t] = [(None, Bundle(None, 0.0), mass)]
            utilities[t] = 0.0
            continue
        bundle = ctx.bundles[c]
        sellers = [j for j, mi in enumerate((a, b)) if c in ctx.menu_sets[mi]]
        part = mass / len(sellers)
        per_type[t] = [(j, bundle, part) for j in sellers]
        for j in sellers:
            measures[j][bundle.good] = measures[j].get(bundle.good, 0.0) + part
        utilities[t] = float(ctx.u[ti, c])
    allocation = Allocation(
        shares=tuple(sorted((t, tuple(v)) for t, v in per_type.items())),
        measures=tuple(tuple(sorted(m.items())) for m in measures),
        utilities=tuple(sorted(utilities.items())),
    )
    return Equilibrium(profile=profile, allocation=allocation, profits=profits)


_ENUM_CTX: _EnumContext | None = None


def _enum_init(ctx: _EnumContext) -> None:
    global _ENUM_CTX
    _ENUM_CTX = ctx


def _enum_chunk(rows: tuple[int, int]) -> list[tuple]:
    ctx = _ENUM_CTX
    lo, hi = rows
    out = []
    for a in range(lo, hi):
        for b in range(a, len(ctx.menus)):
            for selection, profits in _evaluate_profile(ctx, a, b):
                out.append((a, b, selection, profits))
    return out


def run_enumeration(
    economy: Economy,
    scr: SocialChoiceRule,
    policy: Policy,
    bundles: tuple[Bundle, ...],
    max_menu_size: int,
    jobs: int,
    tol: float,
    dev_eps: float,
) -> list:
    ctx = _EnumContext(economy, scr, policy, bundles, max_menu_size, tol, dev_eps)
    M = len(ctx.menus)
    found: list[tuple] = []
    if jobs <= 1:
        _enum_init(ctx)
        found = _enum_chunk((0, M))
    else:
        chunk = max(1, M // (jobs * 6))
        ranges = [(lo, min(lo + chunk, M)) for lo in range(0, M, chunk)]
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_enum_init, initargs=(ctx,)
        ) as pool:
            for part in pool.map(_enum_chunk, ranges, chunksize=1):
                found.extend(part)
    return [_build_equilibrium(ctx, a, b, sel, profits) for a, b, sel, profits in found]
