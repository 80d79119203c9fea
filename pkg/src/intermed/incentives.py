"""Incentive diagnostics for target assignment rules.

Implementability of a consumption rule is equivalent to the absence of a
negative cycle in its incentive-constraint graph (one node per type, an
edge s -> t of weight v(x(t), t) - v(x(s), t) bounding the price gap
y(t) - y(s)).  Everything here runs off that graph: feasibility checks,
witness cycles, and shortest-path transfer construction.

The distinct-totals condition (DU) asks that reassigning goods cyclically
within any subset of types holding pairwise-distinct goods changes the
total consumption utility; its failure forces indifference under every
incentive-compatible price vector and is what lets "bad equilibria"
survive distribution regulation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

from .economy import Bundle, Economy, SocialChoiceRule
from .errors import GuardError, PreconditionError, ValidationError
from .tolerances import EPS_TOL

#: Largest type space for which exact subset/cycle enumeration is allowed
#: without force=True.
ENUMERATION_LIMIT = 10


# -- IC / IR --------------------------------------------------------------


@dataclass(frozen=True)
class ICReport:
    """Pairwise IC and IR audit; ``holds`` iff both violation lists are empty."""

    holds: bool
    violations: tuple[tuple[str, str, float], ...]
    ir_violations: tuple[tuple[str, float], ...]

    @property
    def ic_holds(self) -> bool:
        return not self.violations

    @property
    def ir_holds(self) -> bool:
        return not self.ir_violations


def check_ic_ir(
    economy: Economy, scr: SocialChoiceRule, tol: float = EPS_TOL
) -> ICReport:
    """Exhaustive pairwise IC check plus IR against the null bundle.

    A violation (t, s, slack) records slack = u(own) - u(s's bundle) < -tol;
    lists are ordered lexicographically by type names.
    """
    scr.validate(economy)
    names = sorted(economy.type_names())
    violations = []
    ir_violations = []
    for t in names:
        own = economy.utility_of(scr.bundle(t), t)
        if own < -tol:
            ir_violations.append((t, own))
        for s in names:
            if s == t:
                continue
            other = economy.utility_of(scr.bundle(s), t)
            slack = own - other
            if slack < -tol:
                violations.append((t, s, slack))
    return ICReport(
        holds=not violations and not ir_violations,
        violations=tuple(violations),
        ir_violations=tuple(ir_violations),
    )


# -- cyclic monotonicity ---------------------------------------------------


@dataclass(frozen=True)
class CmonResult:
    """Outcome of the negative-cycle test; ``cycle`` is a witness when it fails."""

    holds: bool
    cycle: tuple[str, ...] | None = None
    cycle_sum: float | None = None


def _constraint_weight(
    economy: Economy, x: Mapping[str, str], tail: str, head: str
) -> float:
    # bound on y(head) - y(tail) from head's IC against tail's bundle
    return economy.utility[head][x[head]] - economy.utility[head][x[tail]]


def _cycle_sum(economy: Economy, x: Mapping[str, str], cycle: tuple[str, ...]) -> float:
    total = 0.0
    for i, tail in enumerate(cycle):
        head = cycle[(i + 1) % len(cycle)]
        total += _constraint_weight(economy, x, tail, head)
    return total


def check_cmon(
    economy: Economy, x: Mapping[str, str], tol: float = EPS_TOL
) -> CmonResult:
    """Cyclic-monotonicity test for a consumption rule ``x`` (type -> good).

    Runs label-correcting shortest paths from a virtual source; a residual
    relaxation after |types| rounds exposes a cycle through the predecessor
    chain.  Only cycles with sum < -tol count as violations; an extracted
    cycle in the dead band [-tol, 0) is reported as implementable.
    """
    names = sorted(x)
    for t in names:
        if t not in economy.type_names():
            raise ValidationError(f"unknown type {t} in consumption rule")
        if not economy.has_good(x[t]):
            raise ValidationError(f"unknown good {x[t]} in consumption rule")
    n = len(names)
    if n <= 1:
        return CmonResult(holds=True)

    dist = {t: 0.0 for t in names}
    pred: dict[str, str | None] = {t: None for t in names}
    edges = [
        (tail, head, _constraint_weight(economy, x, tail, head))
        for tail in names
        for head in names
        if tail != head
    ]

    def relax_round() -> str | None:
        changed = None
        for tail, head, w in edges:
            cand = dist[tail] + w
            if cand < dist[head] - 1e-15:
                dist[head] = cand
                pred[head] = tail
                changed = head
        return changed

    for _ in range(n - 1):
        if relax_round() is None:
            return CmonResult(holds=True)

    # extra rounds: any further strict relaxation implies a negative cycle
    for _ in range(n):
        node = relax_round()
        if node is None:
            return CmonResult(holds=True)
        # walk back n steps to land inside the cycle, then close it
        probe: str | None = node
        for _ in range(n):
            probe = pred[probe] if probe is not None else None
        if probe is None:
            continue
        cycle = [probe]
        walk = pred[probe]
        while walk is not None and walk != probe and len(cycle) <= n:
            cycle.append(walk)
            walk = pred[walk]
        if walk != probe:
            continue
        cycle.reverse()
        total = _cycle_sum(economy, x, tuple(cycle))
        if total < -tol:
            # rotate so the lexicographically smallest type leads
            k = cycle.index(min(cycle))
            cycle = cycle[k:] + cycle[:k]
            return CmonResult(holds=False, cycle=tuple(cycle), cycle_sum=total)
    return CmonResult(holds=True)


# -- transfer construction -------------------------------------------------


class NotImplementable(PreconditionError):
    """Certified negative result: the rule admits no IC transfers."""

    def __init__(self, cycle: tuple[str, ...], cycle_sum: float):
        self.cycle = cycle
        self.cycle_sum = cycle_sum
        super().__init__(
            f"consumption rule not implementable: cycle {' -> '.join(cycle)} "
            f"has sum {cycle_sum:g}"
        )


@dataclass(frozen=True)
class TransferRule:
    """Prices implementing a consumption rule; mode is 'minimal' or 'maximal'."""

    prices: tuple[tuple[str, float], ...]
    mode: str

    def as_dict(self) -> dict[str, float]:
        return dict(self.prices)

    def price(self, type_name: str) -> float:
        return dict(self.prices)[type_name]


def construct_transfers(
    economy: Economy,
    x: Mapping[str, str],
    mode: str = "maximal",
    anchor_utility: float = 0.0,
    anchor_type: str | None = None,
    tol: float = EPS_TOL,
) -> TransferRule:
    """Shortest-path transfers implementing ``x``; raises NotImplementable otherwise.

    maximal: the revenue-maximal IC prices keeping every type's utility at
    least ``anchor_utility`` (the participation floor binds for at least one
    type).  minimal: fix the anchor type at exactly ``anchor_utility`` and
    push every other price as low as IC allows; the default anchor is the
    lexicographically smallest type whose floor binds in maximal mode.
    """
    if mode not in ("minimal", "maximal"):
        raise ValidationError(f"unknown transfer mode {mode}")
    result = check_cmon(economy, x, tol=tol)
    if not result.holds:
        raise NotImplementable(result.cycle, result.cycle_sum)

    names = sorted(x)
    # maximal: shortest paths from a source offering v(x(t), t) - anchor to t
    dist = {t: economy.utility[t][x[t]] - anchor_utility for t in names}
    for _ in range(len(names)):
        changed = False
        for tail in names:
            for head in names:
                if tail == head:
                    continue
                cand = dist[tail] + _constraint_weight(economy, x, tail, head)
                if cand < dist[head] - 1e-15:
                    dist[head] = cand
                    changed = True
        if not changed:
            break
    maximal = dict(dist)

    if mode == "maximal":
        return TransferRule(tuple(sorted(maximal.items())), "maximal")

    if anchor_type is None:
        floor = min(economy.utility[t][x[t]] - maximal[t] for t in names)
        anchor_type = min(
            t for t in names if economy.utility[t][x[t]] - maximal[t] <= floor + tol
        )
    elif anchor_type not in names:
        raise ValidationError(f"anchor type {anchor_type} not in consumption rule")

    # minimal: y(t) = y(a) - shortest_path(t -> a) on the constraint graph
    anchor_price = economy.utility[anchor_type][x[anchor_type]] - anchor_utility
    rdist = {t: float("inf") for t in names}
    rdist[anchor_type] = 0.0
    for _ in range(len(names)):
        changed = False
        for tail in names:
            for head in names:
                if tail == head or rdist[head] == float("inf"):
                    continue
                # path tail -> head -> ... -> anchor
                cand = rdist[head] + _constraint_weight(economy, x, tail, head)
                if cand < rdist[tail] - 1e-15:
                    rdist[tail] = cand
                    changed = True
        if not changed:
            break
    prices = {t: anchor_price - rdist[t] for t in names}
    return TransferRule(tuple(sorted(prices.items())), "minimal")


# -- distinct-totals condition ----------------------------------------------


@dataclass(frozen=True)
class DUViolation:
    """A subset and cyclic reassignment whose total utility is unchanged."""

    subset: tuple[str, ...]
    successor: tuple[tuple[str, str], ...]
    gap: float

    def successor_map(self) -> dict[str, str]:
        return dict(self.successor)


@dataclass(frozen=True)
class DUReport:
    holds: bool
    violations: tuple[DUViolation, ...]


def _distinct_good_subsets(
    x: Mapping[str, str], min_size: int = 2
) -> Iterator[tuple[str, ...]]:
    names = sorted(x)
    for size in range(min_size, len(names) + 1):
        for subset in itertools.combinations(names, size):
            goods = [x[t] for t in subset]
            if len(set(goods)) == len(goods):
                yield subset


def _cyclic_successors(subset: tuple[str, ...]) -> Iterator[dict[str, str]]:
    """All (|subset|-1)! single-cycle successor maps, first element fixed."""
    first, rest = subset[0], subset[1:]
    for perm in itertools.permutations(rest):
        order = (first,) + perm
        yield {order[i]: order[(i + 1) % len(order)] for i in range(len(order))}


def _guard_enumeration(n: int, force: bool) -> None:
    if n > ENUMERATION_LIMIT and not force:
        raise GuardError(
            f"exponential enumeration refused for {n} types "
            f"(limit {ENUMERATION_LIMIT}); pass force=True / --force to override"
        )


def check_du(
    economy: Economy,
    x: Mapping[str, str],
    tol: float = EPS_TOL,
    force: bool = False,
) -> DUReport:
    """Check that every cyclic goods reassignment changes total utility.

    Enumerates all subsets with pairwise-distinct assigned goods and all
    cyclic permutations of each; gaps with |gap| <= tol are violations
    (ties count as equalities).  Violations are ordered by (size, subset,
    successor map).
    """
    _guard_enumeration(len(x), force)
    violations = []
    for subset in _distinct_good_subsets(x):
        base = sum(economy.utility[t][x[t]] for t in subset)
        for successor in _cyclic_successors(subset):
            permuted = sum(economy.utility[t][x[successor[t]]] for t in subset)
            gap = permuted - base
            if abs(gap) <= tol:
                violations.append(
                    DUViolation(
                        subset=subset,
                        successor=tuple(sorted(successor.items())),
                        gap=gap,
                    )
                )
    return DUReport(holds=not violations, violations=tuple(violations))


# -- indifference structure --------------------------------------------------


@dataclass(frozen=True)
class IndifferencePair:
    who: str
    own: Bundle
    other: Bundle


@dataclass(frozen=True)
class IndifferenceReport:
    """Cross-type indifferences plus the types whose participation floor binds."""

    pairs: tuple[IndifferencePair, ...]
    ir_binding: tuple[str, ...]

    @property
    def any(self) -> bool:
        return bool(self.pairs) or bool(self.ir_binding)


def find_indifferent_pairs(
    economy: Economy, scr: SocialChoiceRule, tol: float = EPS_TOL
) -> IndifferenceReport:
    """All (type, other-bundle) indifferences under an IC-IR target rule."""
    report = check_ic_ir(economy, scr, tol=tol)
    if not report.holds:
        raise PreconditionError("target rule fails IC or IR; indifference scan skipped")
    pairs = []
    ir_binding = []
    names = sorted(economy.type_names())
    for t in names:
        own = scr.bundle(t)
        u_own = economy.utility_of(own, t)
        if abs(u_own) <= tol:
            ir_binding.append(t)
        seen: set[tuple[str | None, float]] = {(own.good, own.price)}
        for s in names:
            if s == t:
                continue
            other = scr.bundle(s)
            key = (other.good, other.price)
            if key in seen:
                continue
            seen.add(key)
            if abs(u_own - economy.utility_of(other, t)) <= tol:
                pairs.append(IndifferencePair(who=t, own=own, other=other))
    return IndifferenceReport(pairs=tuple(pairs), ir_binding=tuple(ir_binding))


# -- permuted-rule implementability -------------------------------------------


def check_permuted_not_implementable(
    economy: Economy,
    x: Mapping[str, str],
    tol: float = EPS_TOL,
    force: bool = False,
) -> bool:
    """True iff every cyclic goods reassignment on a distinct-good subset
    fails cyclic monotonicity when checked among that subset alone.

    Precondition: ``x`` is implementable and satisfies the distinct-totals
    condition (without it the permuted rules are implementable at binding
    prices and the claim is false).
    """
    if not check_cmon(economy, x, tol=tol).holds:
        raise PreconditionError("consumption rule is not implementable")
    du = check_du(economy, x, tol=tol, force=force)
    if not du.holds:
        raise PreconditionError(
            "distinct-totals condition fails; permuted rules are not blocked"
        )
    for subset in _distinct_good_subsets(x):
        for successor in _cyclic_successors(subset):
            permuted = {t: x[successor[t]] for t in subset}
            if check_cmon(economy, permuted, tol=tol).holds:
                return False
    return True
