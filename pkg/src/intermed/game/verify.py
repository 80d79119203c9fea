"""Verdicts: does a policy make intermediaries realize the target rule?

Partial verification asks for one supporting equilibrium: both
intermediaries post the target menu, agents take their target bundles
(splitting equally across the identical menus), and no unilateral grid
deviation profits under the requested off-path tie-break.  The tie-break
parameter governs how agents re-sort after a deviation; the on-path
selection is always the target-favoring one, which is the selection the
supporting equilibrium prescribes.

Full verification asks whether *every* equilibrium realizes the target.
For the break-even per-unit schedule under private values this reduces to
the absence of indifference; for the target-distribution regulation it
reduces to the distinct-totals condition, whose failure is certified
constructively by a zero-profit swap equilibrium at uniformly shifted
prices that survives deviation search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..economy import Bundle, Economy, SocialChoiceRule, target_distribution
from ..errors import PreconditionError, ValidationError
from ..incentives import (
    DUViolation,
    check_du,
    check_ic_ir,
    find_indifferent_pairs,
)
from ..policies import Policy, PolicyKind, Violation, assess_fee
from ..tolerances import EPS_DEV, EPS_TOL
from .allocation import (
    FAVOR_TARGET,
    Allocation,
    MenuProfile,
    TieBreakRule,
    allocate,
    intermediary_profit,
)
from .search import DeviationWitness, PriceGrid, deviation_search


@dataclass(frozen=True)
class VerificationResult:
    verdict: str  # "supported" | "refuted"
    witness: object | None = None
    diagnostics: tuple[str, ...] = ()

    @property
    def supported(self) -> bool:
        return self.verdict == "supported"


def _require_ic_ir(economy: Economy, scr: SocialChoiceRule, tol: float) -> None:
    report = check_ic_ir(economy, scr, tol=tol)
    if not report.holds:
        raise PreconditionError(
            "target rule is not incentive compatible and individually rational; "
            f"violations: {report.violations + report.ir_violations}"
        )


def verify_partial_implementation(
    economy: Economy,
    scr: SocialChoiceRule,
    policy: Policy,
    tiebreak: TieBreakRule = FAVOR_TARGET,
    grid: PriceGrid | None = None,
    max_menu_size: int = 2,
    intermediaries: int = 2,
    jobs: int = 1,
    tol: float = EPS_TOL,
    dev_eps: float = EPS_DEV,
) -> VerificationResult:
    """Check that the symmetric target profile is an equilibrium outcome.

    Supported iff the target-favoring on-path allocation gives every type
    its target bundle, nets every intermediary zero, and deviation search
    under ``tiebreak`` finds nothing.  Grid search cannot certify
    equilibria off the grid; the verdict is at grid resolution.
    """
    _require_ic_ir(economy, scr, tol)
    profile = MenuProfile.target(scr, intermediaries)
    onpath = allocate(economy, profile, scr, FAVOR_TARGET, tol)
    diagnostics = ["verdict is exhaustive over grid menus only"]

    for t in economy.type_names():
        target = scr.bundle(t)
        for seller, bundle, mass in onpath.shares_of(t):
            if mass > 0 and bundle != target:
                return VerificationResult(
                    "refuted",
                    None,
                    (
                        f"type {t} consumes {bundle.label()} instead of "
                        f"{target.label()} on path",
                    ),
                )
    profits = []
    for i in range(intermediaries):
        p = intermediary_profit(economy, onpath, policy, i)
        if isinstance(p, Violation):
            return VerificationResult(
                "refuted", None, (f"intermediary {i} violates the policy on path: {p.reason}",)
            )
        profits.append(p)
        if abs(p) > tol:
            return VerificationResult(
                "refuted",
                None,
                (f"intermediary {i} earns {p:g} on path instead of breaking even",),
            )

    witness = deviation_search(
        economy,
        scr,
        policy,
        profile,
        tiebreak=tiebreak,
        grid=grid,
        max_menu_size=max_menu_size,
        mode="best",
        jobs=jobs,
        tol=tol,
        dev_eps=dev_eps,
    )
    if witness is not None:
        return VerificationResult(
            "refuted", witness, tuple(diagnostics + ["profitable deviation found"])
        )
    return VerificationResult(
        "supported",
        None,
        tuple(diagnostics + [f"on-path profits {profits}"]),
    )


def verify_full_implementation(
    economy: Economy,
    scr: SocialChoiceRule,
    policy: Policy,
    tol: float = EPS_TOL,
) -> VerificationResult:
    """Check that every equilibrium realizes the target rule.

    Per-unit break-even schedule: decidable only under private values
    (interdependent-value queries are rejected: undercutting can profit and
    the theory offers no equivalence there); the verdict is the absence of
    indifference, refuted with the indifferent pair.  Target-distribution
    regulation: the verdict is the distinct-totals condition, refuted with
    a constructed bad equilibrium.
    """
    _require_ic_ir(economy, scr, tol)
    if policy.kind is PolicyKind.PER_UNIT:
        if not economy.private_values(tol):
            raise PreconditionError(
                "full implementation under a per-unit schedule is undecided for "
                "interdependent values: an intermediary can undercut the bundle "
                "whose buyers are adversely selected, so no if-and-only-if "
                "criterion applies"
            )
        report = find_indifferent_pairs(economy, scr, tol=tol)
        if report.any:
            notes = []
            if report.pairs:
                p = report.pairs[0]
                notes.append(
                    f"type {p.who} is indifferent between {p.own.label()} and "
                    f"{p.other.label()}"
                )
            for t in report.ir_binding:
                notes.append(f"type {t} is indifferent to staying out")
            return VerificationResult("refuted", report, tuple(notes))
        return VerificationResult("supported", None, ("no indifference anywhere",))

    if policy.kind in (PolicyKind.TARGET_DISTRIBUTION, PolicyKind.MONOPOLY):
        du = check_du(economy, scr.consumption(), tol=tol)
        if du.holds:
            return VerificationResult(
                "supported", None, ("all cyclic goods reassignments change total utility",)
            )
        witness = construct_bad_equilibrium(economy, scr, du.violations[0], tol=tol)
        return VerificationResult(
            "refuted",
            witness,
            ("indifference cycle admits a swap equilibrium off the target",),
        )

    raise PreconditionError(
        "full implementation is characterized only for the break-even per-unit "
        "schedule and the target-distribution regulation; coarse regulations "
        "cannot rule out chains of exchanges"
    )


# -- bad-equilibrium construction ------------------------------------------------


@dataclass(frozen=True)
class BadEquilibriumWitness:
    """Zero-profit swap equilibrium certifying a full-implementation failure."""

    cycle: tuple[str, ...]
    successor: tuple[tuple[str, str], ...]
    shift: float
    profile: MenuProfile
    allocation: Allocation
    utilities: tuple[tuple[str, float], ...]
    target_utilities: tuple[tuple[str, float], ...]
    profits: tuple[float, ...]
    deviation: DeviationWitness | None

    def to_payload(self) -> dict:
        return {
            "cycle": list(self.cycle),
            "successor": dict(self.successor),
            "shift": self.shift,
            "menus": self.profile.to_payload(),
            "allocation": self.allocation.to_payload(),
            "utilities": dict(self.utilities),
            "target_utilities": dict(self.target_utilities),
            "profits": list(self.profits),
            "deviation": self.deviation.to_payload() if self.deviation else None,
        }


def construct_bad_equilibrium(
    economy: Economy,
    scr: SocialChoiceRule,
    violation: DUViolation | None = None,
    intermediaries: int = 2,
    grid: PriceGrid | None = None,
    max_menu_size: int = 2,
    jobs: int = 1,
    tol: float = EPS_TOL,
    dev_eps: float = EPS_DEV,
) -> BadEquilibriumWitness:
    """Build the swap equilibrium induced by an indifference cycle.

    Along the cycle each type hands its good to its predecessor (type t
    consumes the good of successor(t)); the swapped mass is the smallest
    type mass on the cycle so the sold-good distribution is unchanged.
    All prices shift by the constant that restores zero net profit under
    the target-distribution regulation.  The witness is validated: the
    shifted allocation is incentive compatible (the cycle indifferences
    are forced), individually rational, distribution compliant, and
    survives deviation search with agents keeping their seats unless
    strictly better off.
    """
    _require_ic_ir(economy, scr, tol)
    x = scr.consumption()
    if violation is None:
        du = check_du(economy, x, tol=tol)
        if du.holds:
            raise PreconditionError(
                "the target consumption rule satisfies the distinct-totals "
                "condition; no indifference cycle exists"
            )
        violation = du.violations[0]
    else:
        subset = violation.subset
        succ = violation.successor_map()
        base = sum(economy.utility[t][x[t]] for t in subset)
        permuted = sum(economy.utility[t][x[succ[t]]] for t in subset)
        if abs(permuted - base) > tol:
            raise PreconditionError("supplied cycle is not utility-neutral")

    succ = violation.successor_map()
    cycle = violation.subset
    swap_mass = min(economy.mass(t) for t in cycle)

    from ..policies import make_distribution_policy

    policy = make_distribution_policy(economy, scr, "target")
    dist = target_distribution(economy, scr)

    # sold bundles at shift d: every good at its target price plus d;
    # solve gross(d) - fee = 0, linear in d with unit active mass
    active = scr.active_types()
    active_mass = sum(economy.mass(t) for t in active)
    fee = sum(
        dist.weight(g) * policy.fee_of(g) for g in economy.good_names()
    ) * active_mass
    gross_at_zero = 0.0
    for t in active:
        own_good = x[t]
        own_price = scr.price_of_good(own_good)
        if t in cycle:
            swapped_good = x[succ[t]]
            swapped_price = scr.price_of_good(swapped_good)
            gross_at_zero += swap_mass * (swapped_price - economy.cost[t][swapped_good])
            gross_at_zero += (economy.mass(t) - swap_mass) * (
                own_price - economy.cost[t][own_good]
            )
        else:
            gross_at_zero += economy.mass(t) * (own_price - economy.cost[t][own_good])
    shift = (fee - gross_at_zero) / active_mass

    menu = tuple(
        Bundle(g, scr.price_of_good(g) + shift) for g in sorted(set(x.values()))
    )
    profile = MenuProfile.of([menu] * intermediaries)

    # build the swap allocation, split equally across the identical menus
    per_type: dict[str, list] = {}
    utilities = {}
    for t in economy.type_names():
        mass = economy.mass(t)
        target_bundle = scr.bundle(t)
        if target_bundle.is_null:
            per_type[t] = [(None, Bundle(None, 0.0), mass)]
            utilities[t] = 0.0
            continue
        own = Bundle(x[t], scr.price_of_good(x[t]) + shift)
        seats = []
        if t in cycle:
            swapped = Bundle(x[succ[t]], scr.price_of_good(x[succ[t]]) + shift)
            seats.append((swapped, swap_mass))
            if mass - swap_mass > 0:
                seats.append((own, mass - swap_mass))
        else:
            seats.append((own, mass))
        shares = []
        for bundle, m in seats:
            part = m / intermediaries
            parts = [part] * (intermediaries - 1)
            parts.append(m - part * (intermediaries - 1))
            shares.extend((i, bundle, parts[i]) for i in range(intermediaries))
        per_type[t] = shares
        utilities[t] = economy.utility_of(shares[0][1], t)

    measures: list[dict[str, float]] = [dict() for _ in range(intermediaries)]
    for t, entries in per_type.items():
        for seller, bundle, m in entries:
            if seller is None or bundle.is_null:
                continue
            measures[seller][bundle.good] = measures[seller].get(bundle.good, 0.0) + m
    allocation = Allocation(
        shares=tuple(sorted((t, tuple(v)) for t, v in per_type.items())),
        measures=tuple(tuple(sorted(m.items())) for m in measures),
        utilities=tuple(sorted(utilities.items())),
    )

    # validate: the swap must be utility-maximal for everyone (forced
    # indifference), individually rational, and zero-profit
    for t in economy.type_names():
        u_here = allocation.utility(t)
        if u_here < -tol:
            raise PreconditionError(
                f"no swap equilibrium at this cycle: type {t} would be pushed "
                f"below its reservation utility ({u_here:g}) by the shift {shift:g}"
            )
        best = max(economy.utility_of(b, t) for b in menu)
        if u_here < best - tol:
            raise PreconditionError(
                f"swap allocation is not incentive compatible for type {t}; "
                "the supplied cycle does not force indifference"
            )
    profits = []
    for i in range(intermediaries):
        p = intermediary_profit(economy, allocation, policy, i)
        if isinstance(p, Violation):
            raise PreconditionError(f"swap allocation violates the policy: {p.reason}")
        if abs(p) > max(tol, 1e-9):
            raise PreconditionError(
                f"swap allocation does not break even (intermediary {i} earns {p:g})"
            )
        profits.append(p)

    deviation = deviation_search(
        economy,
        scr,
        policy,
        profile,
        grid=grid if grid is not None else PriceGrid.default_for(scr, step=0.5),
        max_menu_size=max_menu_size,
        mode="best",
        baseline=allocation,
        jobs=jobs,
        tol=tol,
        dev_eps=dev_eps,
    )
    if deviation is not None:
        raise PreconditionError(
            "constructed swap allocation does not survive deviation search; "
            f"intermediary {deviation.deviator} gains {deviation.profit_gain:g} "
            f"with menu {[b.label() for b in deviation.menu]}"
        )

    target_utilities = tuple(
        sorted(
            (t, economy.utility_of(scr.bundle(t), t)) for t in economy.type_names()
        )
    )
    return BadEquilibriumWitness(
        cycle=cycle,
        successor=violation.successor,
        shift=shift,
        profile=profile,
        allocation=allocation,
        utilities=allocation.utilities,
        target_utilities=target_utilities,
        profits=tuple(profits),
        deviation=None,
    )
