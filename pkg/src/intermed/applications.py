"""Instance generators: car sales, insurance with CARA risk preferences,
and income taxation with decentralized contracting.

Each generator returns a canonical (Economy, SocialChoiceRule) pair so the
whole toolkit applies unchanged; the insurance and taxation builders carry
the model-specific payoff conventions documented on each function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .economy import AgentType, Bundle, Economy, Good, SocialChoiceRule
from .errors import ValidationError
from .incentives import ICReport
from .tolerances import EPS_MASS, EPS_TOL


# -- car sales ---------------------------------------------------------------


def make_car_sales(
    interdependent: bool = False,
    variant: str | None = None,
    masses: tuple[float, float] = (0.8, 0.2),
    tastes: dict[str, dict[str, float]] | None = None,
    costs: dict[str, dict[str, float]] | None = None,
    target_prices: tuple[float, float] | None = None,
) -> tuple[Economy, SocialChoiceRule]:
    """Two-type dealer market: low/high taste buyers, L/H quality cars.

    Defaults reproduce the three canonical markets.  With type-independent
    costs (the default) the target prices solve binding participation for
    the low type and binding self-selection for the high type; the
    ``interdependent`` flag keeps tastes but makes high-taste customers
    cheaper to serve.  ``variant="swap"`` builds the equal-mass market whose
    tastes make the two-type goods swap utility-neutral.
    """
    if variant == "swap":
        masses = (0.5, 0.5)
        tastes = tastes or {"low": {"L": 10, "H": 14}, "high": {"L": 12, "H": 16}}
        costs = costs or {"low": {"L": 6, "H": 9}, "high": {"L": 3, "H": 8}}
        target_prices = target_prices or (10.0, 14.0)
    elif variant not in (None, "private", "interdependent"):
        raise ValidationError(f"unknown car-sales variant {variant}")
    if variant == "interdependent":
        interdependent = True

    tastes = tastes or {"low": {"L": 10, "H": 14}, "high": {"L": 12, "H": 20}}
    if costs is None:
        if interdependent:
            costs = {"low": {"L": 5, "H": 9}, "high": {"L": 3, "H": 7}}
        else:
            costs = {"low": {"L": 5, "H": 9}, "high": {"L": 5, "H": 9}}

    if target_prices is None:
        # binding participation for the low type, binding self-selection
        # for the high type
        y_low = tastes["low"]["L"]
        y_high = tastes["high"]["H"] - (tastes["high"]["L"] - y_low)
        target_prices = (y_low, y_high)

    economy = Economy(
        types=[AgentType("low", masses[0]), AgentType("high", masses[1])],
        goods=[Good("H", (2.0,)), Good("L", (1.0,))],
        utility=tastes,
        cost=costs,
    )
    scr = SocialChoiceRule(
        {
            "low": Bundle("L", float(target_prices[0])),
            "high": Bundle("H", float(target_prices[1])),
        }
    )
    scr.validate(economy)
    return economy, scr


# -- market-based insurance ----------------------------------------------------


@dataclass(frozen=True)
class InsurancePlan:
    name: str
    consumption: tuple[float, ...]  # state-contingent consumption before premium


@dataclass(frozen=True)
class InsuranceType:
    name: str
    mass: float
    probabilities: tuple[float, ...]


@dataclass(frozen=True)
class InsuranceEconomy:
    """State-contingent endowments, hidden risk types, plans and premiums.

    A policy (plan, premium y) gives a type expected utility
    sum_s p_s * v(x_s - y) with v(c) = 1 - exp(-risk_aversion * c), and the
    seller an expected profit y - sum_s p_s (x_s - e_s).
    """

    endowments: tuple[float, ...]
    types: tuple[InsuranceType, ...]
    plans: tuple[InsurancePlan, ...]
    target: tuple[tuple[str, tuple[str, float]], ...]  # type -> (plan, premium)
    risk_aversion: float = 1.0

    def __post_init__(self):
        if self.risk_aversion <= 0:
            raise ValidationError("risk_aversion must be positive")
        n_states = len(self.endowments)
        for t in self.types:
            if len(t.probabilities) != n_states:
                raise ValidationError(f"type {t.name}: probability row has wrong length")
            if abs(sum(t.probabilities) - 1.0) > EPS_MASS:
                raise ValidationError(f"type {t.name}: probabilities do not sum to 1")
            if any(p < 0 for p in t.probabilities):
                raise ValidationError(f"type {t.name}: negative probability")
        for p in self.plans:
            if len(p.consumption) != n_states:
                raise ValidationError(f"plan {p.name}: consumption row has wrong length")

    def plan(self, name: str) -> InsurancePlan:
        for p in self.plans:
            if p.name == name:
                return p
        raise ValidationError(f"unknown plan {name}")

    def expected_utility(self, plan_name: str, premium: float, type_name: str) -> float:
        lam = self.risk_aversion
        plan = self.plan(plan_name)
        t = next(t for t in self.types if t.name == type_name)
        return sum(
            p * (1.0 - math.exp(-lam * (x - premium)))
            for p, x in zip(t.probabilities, plan.consumption)
        )

    def expected_profit(self, plan_name: str, premium: float, type_name: str) -> float:
        plan = self.plan(plan_name)
        t = next(t for t in self.types if t.name == type_name)
        return premium - sum(
            p * (x - e) for p, x, e in zip(t.probabilities, plan.consumption, self.endowments)
        )


def certainty_equivalent(
    ins: InsuranceEconomy, plan: InsurancePlan, type_name: str
) -> float:
    """-(1/lam) * log sum_s p_s exp(-lam x_s): the plan's cash value to the type."""
    lam = ins.risk_aversion
    t = next(t for t in ins.types if t.name == type_name)
    probs = np.asarray(t.probabilities, dtype=float)
    cons = np.asarray(plan.consumption, dtype=float)
    # zero-probability states cannot enter the log-sum
    keep = probs > 0
    return float(-logsumexp(-lam * cons[keep], b=probs[keep]) / lam)


def cara_transform(ins: InsuranceEconomy) -> tuple[Economy, SocialChoiceRule]:
    """Reduce the expected-utility insurance market to the quasi-linear model.

    Goods are plans; a type's value for a plan is its certainty equivalent,
    its cost is the expected indemnity over the endowment; premiums become
    prices.  IC and IR verdicts are preserved exactly because expected
    utility equals 1 - exp(-lam * (value - premium)), a strictly increasing
    transform of the quasi-linear surplus.
    """
    goods = [Good(p.name, p.consumption) for p in ins.plans]
    utility = {
        t.name: {p.name: certainty_equivalent(ins, p, t.name) for p in ins.plans}
        for t in ins.types
    }
    cost = {
        t.name: {
            p.name: sum(
                prob * (x - e)
                for prob, x, e in zip(t.probabilities, p.consumption, ins.endowments)
            )
            for p in ins.plans
        }
        for t in ins.types
    }
    economy = Economy(
        types=[AgentType(t.name, t.mass) for t in ins.types],
        goods=goods,
        utility=utility,
        cost=cost,
    )
    assignment = {
        t: Bundle(plan_name, premium) for t, (plan_name, premium) in ins.target
    }
    scr = SocialChoiceRule(assignment)
    scr.validate(economy)
    return economy, scr


def expected_utility_ic_report(ins: InsuranceEconomy, tol: float = EPS_TOL) -> ICReport:
    """IC/IR audit computed directly on expected utilities (oracle for the
    CARA reduction; never routes through :func:`cara_transform`)."""
    target = dict(ins.target)
    names = sorted(target)
    violations = []
    ir_violations = []
    for t in names:
        plan_t, prem_t = target[t]
        own = ins.expected_utility(plan_t, prem_t, t)
        if own < -tol:
            ir_violations.append((t, own))
        for s in names:
            if s == t:
                continue
            plan_s, prem_s = target[s]
            slack = own - ins.expected_utility(plan_s, prem_s, t)
            if slack < -tol:
                violations.append((t, s, slack))
    return ICReport(
        holds=not violations and not ir_violations,
        violations=tuple(violations),
        ir_violations=tuple(ir_violations),
    )


def random_insurance_economy(
    rng: np.random.Generator,
    n_states: int = 2,
    n_types: int = 2,
    risk_aversion: float = 1.0,
) -> InsuranceEconomy:
    """Random instance for the reduction-equivalence suites."""
    endowments = tuple(float(e) for e in rng.uniform(0.0, 4.0, size=n_states))
    raw = rng.uniform(0.2, 1.0, size=(n_types, n_states))
    masses = rng.uniform(0.2, 1.0, size=n_types)
    masses = masses / masses.sum()
    masses = [float(m) for m in masses]
    masses[-1] = 1.0 - sum(masses[:-1])
    types = tuple(
        InsuranceType(
            name=f"t{i}",
            mass=masses[i],
            probabilities=tuple(float(p) for p in raw[i] / raw[i].sum()),
        )
        for i in range(n_types)
    )
    plans = tuple(
        InsurancePlan(
            name=f"plan{i}",
            consumption=tuple(float(x) for x in rng.uniform(0.0, 4.0, size=n_states)),
        )
        for i in range(n_types)
    )
    target = tuple(
        (f"t{i}", (f"plan{i}", float(rng.uniform(-0.5, 1.5)))) for i in range(n_types)
    )
    return InsuranceEconomy(
        endowments=endowments,
        types=types,
        plans=plans,
        target=target,
        risk_aversion=risk_aversion,
    )


# -- income taxation --------------------------------------------------------------


@dataclass(frozen=True)
class EmploymentContract:
    name: str
    performance: float
    income: float  # after-tax income paid to the worker


@dataclass(frozen=True)
class WorkerType:
    name: str
    mass: float
    ability: float


@dataclass(frozen=True)
class TaxationEconomy:
    """Workers with hidden ability, contracts pairing performance with income.

    A contract gives a worker utility income - disutility(performance, type)
    and a firm profit output - income, where output is the performance
    itself under the "effective-output" technology and ability * performance
    under "labor-hours".  The first is the private-value case, the second
    interdependent.
    """

    types: tuple[WorkerType, ...]
    contracts: tuple[EmploymentContract, ...]
    disutility: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]  # type -> contract -> v
    technology: str = "effective-output"
    target: tuple[tuple[str, str], ...] = field(default_factory=tuple)  # type -> contract

    def __post_init__(self):
        if self.technology not in ("effective-output", "labor-hours"):
            raise ValidationError(f"unknown technology {self.technology}")
        if self.technology == "labor-hours":
            for t in self.types:
                if t.ability <= 0:
                    raise ValidationError(
                        f"type {t.name}: ability must be positive so output "
                        "increases in performance"
                    )

    def disutility_of(self, type_name: str, contract_name: str) -> float:
        return dict(dict(self.disutility)[type_name])[contract_name]

    def output(self, type_name: str, contract: EmploymentContract) -> float:
        if self.technology == "effective-output":
            return contract.performance
        ability = next(t.ability for t in self.types if t.name == type_name)
        return ability * contract.performance

    def worker_utility(self, type_name: str, contract_name: str, income: float) -> float:
        return income - self.disutility_of(type_name, contract_name)

    def firm_profit(self, type_name: str, contract_name: str, income: float) -> float:
        contract = next(c for c in self.contracts if c.name == contract_name)
        return self.output(type_name, contract) - income


#: Sign conventions of the taxation adapter.  Each canonical good is one
#: employment contract slot (it carries the required performance and is
#: labelled by its target income, the coordinate the regulator observes);
#: the canonical price is the negated income, so that competing for
#: workers by paying more is exactly Bertrand undercutting.
TAXATION_SIGN_TABLE = {
    "good": "contract slot (fixed required performance, labelled by target income)",
    "price": "-income: canonical utility -disutility - price = income - disutility",
    "value v(good, type)": "-disutility(performance, type)",
    "cost c(good, type)": "-output(performance, type): profit = price - cost = output - income",
    "reservation utility": "0 (not working)",
}


def make_taxation(
    tax: TaxationEconomy,
) -> tuple[Economy, SocialChoiceRule, dict[str, str]]:
    """Map a taxation instance into the canonical model.

    Returns (economy, target rule, sign table).  Under "effective-output"
    the canonical cost table is type-independent (private values); under
    "labor-hours" it is not.
    """
    goods = [Good(c.name, (c.performance,)) for c in tax.contracts]
    utility = {
        t.name: {c.name: -tax.disutility_of(t.name, c.name) for c in tax.contracts}
        for t in tax.types
    }
    cost = {
        t.name: {c.name: -tax.output(t.name, c) for c in tax.contracts}
        for t in tax.types
    }
    economy = Economy(
        types=[AgentType(t.name, t.mass) for t in tax.types],
        goods=goods,
        utility=utility,
        cost=cost,
    )
    contracts = {c.name: c for c in tax.contracts}
    assignment = {}
    for type_name, contract_name in tax.target:
        if contract_name not in contracts:
            raise ValidationError(f"target: unknown contract {contract_name}")
        assignment[type_name] = Bundle(contract_name, -contracts[contract_name].income)
    scr = SocialChoiceRule(assignment)
    scr.validate(economy)
    return economy, scr, dict(TAXATION_SIGN_TABLE)
