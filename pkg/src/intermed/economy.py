"""Finite-type quasi-linear market model.

An economy has a unit mass of agents split across finitely many hidden
types, a finite set of consumption goods, a utility table v(good, type)
and a cost table c(good, type).  A bundle is a (good, price) pair; the
null bundle is always available and worth zero to everyone.  Agent
utility is v(good, type) - price and the seller's profit is
price - c(good, type).

A social choice rule assigns one bundle per type; from it we derive the
per-good break-even profit and the sold-good distribution that the
regulator in :mod:`intermed.policies` targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .errors import ValidationError
from .tolerances import EPS_MASS, EPS_TOL


@dataclass(frozen=True)
class AgentType:
    name: str
    mass: float


@dataclass(frozen=True)
class Good:
    name: str
    vector: tuple[float, ...] = ()


@dataclass(frozen=True, order=True)
class Bundle:
    """A (good, price) pair; ``good is None`` denotes the null bundle."""

    good: str | None
    price: float

    @property
    def is_null(self) -> bool:
        return self.good is None

    def label(self) -> str:
        if self.is_null:
            return "null"
        return f"({self.good}, {self.price:g})"


NULL_BUNDLE = Bundle(None, 0.0)


class Economy:
    """Immutable container for types, goods and the two payoff tables.

    ``utility`` and ``cost`` are total: every (type, good) pair must be
    present and finite.  Instances are never mutated after construction
    and are safe to share across workers.
    """

    def __init__(
        self,
        types: list[AgentType] | tuple[AgentType, ...],
        goods: list[Good] | tuple[Good, ...],
        utility: Mapping[str, Mapping[str, float]],
        cost: Mapping[str, Mapping[str, float]],
    ):
        self.types = tuple(types)
        self.goods = tuple(goods)
        self.utility = {t: dict(row) for t, row in utility.items()}
        self.cost = {t: dict(row) for t, row in cost.items()}
        self._mass = {t.name: t.mass for t in self.types}
        self._validate()

    def _validate(self) -> None:
        if not self.types:
            raise ValidationError("types: empty type list")
        if not self.goods:
            raise ValidationError("goods: empty goods list")
        names = [t.name for t in self.types]
        if len(set(names)) != len(names):
            raise ValidationError("types: duplicate type names")
        good_names = [g.name for g in self.goods]
        if len(set(good_names)) != len(good_names):
            raise ValidationError("goods: duplicate good names")
        dims = {len(g.vector) for g in self.goods}
        if len(dims) > 1:
            raise ValidationError("goods: vectors of mixed dimension")
        for t in self.types:
            if not (0.0 < t.mass <= 1.0):
                raise ValidationError(f"types: mass of {t.name} must lie in (0, 1]")
        total = sum(t.mass for t in self.types)
        if abs(total - 1.0) > EPS_MASS:
            raise ValidationError(f"types: masses sum to {total:g}, expected 1")
        for table_name, table in (("utility", self.utility), ("cost", self.cost)):
            for t in names:
                row = table.get(t)
                if row is None:
                    raise ValidationError(f"{table_name}: missing row for type {t}")
                for g in good_names:
                    if g not in row:
                        raise ValidationError(
                            f"{table_name}: missing entry for type {t}, good {g}"
                        )
                    value = row[g]
                    if not isinstance(value, (int, float)) or value != value or value in (
                        float("inf"),
                        float("-inf"),
                    ):
                        raise ValidationError(
                            f"{table_name}: non-finite entry for type {t}, good {g}"
                        )
                extra = set(row) - set(good_names)
                if extra:
                    raise ValidationError(
                        f"{table_name}: unknown goods {sorted(extra)} for type {t}"
                    )

    # -- lookups ---------------------------------------------------------

    def type_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.types)

    def good_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.goods)

    def mass(self, type_name: str) -> float:
        try:
            return self._mass[type_name]
        except KeyError:
            raise ValidationError(f"unknown type {type_name}") from None

    def has_good(self, good_name: str) -> bool:
        return any(g.name == good_name for g in self.goods)

    def utility_of(self, bundle: Bundle, type_name: str) -> float:
        """v(good, type) - price; zero for the null bundle."""
        if bundle.is_null:
            return 0.0
        row = self.utility.get(type_name)
        if row is None:
            raise ValidationError(f"unknown type {type_name}")
        if bundle.good not in row:
            raise ValidationError(f"unknown good {bundle.good}")
        return row[bundle.good] - bundle.price

    def profit_of(self, bundle: Bundle, type_name: str) -> float:
        """price - c(good, type); zero for the null bundle."""
        if bundle.is_null:
            return 0.0
        row = self.cost.get(type_name)
        if row is None:
            raise ValidationError(f"unknown type {type_name}")
        if bundle.good not in row:
            raise ValidationError(f"unknown good {bundle.good}")
        return bundle.price - row[bundle.good]

    def private_values(self, tol: float = EPS_TOL) -> bool:
        """True when cost (hence profit) does not depend on the agent type."""
        for g in self.good_names():
            costs = [self.cost[t][g] for t in self.type_names()]
            if max(costs) - min(costs) > tol:
                return False
        return True


class SocialChoiceRule:
    """Per-type bundle assignment; the target the regulator wants realized."""

    def __init__(self, assignment: Mapping[str, Bundle]):
        self.assignment = dict(assignment)

    def bundle(self, type_name: str) -> Bundle:
        return self.assignment[type_name]

    def active_types(self) -> tuple[str, ...]:
        return tuple(t for t, b in self.assignment.items() if not b.is_null)

    def consumption(self) -> dict[str, str]:
        """type -> good map over non-null assignments."""
        return {t: b.good for t, b in self.assignment.items() if not b.is_null}

    def assigned_goods(self) -> tuple[str, ...]:
        seen: list[str] = []
        for t in self.assignment:
            b = self.assignment[t]
            if not b.is_null and b.good not in seen:
                seen.append(b.good)
        return tuple(seen)

    def validate(self, economy: Economy) -> None:
        for t in economy.type_names():
            if t not in self.assignment:
                raise ValidationError(f"target: no bundle assigned to type {t}")
        for t, b in self.assignment.items():
            if t not in economy.type_names():
                raise ValidationError(f"target: unknown type {t}")
            if not b.is_null and not economy.has_good(b.good):
                raise ValidationError(f"target: unknown good {b.good} for type {t}")

    def price_of_good(self, good_name: str, tol: float = EPS_TOL) -> float:
        """The unique target price of a good; errors if types disagree."""
        prices = [
            b.price
            for b in self.assignment.values()
            if not b.is_null and b.good == good_name
        ]
        if not prices:
            raise ValidationError(f"good {good_name} is not assigned by the target rule")
        if max(prices) - min(prices) > tol:
            raise ValidationError(
                f"target: good {good_name} assigned at different prices "
                f"{sorted(set(prices))}"
            )
        return prices[0]


@dataclass(frozen=True)
class GoodDistribution:
    """Normalized weights over goods (the target sold-good distribution)."""

    weights: tuple[tuple[str, float], ...]

    @staticmethod
    def from_mapping(weights: Mapping[str, float]) -> "GoodDistribution":
        items = tuple(sorted(weights.items()))
        total = sum(w for _, w in items)
        if abs(total - 1.0) > EPS_MASS:
            raise ValidationError(f"distribution weights sum to {total:g}, expected 1")
        for g, w in items:
            if w < -EPS_MASS or w > 1.0 + EPS_MASS:
                raise ValidationError(f"distribution weight of {g} outside [0, 1]")
        return GoodDistribution(items)

    def as_dict(self) -> dict[str, float]:
        return dict(self.weights)

    def weight(self, good_name: str) -> float:
        return dict(self.weights).get(good_name, 0.0)


def target_profit(economy: Economy, scr: SocialChoiceRule, good_name: str) -> float:
    """Mass-weighted profit from serving a good to its target buyers at the target price."""
    price = scr.price_of_good(good_name)
    targeted = [
        t
        for t in economy.type_names()
        if not scr.bundle(t).is_null and scr.bundle(t).good == good_name
    ]
    total_mass = sum(economy.mass(t) for t in targeted)
    bundle = Bundle(good_name, price)
    return (
        sum(economy.mass(t) * economy.profit_of(bundle, t) for t in targeted) / total_mass
    )


def target_distribution(economy: Economy, scr: SocialChoiceRule) -> GoodDistribution:
    """Sold-good distribution induced by the target rule over its active mass."""
    active = scr.active_types()
    if not active:
        raise ValidationError("target assigns the null bundle to every type")
    active_mass = sum(economy.mass(t) for t in active)
    weights: dict[str, float] = {}
    for t in active:
        g = scr.bundle(t).good
        weights[g] = weights.get(g, 0.0) + economy.mass(t) / active_mass
    return GoodDistribution.from_mapping(weights)


# -- document format -----------------------------------------------------
#
# Economies travel as JSON documents with top-level keys `types`, `goods`,
# `utility`, `cost` and `target`; see README for the full schema.


def load_economy(text: str) -> tuple[Economy, SocialChoiceRule]:
    """Parse and validate an economy-spec JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("document: expected a JSON object")
    for key in ("types", "goods", "utility", "cost", "target"):
        if key not in doc:
            raise ValidationError(f"document: missing key {key}")

    try:
        types = [AgentType(str(t["name"]), float(t["mass"])) for t in doc["types"]]
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"types: each entry needs name and mass ({exc})") from None
    try:
        goods = [
            Good(str(g["name"]), tuple(float(v) for v in g.get("vector", ())))
            for g in doc["goods"]
        ]
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"goods: each entry needs a name ({exc})") from None

    economy = Economy(types, goods, doc["utility"], doc["cost"])

    assignment: dict[str, Bundle] = {}
    target = doc["target"]
    if not isinstance(target, dict):
        raise ValidationError("target: expected a map from type to bundle")
    for t in economy.type_names():
        if t not in target:
            raise ValidationError(f"target: no bundle assigned to type {t}")
        entry = target[t]
        if entry == "null" or entry is None:
            assignment[t] = NULL_BUNDLE
            continue
        try:
            bundle = Bundle(str(entry["good"]), float(entry["price"]))
        except (TypeError, KeyError):
            raise ValidationError(
                f"target: entry for type {t} needs good and price"
            ) from None
        if not economy.has_good(bundle.good):
            raise ValidationError(f"target: unknown good {bundle.good} for type {t}")
        assignment[t] = bundle
    extra = set(target) - set(economy.type_names())
    if extra:
        raise ValidationError(f"target: unknown types {sorted(extra)}")

    return economy, SocialChoiceRule(assignment)


def economy_document(economy: Economy, scr: SocialChoiceRule) -> dict:
    """Inverse of :func:`load_economy`, for emitting generated instances."""
    target: dict[str, object] = {}
    for t in economy.type_names():
        b = scr.bundle(t)
        target[t] = "null" if b.is_null else {"good": b.good, "price": b.price}
    return {
        "types": [{"name": t.name, "mass": t.mass} for t in economy.types],
        "goods": [{"name": g.name, "vector": list(g.vector)} for g in economy.goods],
        "utility": {t: dict(row) for t, row in economy.utility.items()},
        "cost": {t: dict(row) for t, row in economy.cost.items()},
        "target": target,
    }
