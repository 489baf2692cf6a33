"""Core data model: instances, allocations, utilities, and their file form.

Everything in the integral pipeline is exact: valuations are
``fractions.Fraction`` and Nash welfare is compared as an exact rational.
No floats enter this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

from .errors import (
    DimensionMismatch,
    DuplicateGood,
    NegativeValuation,
    SchemaViolation,
)

Rational = Fraction


def parse_rational(value) -> Fraction:
    """Parse a rational from an int, a "p/q" string, or a decimal string.

    Decimal strings convert exactly ("0.01" -> 1/100). Floats are rejected
    unless they are integral, so binary rounding can never leak in; JSON
    loading routes float literals through Fraction before they become floats.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise SchemaViolation(f"expected a rational, got boolean {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != int(value):
            raise SchemaViolation(
                f"non-integral float {value!r}: write it as a string, e.g. \"1/4\""
            )
        return Fraction(int(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemaViolation(f"cannot parse rational {value!r}") from exc
    raise SchemaViolation(f"cannot parse rational {value!r}")


def format_rational(value: Fraction):
    """Render a rational canonically: an int when integral, else "p/q"."""
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Instance:
    """A constrained fair-division instance.

    agent_count: number of agents n (agents are indexed 0..n-1).
    goods: ordered good identifiers; indices are assigned by this order.
    valuations: n x m matrix of non-negative exact rationals.
    supplies: per-good positive copy count; 1 everywhere unless the
        instance feeds the lottery pipeline.
    """

    agent_count: int
    goods: tuple[str, ...]
    valuations: tuple[tuple[Fraction, ...], ...]
    supplies: tuple[int, ...] = ()

    def __post_init__(self):
        n, goods = self.agent_count, self.goods
        if n < 1:
            raise SchemaViolation(f"agent_count must be positive, got {n}")
        if len(set(goods)) != len(goods):
            seen = set()
            dup = next(g for g in goods if g in seen or seen.add(g))
            raise DuplicateGood(f"duplicate good identifier {dup!r}")
        if len(self.valuations) != n:
            raise DimensionMismatch(
                f"expected {n} valuation rows, got {len(self.valuations)}"
            )
        for i, row in enumerate(self.valuations):
            if len(row) != len(goods):
                raise DimensionMismatch(
                    f"agent {i}: expected {len(goods)} values, got {len(row)}"
                )
            for g, v in zip(goods, row):
                if v < 0:
                    raise NegativeValuation(f"v_{i}({g}) = {v} is negative")
        supplies = self.supplies if self.supplies else tuple([1] * len(goods))
        if len(supplies) != len(goods):
            raise DimensionMismatch(
                f"expected {len(goods)} supplies, got {len(supplies)}"
            )
        if any(q < 1 for q in supplies):
            raise SchemaViolation("supplies must be positive integers")
        object.__setattr__(self, "supplies", supplies)

    @property
    def m(self) -> int:
        return len(self.goods)

    @property
    def n(self) -> int:
        return self.agent_count

    @property
    def good_index(self) -> dict[str, int]:
        cached = self.__dict__.get("_good_index")
        if cached is None:
            cached = {g: k for k, g in enumerate(self.goods)}
            self.__dict__["_good_index"] = cached
        return cached

    def value(self, agent: int, good: str) -> Fraction:
        return self.valuations[agent][self.good_index[good]]

    def bundle_value(self, agent: int, bundle) -> Fraction:
        row = self.valuations[agent]
        idx = self.good_index
        return sum((row[idx[g]] for g in bundle), Fraction(0))

    def scaled_values(self) -> tuple[int, list[list[int]]]:
        """Integer view of the valuation matrix.

        Returns (D, V) with V[i][g] = D * v_i(g), all integers. Utilities of
        allocations sharing the scale D compare exactly as integers, which is
        what the search code uses.
        """
        cached = self.__dict__.get("_scaled")
        if cached is None:
            denoms = [v.denominator for row in self.valuations for v in row]
            scale = lcm(*denoms) if denoms else 1
            ints = [[int(v * scale) for v in row] for row in self.valuations]
            cached = (scale, ints)
            self.__dict__["_scaled"] = cached
        return cached


@dataclass(frozen=True)
class Allocation:
    """Per-agent bundles of goods; leftover goods are implicit.

    With unit supplies the bundles are pairwise disjoint; a good with q
    copies may be held by up to q distinct agents (checked by ``validate``,
    which knows the instance).
    """

    bundles: tuple[frozenset[str], ...]

    @staticmethod
    def of(*bundles) -> "Allocation":
        return Allocation(tuple(frozenset(b) for b in bundles))

    def assigned(self) -> frozenset[str]:
        out: set[str] = set()
        for bundle in self.bundles:
            out |= bundle
        return frozenset(out)

    def is_complete(self, instance: Instance) -> bool:
        return self.assigned() == frozenset(instance.goods)

    def validate(self, instance: Instance):
        unknown = self.assigned() - set(instance.goods)
        if unknown:
            raise SchemaViolation(f"unknown goods {sorted(unknown)} in allocation")
        if len(self.bundles) != instance.agent_count:
            raise DimensionMismatch(
                f"expected {instance.agent_count} bundles, got {len(self.bundles)}"
            )
        for g, q in zip(instance.goods, instance.supplies):
            holders = sum(1 for b in self.bundles if g in b)
            if holders > q:
                raise SchemaViolation(
                    f"good {g!r} held by {holders} agents but has supply {q}"
                )

    def canonical(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(sorted(b)) for b in self.bundles)


@dataclass(frozen=True)
class UtilityProfile:
    """Per-agent utilities plus the Nash-welfare summary of an allocation."""

    values: tuple[Fraction, ...]
    positive_support: frozenset[int] = field(init=False)
    nash_welfare: Fraction = field(init=False)

    def __post_init__(self):
        support = frozenset(i for i, u in enumerate(self.values) if u > 0)
        nw = Fraction(0)
        if support:
            nw = Fraction(1)
            for i in support:
                nw *= self.values[i]
        object.__setattr__(self, "positive_support", support)
        object.__setattr__(self, "nash_welfare", nw)

    @property
    def support_size(self) -> int:
        return len(self.positive_support)

    def objective(self) -> tuple[int, Fraction]:
        """Lexicographic MNW objective: support size first, then the product."""
        return (self.support_size, self.nash_welfare)


def utilities(instance: Instance, alloc: Allocation) -> UtilityProfile:
    """Additive utilities of an allocation, exactly."""
    alloc.validate(instance)
    return UtilityProfile(
        tuple(instance.bundle_value(i, alloc.bundles[i]) for i in range(instance.n))
    )


# ---- file format -------------------------------------------------------------

def _require(mapping, key, kind, where):
    if key not in mapping:
        raise SchemaViolation(f"{where}: missing {key!r}")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaViolation(f"{where}: {key!r} has wrong type")
    return value


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise SchemaViolation("instance file must hold a JSON object")
    agents = _require(data, "agents", int, "instance")
    goods = _require(data, "goods", list, "instance")
    if not all(isinstance(g, str) for g in goods):
        raise SchemaViolation("instance: goods must be strings")
    rows = _require(data, "valuations", list, "instance")
    if not all(isinstance(r, list) for r in rows):
        raise SchemaViolation("instance: valuations must be a list of rows")
    valuations = tuple(tuple(parse_rational(v) for v in row) for row in rows)
    supplies = data.get("supplies")
    if supplies is not None:
        if not (isinstance(supplies, list) and all(isinstance(q, int) for q in supplies)):
            raise SchemaViolation("instance: supplies must be integers")
        supplies = tuple(supplies)
    return Instance(
        agent_count=agents,
        goods=tuple(goods),
        valuations=valuations,
        supplies=supplies or (),
    )


def load_instance(source) -> Instance:
    """Parse an instance from bytes/str JSON (the ``constraint`` key, if any,
    is read separately by the feasibility module)."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    return instance_from_dict(data)


def instance_to_dict(instance: Instance, constraint: dict | None = None) -> dict:
    data: dict = {
        "agents": instance.agent_count,
        "goods": list(instance.goods),
        "valuations": [[format_rational(v) for v in row] for row in instance.valuations],
    }
    if any(q != 1 for q in instance.supplies):
        data["supplies"] = list(instance.supplies)
    if constraint is not None:
        data["constraint"] = constraint
    return data


def save_instance(instance: Instance, constraint: dict | None = None) -> str:
    """Canonical serialization; loading and re-saving is byte-identical."""
    return json.dumps(instance_to_dict(instance, constraint), indent=2) + "\n"


def allocation_from_dict(data: dict) -> Allocation:
    bundles = _require(data, "bundles", list, "allocation")
    return Allocation.of(*bundles)


def load_allocation(source) -> Allocation:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    return allocation_from_dict(data)


def save_allocation(alloc: Allocation) -> str:
    return json.dumps({"bundles": [sorted(b) for b in alloc.bundles]}, indent=2) + "\n"
