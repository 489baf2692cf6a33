"""Chore division as goods with copies, and back.

A chore instance stores cost magnitudes (non-negative); utilities are their
negations. Each chore becomes a category of n-1 identical copy-goods valued
at the chore's cost; a complete copies allocation sends each chore to the
one agent holding none of its copies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import MalformedCopiesAllocation, SchemaViolation
from ..feasibility import FeasibilitySet
from ..instance import Allocation, Instance


@dataclass(frozen=True)
class CopiesView:
    """A copies instance derived from another instance, with its category map."""

    instance: Instance
    fs: FeasibilitySet
    category_names: tuple[str, ...]  # source good/chore per category


def chores_to_copies(chores: Instance) -> CopiesView:
    """Model a chore instance as goods with n-1 copies per chore."""
    n = chores.agent_count
    if n < 2:
        raise SchemaViolation("the chores-to-copies mapping needs at least 2 agents")
    goods: list[str] = []
    categories = []
    columns: list[list[Fraction]] = [[] for _ in range(n)]
    for gidx, chore in enumerate(chores.goods):
        members = [f"{chore}#{k + 1}" for k in range(n - 1)]
        goods.extend(members)
        categories.append((frozenset(members), 1))
        for i in range(n):
            columns[i].extend([chores.valuations[i][gidx]] * (n - 1))
    instance = Instance(
        agent_count=n,
        goods=tuple(goods),
        valuations=tuple(tuple(col) for col in columns),
    )
    fs = FeasibilitySet.copies(goods, categories, n)
    return CopiesView(instance=instance, fs=fs, category_names=tuple(chores.goods))


def copies_alloc_to_chores(view: CopiesView, alloc: Allocation) -> Allocation:
    """Send each chore to the unique agent holding no copy of it."""
    n = view.instance.agent_count
    bundles: list[set[str]] = [set() for _ in range(n)]
    for cat, chore in zip(view.fs.categories, view.category_names):
        holders = {
            i for i in range(n) if alloc.bundles[i] & cat.goods
        }
        if len(holders) != n - 1:
            raise MalformedCopiesAllocation(
                f"category of {chore!r} is held by {len(holders)} agents, "
                f"expected {n - 1} distinct holders"
            )
        missing = next(i for i in range(n) if i not in holders)
        bundles[missing].add(chore)
    return Allocation(tuple(frozenset(b) for b in bundles))


def materialize_copies(instance: Instance) -> tuple[Instance, FeasibilitySet, dict[str, str]]:
    """Expand a supplies-form instance into one good per physical copy.

    Every category gets upper bound 1, so integral feasible allocations of
    the result are exactly the supply-respecting allocations of the input;
    used to run the integral checkers on lottery support allocations.
    """
    n = instance.agent_count
    goods: list[str] = []
    categories = []
    columns: list[list[Fraction]] = [[] for _ in range(n)]
    origin: dict[str, str] = {}
    for gidx, g in enumerate(instance.goods):
        q = instance.supplies[gidx]
        if q > n:
            raise SchemaViolation(f"supply of {g!r} exceeds the agent count")
        members = [g] if q == 1 else [f"{g}#{k + 1}" for k in range(q)]
        goods.extend(members)
        categories.append((frozenset(members), 1))
        for name in members:
            origin[name] = g
        for i in range(n):
            columns[i].extend([instance.valuations[i][gidx]] * q)
    copies_instance = Instance(
        agent_count=n,
        goods=tuple(goods),
        valuations=tuple(tuple(col) for col in columns),
    )
    fs = FeasibilitySet.copies(goods, categories, n)
    return copies_instance, fs, origin


def lift_allocation(instance: Instance, materialized: Instance,
                    fs: FeasibilitySet, alloc: Allocation) -> Allocation:
    """Rewrite a supplies-form allocation into the materialized copy goods,
    assigning copies to holders in agent order."""
    n = instance.agent_count
    bundles: list[set[str]] = [set() for _ in range(n)]
    for cat, g in zip(fs.categories, instance.goods):
        members = sorted(cat.goods, key=materialized.good_index.__getitem__)
        holders = sorted(i for i in range(n) if g in alloc.bundles[i])
        if len(holders) > len(members):
            raise MalformedCopiesAllocation(
                f"{len(holders)} agents hold {g!r} but only {len(members)} copies exist"
            )
        for agent, copy_name in zip(holders, members):
            bundles[agent].add(copy_name)
    return Allocation(tuple(frozenset(b) for b in bundles))
