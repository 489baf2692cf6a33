"""Exact constrained maximum-Nash-welfare solvers and round robin.

The objective is lexicographic: first maximize how many agents get positive
utility, then maximize the product of the positive utilities. Comparisons
run on integer-scaled utilities so ties are decided exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

from .errors import EmptyFeasibleSet, ExplosionGuard, UnsupportedConstraint
from .feasibility import (
    DEFAULT_ENUM_CAP,
    FeasibilitySet,
    make_search_state,
    max_weight_independent,
    validate_copies_values,
)
from .instance import Allocation, Instance, UtilityProfile

_EXPANSION_CAP = 200_000


@dataclass(frozen=True)
class MnwResult:
    """All lexicographic optima over the searched feasible set."""

    maximizers: tuple[Allocation, ...]
    support_size: int
    nash_welfare: Fraction
    search_stats: dict

    def utility_profile(self, instance: Instance) -> UtilityProfile:
        from .instance import utilities

        return utilities(instance, self.maximizers[0])


def _product_over_positive(values) -> int:
    prod = 1
    for v in values:
        if v > 0:
            prod *= v
    return prod


class _Incumbent:
    __slots__ = ("support", "prod", "items", "all_optima")

    def __init__(self, all_optima: bool):
        self.support = -1
        self.prod = 0
        self.items: list = []
        self.all_optima = all_optima

    def offer(self, support: int, prod: int, item_factory):
        if support > self.support or (support == self.support and prod > self.prod):
            self.support = support
            self.prod = prod
            self.items = [item_factory()]
        elif support == self.support and prod == self.prod:
            if self.all_optima:
                self.items.append(item_factory())

    def not_worse_bound(self, support: int, prod: int) -> bool:
        """Whether a (support, prod) upper bound can still tie the incumbent."""
        if support != self.support:
            return support > self.support
        return prod >= self.prod


def solve_mnw(instance: Instance, fs: FeasibilitySet, complete: bool = False,
              mode: str = "all_optima", cap: int = DEFAULT_ENUM_CAP) -> MnwResult:
    """Exact lexicographic MNW over the (complete) feasible set.

    Branch and bound over good-by-good assignment: the bound at a prefix is
    per-agent current utility plus everything the agent could still gain,
    compared exactly against the incumbent; equal bounds are never pruned so
    ``all_optima`` keeps every tie.
    """
    if mode not in ("all_optima", "one_optimum"):
        raise ValueError(f"unknown mode {mode!r}")
    if fs.tag == "copies":
        return _solve_mnw_copies(instance, fs, complete, mode, cap)
    return _solve_mnw_general(instance, fs, complete, mode, cap)


def _solve_mnw_general(instance, fs, complete, mode, cap):
    n, m = instance.agent_count, instance.m
    _, V = instance.scaled_values()
    order = sorted(range(m), key=lambda g: (-max(V[i][g] for i in range(n)), g))
    suffix = [[0] * (m + 1) for _ in range(n)]
    for i in range(n):
        row = suffix[i]
        vals = V[i]
        for p in range(m - 1, -1, -1):
            row[p] = row[p + 1] + vals[order[p]]

    state = make_search_state(instance, fs, order)
    inc = _Incumbent(mode == "all_optima")
    u = [0] * n
    assign = [-1] * m
    stats = {"nodes": 0, "pruned": 0}

    def dfs(pos: int):
        stats["nodes"] += 1
        if stats["nodes"] > cap:
            raise ExplosionGuard(f"MNW search exceeded {cap} nodes")
        if pos == m:
            if state.leaf_ok():
                support = sum(1 for x in u if x > 0)
                inc.offer(support, _product_over_positive(u), lambda: list(assign))
            return
        if not state.completable(pos) or (complete and not state.complete_placeable(pos)):
            stats["pruned"] += 1
            return
        potential = [u[i] + suffix[i][pos] for i in range(n)]
        support_bound = sum(1 for x in potential if x > 0)
        if not inc.not_worse_bound(support_bound, _product_over_positive(potential)):
            stats["pruned"] += 1
            return
        g = order[pos]
        for agent in range(n):
            if state.can_add(agent, g):
                state.add(agent, g)
                u[agent] += V[agent][g]
                assign[g] = agent
                dfs(pos + 1)
                assign[g] = -1
                u[agent] -= V[agent][g]
                state.remove(agent, g)
        if not complete:
            dfs(pos + 1)

    dfs(0)
    if not inc.items:
        raise EmptyFeasibleSet(
            "no feasible allocation" + (" that is complete" if complete else "")
        )
    allocations = tuple(_assign_to_allocation(instance, a) for a in inc.items)
    return _finish(instance, allocations, stats)


def _assign_to_allocation(instance, assign) -> Allocation:
    bundles: list[set[str]] = [set() for _ in range(instance.agent_count)]
    for gidx, agent in enumerate(assign):
        if agent >= 0:
            bundles[agent].add(instance.goods[gidx])
    return Allocation(tuple(frozenset(b) for b in bundles))


def _finish(instance, allocations, stats) -> MnwResult:
    from .instance import utilities

    profile = utilities(instance, allocations[0])
    return MnwResult(
        maximizers=allocations,
        support_size=profile.support_size,
        nash_welfare=profile.nash_welfare,
        search_stats=stats,
    )


def _solve_mnw_copies(instance, fs, complete, mode, cap):
    """Category-level search for goods with copies.

    Copies inside a category are perfect substitutes, so only the set of
    agents holding a copy matters; the search branches on those agent sets
    and optima are expanded back to concrete copy assignments afterwards.
    """
    validate_copies_values(instance, fs)
    n = instance.agent_count
    _, V = instance.scaled_values()
    idx = instance.good_index

    covered: set[str] = set()
    cats: list[list[int]] = []
    for cat in fs.categories:
        cats.append(sorted((idx[g] for g in cat.goods)))
        covered |= cat.goods
    for g in instance.goods:
        if g not in covered:
            cats.append([idx[g]])

    vals = [[V[i][members[0]] for i in range(n)] for members in cats]
    order = sorted(range(len(cats)), key=lambda c: (-max(vals[c]), c))
    ncat = len(cats)
    suffix = [[0] * (ncat + 1) for _ in range(n)]
    for i in range(n):
        for p in range(ncat - 1, -1, -1):
            suffix[i][p] = suffix[i][p + 1] + vals[order[p]][i]

    agent_sets: list[list[tuple[int, ...]]] = []
    for c in range(ncat):
        size_cap = min(len(cats[c]), n)
        options = []
        sizes = [size_cap] if complete and len(cats[c]) <= n else range(size_cap + 1)
        if complete and len(cats[c]) > n:
            raise EmptyFeasibleSet("a copies category holds more copies than agents")
        for s in sizes:
            options.extend(combinations(range(n), s))
        agent_sets.append(options)

    inc = _Incumbent(mode == "all_optima")
    u = [0] * n
    chosen: list[tuple[int, ...]] = [()] * ncat
    stats = {"nodes": 0, "pruned": 0}

    def dfs(pos: int):
        stats["nodes"] += 1
        if stats["nodes"] > cap:
            raise ExplosionGuard(f"MNW search exceeded {cap} nodes")
        if pos == ncat:
            support = sum(1 for x in u if x > 0)
            inc.offer(support, _product_over_positive(u), lambda: list(chosen))
            return
        potential = [u[i] + suffix[i][pos] for i in range(n)]
        support_bound = sum(1 for x in potential if x > 0)
        if not inc.not_worse_bound(support_bound, _product_over_positive(potential)):
            stats["pruned"] += 1
            return
        c = order[pos]
        val = vals[c]
        for agents in agent_sets[c]:
            for a in agents:
                u[a] += val[a]
            chosen[c] = agents
            dfs(pos + 1)
            for a in agents:
                u[a] -= val[a]
        chosen[c] = ()

    dfs(0)
    if not inc.items:
        raise EmptyFeasibleSet("no feasible allocation")

    allocations: list[Allocation] = []
    for item in inc.items:
        expanded = _expand_copy_orbit(instance, cats, item, mode)
        allocations.extend(expanded)
        if len(allocations) > _EXPANSION_CAP:
            raise ExplosionGuard("too many symmetric MNW optima to materialize")
    return _finish(instance, tuple(allocations), stats)


def _expand_copy_orbit(instance, cats, holder_sets, mode):
    """All concrete copy assignments realizing per-category holder sets."""
    partial: list[list[set[str]]] = [[set() for _ in range(instance.agent_count)]]
    for members, agents in zip(cats, holder_sets):
        if not agents:
            continue
        placements = list(permutations(members, len(agents)))
        if mode == "one_optimum":
            placements = placements[:1]
        grown = []
        for bundles in partial:
            for placement in placements:
                nxt = [set(b) for b in bundles]
                for agent, gidx in zip(agents, placement):
                    nxt[agent].add(instance.goods[gidx])
                grown.append(nxt)
        partial = grown
    return [Allocation(tuple(frozenset(b) for b in bundles)) for bundles in partial]


# ---- weighted-rank reduction ----------------------------------------------------


class WeightedRankView:
    """Unconstrained view of a matroid-constrained instance.

    Each agent values a set by her best feasible subset of it (the weighted
    rank of the matroid with her valuations as weights); this valuation is
    monotone submodular. ``project`` sends any unconstrained allocation to
    the allocation of per-agent best feasible sub-bundles.
    """

    def __init__(self, instance: Instance, fs: FeasibilitySet):
        if not fs.is_matroidal:
            raise UnsupportedConstraint(
                f"weighted-rank reduction needs a matroidal constraint, got {fs.tag!r}"
            )
        self.instance = instance
        self.fs = fs
        self._weights = [
            {g: instance.value(i, g) for g in instance.goods}
            for i in range(instance.agent_count)
        ]

    def best_subset(self, agent: int, bundle) -> frozenset[str]:
        subset, _ = max_weight_independent(self.fs, self._weights[agent], bundle)
        return subset

    def value(self, agent: int, bundle) -> Fraction:
        _, total = max_weight_independent(self.fs, self._weights[agent], bundle)
        return total

    def project(self, alloc: Allocation) -> Allocation:
        return Allocation(
            tuple(
                self.best_subset(i, alloc.bundles[i])
                for i in range(self.instance.agent_count)
            )
        )


def reduce_to_unconstrained(instance: Instance, fs: FeasibilitySet) -> WeightedRankView:
    return WeightedRankView(instance, fs)


# ---- round robin -----------------------------------------------------------------


def round_robin(instance: Instance, order=None) -> Allocation:
    """Agents pick in cyclic order; each takes her most valuable remaining
    good, ties broken by good index. Output is complete and balanced."""
    n = instance.agent_count
    order = tuple(order) if order is not None else tuple(range(n))
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the agents")
    remaining = list(range(instance.m))
    bundles: list[set[str]] = [set() for _ in range(n)]
    turn = 0
    while remaining:
        agent = order[turn % n]
        row = instance.valuations[agent]
        pick = min(remaining, key=lambda g: (-row[g], g))
        remaining.remove(pick)
        bundles[agent].add(instance.goods[pick])
        turn += 1
    return Allocation(tuple(frozenset(b) for b in bundles))
