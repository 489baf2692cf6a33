"""Feasibility oracles for every supported constraint family.

Matroidal families (free, uniform, partition, laminar, graphic, copies) get
independence oracles, rank, greedy max-weight independent subsets, the free
extension, and the base-orderable exchange bijection. Non-matroidal families
(balanced, partition matroids with lower bounds) get bundle/allocation
feasibility plus the alternate-worlds expansion into partition matroids.

The brute-force substrate ``enumerate_feasible`` walks good-by-good with
per-prefix pruning; every oracle-style property test in the suite runs on
top of it, so it is deliberately dumb and heavily guarded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .errors import (
    EmptyFeasibleSet,
    ExplosionGuard,
    NotBases,
    SchemaViolation,
    UnsupportedConstraint,
)
from .instance import Allocation, Instance, instance_from_dict, parse_rational

DEFAULT_ENUM_CAP = 2_000_000
DEFAULT_WORLD_CAP = 100_000

MATROIDAL_TAGS = frozenset(
    {"free", "uniform", "partition", "laminar", "graphic", "copies", "extended"}
)


@dataclass(frozen=True)
class Category:
    goods: frozenset[str]
    upper: int
    lower: int = 0


@dataclass(frozen=True)
class FeasibilitySet:
    """Tagged constraint family over an ordered ground set of goods."""

    tag: str
    goods: tuple[str, ...]
    categories: tuple[Category, ...] = ()
    uniform_rank: int | None = None
    edges: tuple[tuple[str, str], ...] = ()
    n_agents: int | None = None
    base: "FeasibilitySet | None" = None
    dummies: frozenset[str] = frozenset()
    extended_rank: int | None = None

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def free(goods) -> "FeasibilitySet":
        return FeasibilitySet(tag="free", goods=tuple(goods))

    @staticmethod
    def uniform(goods, rank: int) -> "FeasibilitySet":
        if rank < 0:
            raise SchemaViolation("uniform rank must be non-negative")
        return FeasibilitySet(tag="uniform", goods=tuple(goods), uniform_rank=rank)

    @staticmethod
    def partition(goods, categories) -> "FeasibilitySet":
        cats = _normalize_categories(goods, categories, allow_lower=False)
        _check_disjoint(cats)
        return FeasibilitySet(tag="partition", goods=tuple(goods), categories=cats)

    @staticmethod
    def laminar(goods, categories) -> "FeasibilitySet":
        cats = _normalize_categories(goods, categories, allow_lower=False)
        _check_laminar(cats)
        return FeasibilitySet(tag="laminar", goods=tuple(goods), categories=cats)

    @staticmethod
    def graphic(goods, edges) -> "FeasibilitySet":
        goods = tuple(goods)
        edges = tuple((str(u), str(v)) for u, v in edges)
        if len(edges) != len(goods):
            raise SchemaViolation("graphic constraint needs one edge per good")
        return FeasibilitySet(tag="graphic", goods=goods, edges=edges)

    @staticmethod
    def copies(goods, categories, n_agents: int) -> "FeasibilitySet":
        cats = _normalize_categories(goods, categories, allow_lower=False)
        _check_disjoint(cats)
        for cat in cats:
            if cat.upper != 1:
                raise SchemaViolation("copies categories must have upper bound 1")
            if len(cat.goods) > n_agents:
                raise SchemaViolation(
                    f"copies category of size {len(cat.goods)} exceeds {n_agents} agents"
                )
        return FeasibilitySet(
            tag="copies", goods=tuple(goods), categories=cats, n_agents=n_agents
        )

    @staticmethod
    def balanced(goods, n_agents: int) -> "FeasibilitySet":
        return FeasibilitySet(tag="balanced", goods=tuple(goods), n_agents=n_agents)

    @staticmethod
    def partition_lb(goods, categories, n_agents: int) -> "FeasibilitySet":
        cats = _normalize_categories(goods, categories, allow_lower=True)
        _check_disjoint(cats)
        for cat in cats:
            size = len(cat.goods)
            if not (cat.lower <= size // n_agents and -(-size // n_agents) <= cat.upper):
                raise SchemaViolation(
                    "partition_lb needs lower <= floor(|C|/n) and ceil(|C|/n) <= upper"
                )
        return FeasibilitySet(
            tag="partition_lb", goods=tuple(goods), categories=cats, n_agents=n_agents
        )

    # -- derived --------------------------------------------------------------

    @property
    def is_matroidal(self) -> bool:
        return self.tag in MATROIDAL_TAGS

    def balanced_bounds(self) -> tuple[int, int]:
        m, n = len(self.goods), self.n_agents
        return m // n, -(-m // n)

    def good_index(self) -> dict[str, int]:
        cached = self.__dict__.get("_gidx")
        if cached is None:
            cached = {g: k for k, g in enumerate(self.goods)}
            self.__dict__["_gidx"] = cached
        return cached

    def cats_of(self) -> list[tuple[int, ...]]:
        """Per good, ids of containing categories, deepest (smallest) first."""
        cached = self.__dict__.get("_cats_of")
        if cached is None:
            order = sorted(
                range(len(self.categories)),
                key=lambda c: (len(self.categories[c].goods), c),
            )
            per_good = []
            for g in self.goods:
                per_good.append(
                    tuple(c for c in order if g in self.categories[c].goods)
                )
            cached = per_good
            self.__dict__["_cats_of"] = cached
        return cached


def _normalize_categories(goods, categories, allow_lower: bool) -> tuple[Category, ...]:
    ground = set(goods)
    out = []
    for cat in categories:
        if isinstance(cat, Category):
            cat = (cat.goods, cat.upper, cat.lower)
        if len(cat) == 2:
            members, upper = cat
            lower = 0
        else:
            members, upper, lower = cat
        members = frozenset(members)
        if not members <= ground:
            raise SchemaViolation(f"category goods {sorted(members - ground)} unknown")
        if upper < 0 or lower < 0:
            raise SchemaViolation("category bounds must be non-negative")
        if lower > 0 and not allow_lower:
            raise SchemaViolation("lower bounds only valid for partition_lb")
        if lower > upper:
            raise SchemaViolation("category lower bound exceeds upper bound")
        out.append(Category(goods=members, upper=upper, lower=lower))
    return tuple(out)


def _check_disjoint(cats):
    seen: set[str] = set()
    for cat in cats:
        if seen & cat.goods:
            raise SchemaViolation("partition categories must be disjoint")
        seen |= cat.goods


def _check_laminar(cats):
    for a, b in combinations(cats, 2):
        inter = a.goods & b.goods
        if inter and inter != a.goods and inter != b.goods:
            raise SchemaViolation("categories are not laminar")


def _require_matroidal(fs: FeasibilitySet, op: str):
    if not fs.is_matroidal:
        raise UnsupportedConstraint(f"{op} needs a matroidal constraint, got {fs.tag!r}")


# ---- independence oracle ------------------------------------------------------


class _DisjointSets:
    """Union-find with an undo stack (rollback must be LIFO)."""

    def __init__(self):
        self.parent: dict[str, str] = {}
        self.size: dict[str, int] = {}
        self.trail: list[tuple[str, str]] = []

    def find(self, x):
        self.parent.setdefault(x, x)
        self.size.setdefault(x, 1)
        while self.parent[x] != x:
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.trail.append((rb, ra))
        return True

    def undo(self):
        rb, ra = self.trail.pop()
        self.parent[rb] = rb
        self.size[ra] -= self.size[rb]


def is_independent(fs: FeasibilitySet, bundle) -> bool:
    """Matroid independence oracle for a single set of goods."""
    _require_matroidal(fs, "is_independent")
    bundle = set(bundle)
    tag = fs.tag
    if tag == "free":
        return True
    if tag == "uniform":
        return len(bundle) <= fs.uniform_rank
    if tag in ("partition", "laminar", "copies"):
        for cat in fs.categories:
            if len(bundle & cat.goods) > cat.upper:
                return False
        return True
    if tag == "graphic":
        dsu = _DisjointSets()
        idx = fs.good_index()
        for g in bundle:
            u, v = fs.edges[idx[g]]
            if u == v or not dsu.union(u, v):
                return False
        return True
    if tag == "extended":
        if len(bundle) > fs.extended_rank:
            return False
        return is_independent(fs.base, bundle - fs.dummies)
    raise UnsupportedConstraint(tag)


def is_feasible_bundle(fs: FeasibilitySet, bundle) -> bool:
    bundle = set(bundle)
    if fs.is_matroidal:
        return is_independent(fs, bundle)
    if fs.tag == "balanced":
        lo, hi = fs.balanced_bounds()
        return lo <= len(bundle) <= hi
    if fs.tag == "partition_lb":
        return all(
            cat.lower <= len(bundle & cat.goods) <= cat.upper for cat in fs.categories
        )
    raise UnsupportedConstraint(fs.tag)


def is_feasible_allocation(fs: FeasibilitySet, alloc: Allocation, complete: bool = False) -> bool:
    if not all(is_feasible_bundle(fs, b) for b in alloc.bundles):
        return False
    if complete:
        return alloc.assigned() == frozenset(fs.goods)
    return True


def rank(fs: FeasibilitySet) -> int:
    """Rank of a matroidal constraint, by greedy extension."""
    _require_matroidal(fs, "rank")
    members, _ = max_weight_independent(
        fs, {g: Fraction(1) for g in fs.goods}, fs.goods
    )
    return len(members)


def max_weight_independent(fs: FeasibilitySet, weights, subset) -> tuple[frozenset[str], Fraction]:
    """Matroid greedy: the max-weight independent subset of ``subset``.

    Scans by descending weight, ties broken by good index, adding a good
    whenever independence is preserved. Realizes the weighted rank function
    and the best-feasible-bundle map used by the marginal-envy checker.
    """
    _require_matroidal(fs, "max_weight_independent")
    if any(weights[g] < 0 for g in subset):
        raise SchemaViolation("max_weight_independent needs non-negative weights")
    idx = fs.good_index()
    items = sorted(subset, key=lambda g: (-weights[g], idx[g]))
    chosen: set[str] = set()
    total = Fraction(0)
    for g in items:
        if weights[g] == 0:
            break
        if is_independent(fs, chosen | {g}):
            chosen.add(g)
            total += weights[g]
    return frozenset(chosen), total


# ---- free extension -----------------------------------------------------------


def free_extend(fs: FeasibilitySet, instance: Instance) -> tuple[FeasibilitySet, Instance]:
    """Pad the ground set with zero-value dummies until |M'| = n * rank.

    A set is independent in the extension iff its non-dummy part is
    independent and its size is at most the rank, so every complete feasible
    allocation of the extension hands each agent exactly rank-many goods.
    """
    _require_matroidal(fs, "free_extend")
    r = rank(fs)
    n = instance.agent_count
    target = n * r
    m = len(fs.goods)
    if m > target:
        raise EmptyFeasibleSet(
            f"no complete feasible allocation exists: {m} goods but n*rank = {target}"
        )
    existing = set(fs.goods)
    dummies = []
    k = 0
    while m + len(dummies) < target:
        name = f"dummy{k}"
        k += 1
        if name in existing:
            continue
        dummies.append(name)
    goods2 = fs.goods + tuple(dummies)
    inst2 = Instance(
        agent_count=n,
        goods=goods2,
        valuations=tuple(
            row + tuple([Fraction(0)] * len(dummies)) for row in instance.valuations
        ),
        supplies=instance.supplies + tuple([1] * len(dummies)),
    )
    fs2 = _extend_constraint(fs, goods2, r)
    return fs2, inst2


def _extend_constraint(fs: FeasibilitySet, goods2, r: int) -> FeasibilitySet:
    ground = frozenset(goods2)
    if fs.tag == "uniform":
        return FeasibilitySet.uniform(goods2, min(fs.uniform_rank, r))
    if fs.tag == "free":
        return FeasibilitySet.uniform(goods2, r)
    if fs.tag in ("partition", "laminar", "copies"):
        # A root category of bound r over the extended ground set encodes the
        # size cap; old categories hold no dummies, so independence matches
        # the free-extension definition and the family stays laminar.
        cats2 = []
        merged = False
        for cat in fs.categories:
            if cat.goods == ground:
                cats2.append(Category(goods=ground, upper=min(cat.upper, r)))
                merged = True
            else:
                cats2.append(cat)
        if not merged:
            cats2.append(Category(goods=ground, upper=r))
        return FeasibilitySet.laminar(goods2, [(c.goods, c.upper) for c in cats2])
    if fs.tag in ("graphic", "extended"):
        return FeasibilitySet(
            tag="extended",
            goods=tuple(goods2),
            base=fs,
            dummies=frozenset(goods2) - frozenset(fs.goods),
            extended_rank=r,
        )
    raise UnsupportedConstraint(fs.tag)


# ---- base-orderable exchange bijection -----------------------------------------


@dataclass(frozen=True)
class Bijection:
    """Exchange bijection f: S -> T between two bases."""

    mapping: tuple[tuple[str, str], ...]

    def as_dict(self) -> dict[str, str]:
        return dict(self.mapping)

    def verify(self, fs: FeasibilitySet, S, T) -> bool:
        S, T = set(S), set(T)
        f = self.as_dict()
        if set(f) != S or set(f.values()) != T:
            return False
        for g, t in f.items():
            if not is_independent(fs, (S - {g}) | {t}):
                return False
            if not is_independent(fs, (T - {t}) | {g}):
                return False
        return True


def base_orderable_bijection(fs: FeasibilitySet, S, T) -> Bijection:
    """Exchange bijection between bases of a partition/laminar/uniform matroid.

    Goods are paired bottom-up through the laminar tree: elements whose
    deepest containing category matches are paired there, and leftovers
    propagate to the parent. Graphic matroids are refused (not guaranteed
    base-orderable); the result is re-checked by the double-exchange oracle.
    """
    if fs.tag in ("graphic", "balanced", "partition_lb", "extended"):
        raise UnsupportedConstraint(
            f"exchange bijection unsupported for {fs.tag!r} constraints"
        )
    _require_matroidal(fs, "base_orderable_bijection")
    S, T = frozenset(S), frozenset(T)
    r = rank(fs)
    for name, basis in (("S", S), ("T", T)):
        if len(basis) != r or not is_independent(fs, basis):
            raise NotBases(f"{name} is not a basis (rank {r})")

    idx = fs.good_index()
    cats = fs.categories
    # children-before-parents order; the virtual root (whole ground set) last
    order = sorted(range(len(cats)), key=lambda c: (len(cats[c].goods), c))
    deepest_of: dict[str, int] = {}
    for g in S | T:
        deepest_of[g] = next((c for c in order if g in cats[c].goods), -1)

    parent: dict[int, int] = {}
    for pos, c in enumerate(order):
        parent[c] = next(
            (d for d in order[pos + 1 :] if cats[c].goods < cats[d].goods), -1
        )

    pool_s: dict[int, list[str]] = {}
    pool_t: dict[int, list[str]] = {}
    for g in S:
        pool_s.setdefault(deepest_of[g], []).append(g)
    for g in T:
        pool_t.setdefault(deepest_of[g], []).append(g)

    pairs: list[tuple[str, str]] = []
    for c in list(order) + [-1]:
        here_s = sorted(pool_s.get(c, []), key=idx.__getitem__)
        here_t = sorted(pool_t.get(c, []), key=idx.__getitem__)
        k = min(len(here_s), len(here_t))
        pairs.extend(zip(here_s[:k], here_t[:k]))
        if c != -1:
            up = parent[c]
            if len(here_s) > k:
                pool_s.setdefault(up, []).extend(here_s[k:])
            if len(here_t) > k:
                pool_t.setdefault(up, []).extend(here_t[k:])

    bijection = Bijection(mapping=tuple(sorted(pairs, key=lambda p: idx[p[0]])))
    if not bijection.verify(fs, S, T):
        raise NotBases("constructed mapping failed the exchange oracle check")
    return bijection


# ---- alternate worlds (lower bounds) -------------------------------------------


def count_lower_bound_worlds(fs: FeasibilitySet) -> int:
    n = fs.n_agents
    total = 1
    for cat in fs.categories:
        total *= math.comb(len(cat.goods), n * cat.lower)
    return total


def lower_bound_worlds(fs: FeasibilitySet, cap: int = DEFAULT_WORLD_CAP):
    """Expand a partition-with-lower-bounds constraint into partition matroids.

    For each way of picking n*lower goods per category, yields the partition
    matroid whose categories are the picked goods (bound = lower) and the
    rest (bound = upper - lower). Complete feasible allocations of the union
    of these worlds are exactly the complete feasible allocations of ``fs``.
    """
    if fs.tag == "balanced":
        fs = as_partition_lb(fs)
    if fs.tag != "partition_lb":
        raise UnsupportedConstraint("lower_bound_worlds needs a partition_lb constraint")
    total = count_lower_bound_worlds(fs)
    if total > cap:
        raise ExplosionGuard(f"{total} alternate worlds exceed the cap of {cap}")
    n = fs.n_agents
    idx = fs.good_index()

    def emit(cat_pos: int, chosen: list[tuple[frozenset[str], int]]):
        if cat_pos == len(fs.categories):
            yield FeasibilitySet.partition(fs.goods, list(chosen))
            return
        cat = fs.categories[cat_pos]
        members = sorted(cat.goods, key=idx.__getitem__)
        for picked in combinations(members, n * cat.lower):
            picked_set = frozenset(picked)
            sub = []
            if picked_set:
                sub.append((picked_set, cat.lower))
            rest = cat.goods - picked_set
            if rest:
                sub.append((rest, cat.upper - cat.lower))
            yield from emit(cat_pos + 1, chosen + sub)

    yield from emit(0, [])


def as_partition_lb(fs: FeasibilitySet) -> FeasibilitySet:
    """View a balanced constraint as a single-category partition_lb."""
    if fs.tag == "partition_lb":
        return fs
    if fs.tag != "balanced":
        raise UnsupportedConstraint("as_partition_lb needs balanced or partition_lb")
    lo, hi = fs.balanced_bounds()
    return FeasibilitySet.partition_lb(
        fs.goods, [(frozenset(fs.goods), hi, lo)], fs.n_agents
    )


# ---- incremental search states --------------------------------------------------


class SearchState:
    """Per-constraint incremental feasibility for good-by-good assignment.

    ``can_add`` checks upper bounds only; ``completable`` checks that the
    remaining suffix can still satisfy lower bounds; ``leaf_ok`` validates
    lower bounds at a leaf. Upper-bound-only families are leaf_ok trivially.
    """

    def __init__(self, instance: Instance, fs: FeasibilitySet, order: list[int]):
        self.n = instance.agent_count
        self.fs = fs
        self.order = order  # position -> good index

    def can_add(self, agent: int, gidx: int) -> bool:
        return True

    def add(self, agent: int, gidx: int):
        pass

    def remove(self, agent: int, gidx: int):
        pass

    def completable(self, pos: int) -> bool:
        return True

    def complete_placeable(self, pos: int) -> bool:
        """Whether all goods from position ``pos`` on can still be assigned."""
        return True

    def leaf_ok(self) -> bool:
        return True


class _FreeState(SearchState):
    pass


class _UniformState(SearchState):
    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        self.r = fs.uniform_rank
        self.counts = [0] * self.n
        m = len(order)
        self.remaining = [m - p for p in range(m + 1)]

    def can_add(self, agent, gidx):
        return self.counts[agent] < self.r

    def add(self, agent, gidx):
        self.counts[agent] += 1

    def remove(self, agent, gidx):
        self.counts[agent] -= 1

    def complete_placeable(self, pos):
        room = sum(self.r - c for c in self.counts)
        return room >= self.remaining[pos]


class _CategoryState(SearchState):
    """Partition / laminar / copies: per-agent per-category counters."""

    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        cats_of = fs.cats_of()
        self.cats_of = [cats_of[g] for g in range(len(fs.goods))]
        self.upper = [cat.upper for cat in fs.categories]
        self.counts = [[0] * len(fs.categories) for _ in range(self.n)]
        # remaining goods per category from each position on (ordered walk)
        m = len(order)
        ncat = len(fs.categories)
        rem = [[0] * ncat for _ in range(m + 1)]
        for p in range(m - 1, -1, -1):
            row = rem[p]
            nxt = rem[p + 1]
            for c in range(ncat):
                row[c] = nxt[c]
            for c in self.cats_of[order[p]]:
                row[c] += 1
        self.cat_remaining = rem

    def can_add(self, agent, gidx):
        counts = self.counts[agent]
        for c in self.cats_of[gidx]:
            if counts[c] >= self.upper[c]:
                return False
        return True

    def add(self, agent, gidx):
        counts = self.counts[agent]
        for c in self.cats_of[gidx]:
            counts[c] += 1

    def remove(self, agent, gidx):
        counts = self.counts[agent]
        for c in self.cats_of[gidx]:
            counts[c] -= 1

    def complete_placeable(self, pos):
        rem = self.cat_remaining[pos]
        for c, cap in enumerate(self.upper):
            if rem[c]:
                room = sum(cap - counts[c] for counts in self.counts)
                if room < rem[c]:
                    return False
        return True


class _GraphicState(SearchState):
    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        self.edges = fs.edges
        self.dsu = [_DisjointSets() for _ in range(self.n)]

    def can_add(self, agent, gidx):
        u, v = self.edges[gidx]
        return u != v and self.dsu[agent].find(u) != self.dsu[agent].find(v)

    def add(self, agent, gidx):
        u, v = self.edges[gidx]
        self.dsu[agent].union(u, v)

    def remove(self, agent, gidx):
        self.dsu[agent].undo()


class _ExtendedState(SearchState):
    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        self.bundles = [set() for _ in range(self.n)]
        self.fs = fs

    def can_add(self, agent, gidx):
        g = self.fs.goods[gidx]
        return is_independent(self.fs, self.bundles[agent] | {g})

    def add(self, agent, gidx):
        self.bundles[agent].add(self.fs.goods[gidx])

    def remove(self, agent, gidx):
        self.bundles[agent].discard(self.fs.goods[gidx])


class _BalancedState(SearchState):
    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        self.lo, self.hi = fs.balanced_bounds()
        self.counts = [0] * self.n
        m = len(order)
        self.remaining = [m - p for p in range(m + 1)]

    def can_add(self, agent, gidx):
        return self.counts[agent] < self.hi

    def add(self, agent, gidx):
        self.counts[agent] += 1

    def remove(self, agent, gidx):
        self.counts[agent] -= 1

    def completable(self, pos):
        needed = sum(self.lo - c for c in self.counts if c < self.lo)
        return needed <= self.remaining[pos]

    def complete_placeable(self, pos):
        room = sum(self.hi - c for c in self.counts)
        return room >= self.remaining[pos]

    def leaf_ok(self):
        return all(c >= self.lo for c in self.counts)


class _PartitionLbState(_CategoryState):
    def __init__(self, instance, fs, order):
        super().__init__(instance, fs, order)
        self.lower = [cat.lower for cat in fs.categories]

    def completable(self, pos):
        rem = self.cat_remaining[pos]
        for c, lo in enumerate(self.lower):
            if lo:
                needed = sum(lo - counts[c] for counts in self.counts if counts[c] < lo)
                if needed > rem[c]:
                    return False
        return True

    def leaf_ok(self):
        for c, lo in enumerate(self.lower):
            if lo and any(counts[c] < lo for counts in self.counts):
                return False
        return True


_STATE_CLASSES = {
    "free": _FreeState,
    "uniform": _UniformState,
    "partition": _CategoryState,
    "laminar": _CategoryState,
    "copies": _CategoryState,
    "graphic": _GraphicState,
    "extended": _ExtendedState,
    "balanced": _BalancedState,
    "partition_lb": _PartitionLbState,
}


def make_search_state(instance: Instance, fs: FeasibilitySet, order: list[int]) -> SearchState:
    if tuple(fs.goods) != tuple(instance.goods):
        raise SchemaViolation("constraint and instance disagree on the good list")
    return _STATE_CLASSES[fs.tag](instance, fs, order)


class EnumerationCounter:
    """Shared node counter guarding every brute-force walk."""

    def __init__(self, cap: int = DEFAULT_ENUM_CAP):
        self.cap = cap
        self.nodes = 0

    def tick(self, k: int = 1):
        self.nodes += k
        if self.nodes > self.cap:
            raise ExplosionGuard(
                f"enumeration exceeded {self.cap} states; raise the cap to override"
            )


def iter_assignments(instance: Instance, fs: FeasibilitySet, complete: bool,
                     cap: int = DEFAULT_ENUM_CAP, counter: EnumerationCounter | None = None):
    """Yield every feasible assignment exactly once as a list good->agent.

    Entry -1 marks an unallocated good (only when ``complete`` is false).
    The yielded list is reused; callers must copy before storing.
    """
    n, m = instance.agent_count, instance.m
    order = list(range(m))
    state = make_search_state(instance, fs, order)
    counter = counter or EnumerationCounter(cap)
    assign = [-1] * m

    def walk(pos: int):
        counter.tick()
        if pos == m:
            if state.leaf_ok():
                yield assign
            return
        if not state.completable(pos):
            return
        if complete and not state.complete_placeable(pos):
            return
        g = order[pos]
        for agent in range(n):
            if state.can_add(agent, g):
                state.add(agent, g)
                assign[g] = agent
                yield from walk(pos + 1)
                state.remove(agent, g)
                assign[g] = -1
        if not complete:
            yield from walk(pos + 1)

    yield from walk(0)


def assignment_to_allocation(instance: Instance, assign) -> Allocation:
    bundles: list[set[str]] = [set() for _ in range(instance.agent_count)]
    for gidx, agent in enumerate(assign):
        if agent >= 0:
            bundles[agent].add(instance.goods[gidx])
    return Allocation(tuple(frozenset(b) for b in bundles))


def enumerate_feasible(instance: Instance, fs: FeasibilitySet, complete: bool = False,
                       cap: int = DEFAULT_ENUM_CAP):
    """Yield every feasible (optionally complete) allocation exactly once."""
    for assign in iter_assignments(instance, fs, complete, cap):
        yield assignment_to_allocation(instance, assign)


# ---- constraint file form --------------------------------------------------------


def constraint_from_dict(data: dict | None, goods, n_agents: int) -> FeasibilitySet:
    goods = tuple(goods)
    if data is None:
        return FeasibilitySet.free(goods)
    if not isinstance(data, dict) or "type" not in data:
        raise SchemaViolation("constraint must be an object with a 'type'")
    kind = data["type"]

    def cats():
        raw = data.get("categories")
        if not isinstance(raw, list):
            raise SchemaViolation(f"constraint {kind!r} needs a category list")
        return [
            (entry["goods"], entry["upper"], entry.get("lower", 0)) for entry in raw
        ]

    if kind == "free":
        return FeasibilitySet.free(goods)
    if kind == "uniform":
        return FeasibilitySet.uniform(goods, int(data["rank"]))
    if kind == "partition":
        return FeasibilitySet.partition(goods, cats())
    if kind == "laminar":
        return FeasibilitySet.laminar(goods, cats())
    if kind == "graphic":
        return FeasibilitySet.graphic(goods, data["edges"])
    if kind == "copies":
        return FeasibilitySet.copies(goods, cats(), n_agents)
    if kind == "balanced":
        return FeasibilitySet.balanced(goods, n_agents)
    if kind == "partition_lb":
        return FeasibilitySet.partition_lb(goods, cats(), n_agents)
    raise SchemaViolation(f"unknown constraint type {kind!r}")


def constraint_to_dict(fs: FeasibilitySet) -> dict:
    idx = fs.good_index()

    def cats(with_lower=False):
        out = []
        for cat in fs.categories:
            entry = {"goods": sorted(cat.goods, key=idx.__getitem__), "upper": cat.upper}
            if with_lower:
                entry["lower"] = cat.lower
            out.append(entry)
        return out

    if fs.tag == "free":
        return {"type": "free"}
    if fs.tag == "uniform":
        return {"type": "uniform", "rank": fs.uniform_rank}
    if fs.tag in ("partition", "laminar", "copies"):
        return {"type": fs.tag, "categories": cats()}
    if fs.tag == "graphic":
        return {"type": "graphic", "edges": [list(e) for e in fs.edges]}
    if fs.tag == "balanced":
        return {"type": "balanced"}
    if fs.tag == "partition_lb":
        return {"type": "partition_lb", "categories": cats(with_lower=True)}
    raise UnsupportedConstraint(f"{fs.tag!r} has no file form")


def validate_copies_values(instance: Instance, fs: FeasibilitySet):
    """Copies categories must hold perfect substitutes for every agent."""
    if fs.tag != "copies":
        raise UnsupportedConstraint("validate_copies_values needs a copies constraint")
    for cat in fs.categories:
        members = sorted(cat.goods)
        for i in range(instance.agent_count):
            vals = {instance.value(i, g) for g in members}
            if len(vals) > 1:
                raise SchemaViolation(
                    f"agent {i} values differ within copies category {members}"
                )


def load_problem(source) -> tuple[Instance, FeasibilitySet]:
    """Parse an instance file together with its constraint sub-object."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source, parse_float=parse_rational)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    instance = instance_from_dict(data)
    fs = constraint_from_dict(data.get("constraint"), instance.goods, instance.agent_count)
    if fs.tag == "copies":
        validate_copies_values(instance, fs)
    return instance, fs
