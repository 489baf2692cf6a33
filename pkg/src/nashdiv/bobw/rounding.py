"""Bihierarchy lottery decomposition and the CE lottery pipeline.

A bihierarchy is two laminar families of cell sets with integer quota
intervals. Any fractional allocation satisfying the quotas decomposes into
a convex combination of integral allocations that each satisfy every quota;
the decomposition here peels one integral vertex at a time: an integral
point of the current face (all quota intervals tightened to the floor and
ceiling of the current sums, integral cells frozen) is found by a small
exact backtracking search, then the largest step toward it is removed from
the fractional remainder. Each step pins at least one new constraint, so
the support size never exceeds the fractional cell count plus one, and all
arithmetic is rational so the recovered marginals are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor

from ..errors import ConstraintViolation, NonBihierarchy
from ..instance import Allocation, Instance
from .markets import (
    CEEICertificate,
    FractionalAllocation,
    compute_ceei,
)

Cell = tuple[int, int]  # (agent, good index)


@dataclass(frozen=True)
class QuotaConstraint:
    cells: frozenset[Cell]
    lower: int
    upper: int

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise ConstraintViolation("quota interval must satisfy 0 <= lower <= upper")


def _is_laminar(sets) -> bool:
    sets = [frozenset(s) for s in sets]
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            inter = sets[a] & sets[b]
            if inter and inter != sets[a] and inter != sets[b]:
                return False
    return True


@dataclass(frozen=True)
class Bihierarchy:
    h1: tuple[QuotaConstraint, ...]
    h2: tuple[QuotaConstraint, ...]

    def validate(self):
        if not _is_laminar([c.cells for c in self.h1]):
            raise NonBihierarchy("first family is not laminar")
        if not _is_laminar([c.cells for c in self.h2]):
            raise NonBihierarchy("second family is not laminar")
        if {c.cells for c in self.h1} & {c.cells for c in self.h2}:
            raise NonBihierarchy("the two families share a constraint set")

    def all_constraints(self) -> tuple[QuotaConstraint, ...]:
        return self.h1 + self.h2

    def add_constraint(self, cells, lower: int, upper: int) -> "Bihierarchy":
        """Insert an extra quota if it nests into one of the two families.

        Requests that fit neither family (e.g. per-agent category quotas on
        top of prefix rows and good columns) raise NonBihierarchy: that
        would be a third hierarchy, which the decomposition cannot honor.
        """
        new = QuotaConstraint(frozenset(cells), lower, upper)
        if _is_laminar([c.cells for c in self.h1] + [new.cells]):
            return Bihierarchy(h1=self.h1 + (new,), h2=self.h2)
        if _is_laminar([c.cells for c in self.h2] + [new.cells]):
            return Bihierarchy(h1=self.h1, h2=self.h2 + (new,))
        raise NonBihierarchy(
            "constraint nests into neither hierarchy (tri-hierarchy request)"
        )


@dataclass(frozen=True)
class Lottery:
    """Convex combination of integral allocations with exact weights."""

    goods: tuple[str, ...]
    entries: tuple[tuple[Fraction, Allocation], ...]

    def __post_init__(self):
        total = sum((w for w, _ in self.entries), Fraction(0))
        if total != 1:
            raise ConstraintViolation(f"lottery weights sum to {total}, not 1")

    @property
    def support(self) -> tuple[Allocation, ...]:
        return tuple(alloc for _, alloc in self.entries)

    def marginal(self, agent: int, good: str) -> Fraction:
        return sum(
            (w for w, alloc in self.entries if good in alloc.bundles[agent]),
            Fraction(0),
        )

    def marginal_matrix(self, n: int) -> list[list[Fraction]]:
        return [[self.marginal(i, g) for g in self.goods] for i in range(n)]


def preference_order(instance: Instance, agent: int) -> list[int]:
    """Goods by descending value for the agent, ties by good index."""
    row = instance.valuations[agent]
    return sorted(range(instance.m), key=lambda g: (-row[g], g))


def build_bihierarchy(instance: Instance, x: FractionalAllocation,
                      mode: str = "copies") -> Bihierarchy:
    """Quota structure of the CE lottery rounding.

    First family: per-agent prefixes of her value order; the number of goods
    an integral allocation hands her from her top t must stay within the
    floor/ceiling of the fractional mass there. Second family: per-good
    columns capped by supply, plus cell caps (cells already covered by a
    length-1 prefix are skipped so the families stay disjoint).
    """
    n, m = instance.agent_count, instance.m
    h1 = []
    for i in range(n):
        sigma = preference_order(instance, i)
        running = Fraction(0)
        cells: list[Cell] = []
        for t in range(m):
            g = sigma[t]
            running += x.matrix[i][g]
            cells.append((i, g))
            h1.append(
                QuotaConstraint(frozenset(cells), floor(running), ceil(running))
            )
    h1_sets = {c.cells for c in h1}
    h2 = []
    for g in range(m):
        h2.append(
            QuotaConstraint(
                frozenset((i, g) for i in range(n)), 0, instance.supplies[g]
            )
        )
    h2_sets = {c.cells for c in h2}
    for i in range(n):
        for g in range(m):
            single = frozenset([(i, g)])
            # a length-1 prefix (or, with one agent, the column itself) already
            # caps this cell; adding the same set twice would break disjointness
            if single in h1_sets or single in h2_sets:
                continue
            h2.append(QuotaConstraint(single, 0, 1))
    bih = Bihierarchy(h1=tuple(h1), h2=tuple(h2))
    bih.validate()
    return bih


def _find_integral_point(n, m, values, constraints):
    """Integral matrix matching integral cells of ``values`` and keeping
    every constraint sum within floor/ceiling of its current value.

    Backtracking over fractional cells, branching toward the nearer bound
    first; existence is guaranteed (the quota matrix is an interval matrix
    union a laminar family, hence totally unimodular)."""
    frac_cells = [
        (i, g) for i in range(n) for g in range(m)
        if 0 < values[i][g] < 1
    ]
    touched: dict[Cell, list[int]] = {c: [] for c in frac_cells}
    state = []
    for k, cons in enumerate(constraints):
        total = sum((values[i][g] for (i, g) in cons.cells), Fraction(0))
        lo, hi = max(cons.lower, floor(total)), min(cons.upper, ceil(total))
        fixed = sum(
            int(values[i][g]) for (i, g) in cons.cells if (i, g) not in touched
        )
        free = [c for c in cons.cells if c in touched]
        for cell in free:
            touched[cell].append(k)
        state.append([fixed, len(free), lo, hi])  # assigned sum, unassigned, bounds

    assignment: dict[Cell, int] = {}

    def feasible(k) -> bool:
        assigned, left, lo, hi = state[k]
        return assigned <= hi and assigned + left >= lo

    def place(cell, bit) -> bool:
        assignment[cell] = bit
        for k in touched[cell]:
            state[k][0] += bit
            state[k][1] -= 1
        return all(feasible(k) for k in touched[cell])

    def unplace(cell):
        bit = assignment.pop(cell)
        for k in touched[cell]:
            state[k][0] -= bit
            state[k][1] += 1

    def walk(pos) -> bool:
        if pos == len(frac_cells):
            return True
        cell = frac_cells[pos]
        i, g = cell
        first = 1 if values[i][g] >= Fraction(1, 2) else 0
        for bit in (first, 1 - first):
            failed_mid = not place(cell, bit)
            if not failed_mid and walk(pos + 1):
                return True
            unplace(cell)
        return False

    if not walk(0):
        raise RuntimeError("no integral point found; quota structure is not TU")
    out = [[int(values[i][g]) for g in range(m)] for i in range(n)]
    for (i, g), bit in assignment.items():
        out[i][g] = bit
    return out


def _check_satisfies(values, constraints):
    for cons in constraints:
        total = sum((values[i][g] for (i, g) in cons.cells), Fraction(0))
        if not cons.lower <= total <= cons.upper:
            raise ConstraintViolation(
                f"fractional allocation violates quota [{cons.lower}, {cons.upper}] "
                f"with sum {total}"
            )


def bihierarchy_decompose(x: FractionalAllocation, bih: Bihierarchy) -> Lottery:
    """Exact lottery over integral allocations reproducing ``x`` cell-by-cell."""
    bih.validate()
    n, m = x.n, x.m
    constraints = bih.all_constraints()
    values = [list(row) for row in x.matrix]
    for row in values:
        for v in row:
            if not 0 <= v <= 1:
                raise ConstraintViolation(f"cell value {v} outside [0, 1]")
    _check_satisfies(values, constraints)

    remaining = Fraction(1)
    raw_entries: list[tuple[Fraction, list[list[int]]]] = []
    while True:
        fractional = [
            (i, g) for i in range(n) for g in range(m) if 0 < values[i][g] < 1
        ]
        if not fractional:
            raw_entries.append((remaining, [[int(v) for v in row] for row in values]))
            break
        target = _find_integral_point(n, m, values, constraints)
        lam = Fraction(1)
        for i, g in fractional:
            lam = min(lam, values[i][g] if target[i][g] else 1 - values[i][g])
        for cons in constraints:
            s_x = sum((values[i][g] for (i, g) in cons.cells), Fraction(0))
            s_a = sum(target[i][g] for (i, g) in cons.cells)
            if s_a > s_x and s_a > cons.lower:
                lam = min(lam, (s_x - cons.lower) / (s_a - cons.lower))
            elif s_a < s_x and s_a < cons.upper:
                lam = min(lam, (cons.upper - s_x) / (cons.upper - s_a))
        assert 0 < lam < 1
        raw_entries.append((remaining * lam, target))
        scale = 1 - lam
        for i in range(n):
            for g in range(m):
                values[i][g] = (values[i][g] - lam * target[i][g]) / scale
        remaining *= scale

    merged: dict[tuple, Fraction] = {}
    order: list[tuple] = []
    allocs: dict[tuple, Allocation] = {}
    for weight, matrix in raw_entries:
        bundles = tuple(
            frozenset(x.goods[g] for g in range(m) if matrix[i][g]) for i in range(n)
        )
        alloc = Allocation(bundles)
        key = alloc.canonical()
        if key not in merged:
            merged[key] = Fraction(0)
            order.append(key)
            allocs[key] = alloc
        merged[key] += weight
    return Lottery(
        goods=x.goods,
        entries=tuple((merged[k], allocs[k]) for k in order),
    )


def rationalize_allocation(x: FractionalAllocation,
                           max_denominator: int = 10**4) -> FractionalAllocation:
    """Round a numerically-sourced fractional allocation to small rationals
    and repair cell and column feasibility. Allocations that already carry
    exact rationals pass through unchanged (the decomposition only needs
    exactness, not small denominators)."""
    if all(v.denominator <= max_denominator for row in x.matrix for v in row):
        return x
    rows = [
        [min(max(v.limit_denominator(max_denominator), Fraction(0)), Fraction(1))
         for v in row]
        for row in x.matrix
    ]
    n, m = len(rows), len(x.goods)
    for g in range(m):
        col = sum(rows[i][g] for i in range(n))
        overshoot = col - x.supplies[g]
        if overshoot > 0:
            big = max(range(n), key=lambda i: rows[i][g])
            rows[big][g] -= overshoot
    return FractionalAllocation.from_rows(x.goods, rows, x.supplies)


@dataclass(frozen=True)
class CeLotteryResult:
    lottery: Lottery
    certificate: CEEICertificate
    rounded_x: FractionalAllocation


def ce_lottery_with_certificate(instance: Instance, mode: str = "copies",
                                tau=None, max_iterations: int = 100_000) -> CeLotteryResult:
    """Full pipeline: equilibrium, quota structure, lottery decomposition."""
    kwargs = {} if tau is None else {"tau": tau}
    cert = compute_ceei(instance, mode=mode, max_iterations=max_iterations, **kwargs)
    rounded = rationalize_allocation(cert.x)
    bih = build_bihierarchy(instance, rounded, mode=mode)
    lottery = bihierarchy_decompose(rounded, bih)
    return CeLotteryResult(lottery=lottery, certificate=cert, rounded_x=rounded)


def ce_lottery(instance: Instance, mode: str = "copies", **kwargs) -> Lottery:
    return ce_lottery_with_certificate(instance, mode=mode, **kwargs).lottery
