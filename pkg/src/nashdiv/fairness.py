"""Fairness and efficiency verifiers.

Every checker returns a FairnessReport: a boolean plus a witness that can be
replayed as a single comparison, so a fuzz failure is actionable. Integral
comparisons are exact rationals; fractional checks take a tolerance on
per-agent-normalized valuations (each v_i(M) scaled to 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ExplosionGuard, UnsupportedConstraint
from .feasibility import (
    DEFAULT_ENUM_CAP,
    FeasibilitySet,
    make_search_state,
    max_weight_independent,
)
from .instance import Allocation, Instance, parse_rational
from .lp import solve_lp

DEFAULT_TOLERANCE = Fraction(1, 10**6)


@dataclass(frozen=True)
class FairnessReport:
    name: str
    holds: bool
    witness: dict | None = None
    alpha: Fraction | None = None

    def __post_init__(self):
        assert (self.witness is not None) == (not self.holds)


def _ok(name, alpha=None) -> FairnessReport:
    return FairnessReport(name=name, holds=True, alpha=alpha)


def _fail(name, witness, alpha=None) -> FairnessReport:
    return FairnessReport(name=name, holds=False, witness=witness, alpha=alpha)


# ---- envy checkers ---------------------------------------------------------------


def check_alpha_ef1(instance: Instance, alloc: Allocation, alpha=1) -> FairnessReport:
    """alpha-EF1: after dropping the envier's favourite good from the rival
    bundle, own value covers alpha times the rest."""
    alpha = parse_rational(alpha)
    n = instance.agent_count
    for i in range(n):
        own = instance.bundle_value(i, alloc.bundles[i])
        for j in range(n):
            if i == j or not alloc.bundles[j]:
                continue
            rival = alloc.bundles[j]
            best = max(instance.value(i, g) for g in rival)
            rest = instance.bundle_value(i, rival) - best
            if own < alpha * rest:
                removed = min(
                    (g for g in rival if instance.value(i, g) == best),
                    key=instance.good_index.__getitem__,
                )
                return _fail(
                    "ef1",
                    {
                        "envier": i,
                        "envied": j,
                        "removed": removed,
                        "lhs": own,
                        "rhs": alpha * rest,
                    },
                    alpha=alpha,
                )
    return _ok("ef1", alpha=alpha)


def check_ef1wc(instance: Instance, fs: FeasibilitySet, alloc: Allocation,
                alpha=1) -> FairnessReport:
    """EF1 without commons: the dropped good must come from a copies category
    the envier holds no copy of (uncategorized goods count as singletons)."""
    if fs.tag != "copies":
        raise UnsupportedConstraint("check_ef1wc needs a copies constraint")
    alpha = parse_rational(alpha)
    cat_of = {}
    for k, cat in enumerate(fs.categories):
        for g in cat.goods:
            cat_of[g] = k
    n = instance.agent_count
    for i in range(n):
        own = instance.bundle_value(i, alloc.bundles[i])
        held_cats = {cat_of[g] for g in alloc.bundles[i] if g in cat_of}
        for j in range(n):
            if i == j or not alloc.bundles[j]:
                continue
            rival_value = instance.bundle_value(i, alloc.bundles[j])
            if own >= alpha * rival_value:
                continue
            removable = [
                g
                for g in alloc.bundles[j]
                if cat_of.get(g) is None or cat_of[g] not in held_cats
            ]
            best = max((instance.value(i, g) for g in removable), default=None)
            if best is None or own < alpha * (rival_value - best):
                return _fail(
                    "ef1wc",
                    {
                        "envier": i,
                        "envied": j,
                        "lhs": own,
                        "rhs": alpha * (rival_value - (best or 0)),
                    },
                    alpha=alpha,
                )
    return _ok("ef1wc", alpha=alpha)


def check_sd_ef1(instance: Instance, alloc: Allocation) -> FairnessReport:
    """SD-EF1: some rival good can be dropped so that, at every value
    threshold, the envier holds at least as many weakly-better goods."""
    n = instance.agent_count
    for i in range(n):
        row = instance.valuations[i]
        idx = instance.good_index
        thresholds = sorted({row[k] for k in range(instance.m)})
        own_vals = sorted(row[idx[g]] for g in alloc.bundles[i])

        def count_at_least(sorted_vals, theta):
            lo, hi = 0, len(sorted_vals)
            while lo < hi:
                mid = (lo + hi) // 2
                if sorted_vals[mid] >= theta:
                    hi = mid
                else:
                    lo = mid + 1
            return len(sorted_vals) - lo

        for j in range(n):
            if i == j or not alloc.bundles[j]:
                continue
            rival = sorted(alloc.bundles[j], key=idx.__getitem__)
            found = False
            for dropped in rival:
                rival_vals = sorted(
                    row[idx[g]] for g in rival if g != dropped
                )
                if all(
                    count_at_least(own_vals, t) >= count_at_least(rival_vals, t)
                    for t in thresholds
                ):
                    found = True
                    break
            if not found:
                return _fail("sd_ef1", {"envier": i, "envied": j})
    return _ok("sd_ef1")


# ---- efficiency checkers ----------------------------------------------------------


def find_dominator(instance: Instance, fs: FeasibilitySet, alloc: Allocation,
                   complete: bool, cap: int = DEFAULT_ENUM_CAP) -> Allocation | None:
    """First feasible allocation Pareto-dominating ``alloc``, or None.

    Good-by-good search pruned by per-agent optimism: a prefix dies as soon
    as some agent can no longer reach her target utility.
    """
    n, m = instance.agent_count, instance.m
    scale, V = instance.scaled_values()
    targets = [
        int(instance.bundle_value(i, alloc.bundles[i]) * scale) for i in range(n)
    ]
    order = sorted(range(m), key=lambda g: (-max(V[i][g] for i in range(n)), g))
    suffix = [[0] * (m + 1) for _ in range(n)]
    for i in range(n):
        for p in range(m - 1, -1, -1):
            suffix[i][p] = suffix[i][p + 1] + V[i][order[p]]
    state = make_search_state(instance, fs, order)
    u = [0] * n
    assign = [-1] * m
    nodes = 0

    def dfs(pos: int):
        nonlocal nodes
        nodes += 1
        if nodes > cap:
            raise ExplosionGuard(f"dominator scan exceeded {cap} states")
        if pos == m:
            if (
                state.leaf_ok()
                and all(u[i] >= targets[i] for i in range(n))
                and any(u[i] > targets[i] for i in range(n))
            ):
                return list(assign)
            return None
        if not state.completable(pos) or (complete and not state.complete_placeable(pos)):
            return None
        if any(u[i] + suffix[i][pos] < targets[i] for i in range(n)):
            return None
        g = order[pos]
        for agent in range(n):
            if state.can_add(agent, g):
                state.add(agent, g)
                u[agent] += V[agent][g]
                assign[g] = agent
                hit = dfs(pos + 1)
                assign[g] = -1
                u[agent] -= V[agent][g]
                state.remove(agent, g)
                if hit is not None:
                    return hit
        if not complete:
            return dfs(pos + 1)
        return None

    hit = dfs(0)
    if hit is None:
        return None
    bundles: list[set[str]] = [set() for _ in range(n)]
    for gidx, agent in enumerate(hit):
        if agent >= 0:
            bundles[agent].add(instance.goods[gidx])
    return Allocation(tuple(frozenset(b) for b in bundles))


def check_po(instance: Instance, fs: FeasibilitySet, alloc: Allocation,
             universe: str = "all_feasible", cap: int = DEFAULT_ENUM_CAP) -> FairnessReport:
    """Pareto optimality against the enumerated (complete) feasible set."""
    if universe not in ("all_feasible", "complete_feasible"):
        raise ValueError(f"unknown universe {universe!r}")
    dominator = find_dominator(
        instance, fs, alloc, complete=(universe == "complete_feasible"), cap=cap
    )
    if dominator is None:
        return _ok("po")
    return _fail("po", {"dominator": dominator})


def check_po_plus(instance: Instance, fs: FeasibilitySet, alloc: Allocation,
                  cap: int = DEFAULT_ENUM_CAP) -> FairnessReport:
    """Pareto optimality against every unconstrained allocation of the same
    goods (copies instances already list each copy as its own good, so
    supplies are respected by construction). Incomplete rivals are included,
    though they never dominate when a complete extension exists."""
    free = FeasibilitySet.free(instance.goods)
    dominator = find_dominator(instance, free, alloc, complete=False, cap=cap)
    if dominator is None:
        return _ok("po_plus")
    return _fail("po_plus", {"dominator": dominator})


def check_constrained_mef1(instance: Instance, fs: FeasibilitySet,
                           alloc: Allocation) -> FairnessReport:
    """Marginal EF1 under the best-feasible-bundle map: twice the envier's
    utility covers her best feasible bundle from both bundles minus one good."""
    if not fs.is_matroidal:
        raise UnsupportedConstraint("check_constrained_mef1 needs a matroidal constraint")
    n = instance.agent_count
    for i in range(n):
        own = instance.bundle_value(i, alloc.bundles[i])
        weights = {g: instance.value(i, g) for g in instance.goods}
        for j in range(n):
            if i == j or not alloc.bundles[j]:
                continue
            merged = alloc.bundles[i] | alloc.bundles[j]
            satisfied = False
            for g in sorted(alloc.bundles[j], key=instance.good_index.__getitem__):
                _, best = max_weight_independent(fs, weights, merged - {g})
                if 2 * own >= best:
                    satisfied = True
                    break
            if not satisfied:
                return _fail("mef1", {"envier": i, "envied": j, "lhs": 2 * own})
    return _ok("mef1")


def check_prop1(instance: Instance, alloc: Allocation) -> FairnessReport:
    """Prop1: the proportional share is reachable by adding one missing good."""
    n = instance.agent_count
    for i in range(n):
        own = instance.bundle_value(i, alloc.bundles[i])
        share = instance.bundle_value(i, instance.goods) / n
        if own >= share:
            continue
        outside = [g for g in instance.goods if g not in alloc.bundles[i]]
        best = max((instance.value(i, g) for g in outside), default=Fraction(0))
        if own + best < share:
            return _fail("prop1", {"agent": i, "lhs": own + best, "rhs": share})
    return _ok("prop1")


def check_ef11(instance: Instance, alloc: Allocation) -> FairnessReport:
    """EF-one-more-one-less for goods: adding some missing good to the envier
    and dropping some good from the rival removes the envy."""
    n = instance.agent_count
    all_goods = frozenset(instance.goods)
    for i in range(n):
        own = instance.bundle_value(i, alloc.bundles[i])
        for j in range(n):
            if i == j or not alloc.bundles[j] or alloc.bundles[i] == all_goods:
                continue
            gain = max(
                instance.value(i, g) for g in all_goods - alloc.bundles[i]
            )
            drop = max(instance.value(i, g) for g in alloc.bundles[j])
            rival = instance.bundle_value(i, alloc.bundles[j])
            if own + gain < rival - drop:
                return _fail(
                    "ef11",
                    {"envier": i, "envied": j, "lhs": own + gain, "rhs": rival - drop},
                )
    return _ok("ef11")


def check_ef11_chores(chores: Instance, alloc: Allocation) -> FairnessReport:
    """EF-one-more-one-less for chores. The instance stores cost magnitudes;
    utilities are their negations, so the comparison flips to dropping an own
    chore against the rival bundle plus one outside chore."""
    n = chores.agent_count
    all_chores = frozenset(chores.goods)
    for i in range(n):
        own_cost = chores.bundle_value(i, alloc.bundles[i])
        for j in range(n):
            if i == j or not alloc.bundles[i] or alloc.bundles[j] == all_chores:
                continue
            drop_own = max(chores.value(i, c) for c in alloc.bundles[i])
            add_rival = min(
                chores.value(i, c) for c in all_chores - alloc.bundles[j]
            )
            rival_cost = chores.bundle_value(i, alloc.bundles[j])
            # -(own - drop) >= -(rival + add)
            if own_cost - drop_own > rival_cost + add_rival:
                return _fail(
                    "ef11_chores",
                    {
                        "envier": i,
                        "envied": j,
                        "lhs": -(own_cost - drop_own),
                        "rhs": -(rival_cost + add_rival),
                    },
                )
    return _ok("ef11_chores")


# ---- fractional checkers -----------------------------------------------------------


def _normalized_values(instance: Instance) -> list[list[Fraction]]:
    rows = []
    for i in range(instance.agent_count):
        total = sum(instance.valuations[i], Fraction(0))
        if total == 0:
            rows.append([Fraction(0)] * instance.m)
        else:
            rows.append([v / total for v in instance.valuations[i]])
    return rows


def _as_fraction_matrix(x, n, m):
    return [[Fraction(x[i][g]) for g in range(m)] for i in range(n)]


def check_fractional_ef(instance: Instance, x, tau=DEFAULT_TOLERANCE) -> FairnessReport:
    """Envy-freeness of a fractional allocation within tolerance tau
    (valuations normalized per agent). The witness carries the worst margin
    so a near-tolerance numeric miss is distinguishable from a real gap."""
    tau = parse_rational(tau)
    n, m = instance.agent_count, instance.m
    xs = _as_fraction_matrix(x, n, m)
    w = _normalized_values(instance)
    worst = None
    for i in range(n):
        own = sum(w[i][g] * xs[i][g] for g in range(m))
        for j in range(n):
            if i == j:
                continue
            other = sum(w[i][g] * xs[j][g] for g in range(m))
            margin = other - own
            if worst is None or margin > worst[0]:
                worst = (margin, i, j)
    if worst is None or worst[0] <= tau:
        return _ok("fractional_ef")
    margin, i, j = worst
    return _fail(
        "fractional_ef",
        {"envier": i, "envied": j, "margin": margin, "tolerance": tau},
    )


def check_fractional_po(instance: Instance, x, mode: str = "copies",
                        tau=DEFAULT_TOLERANCE) -> FairnessReport:
    """Fractional Pareto optimality via an exact LP.

    Maximizes the total utility improvement available to a feasible rival
    allocation that is weakly better for everyone; holds iff the optimum is
    at most tau. Feasibility rows are the cell caps, the per-good supplies,
    and (in balanced mode) the per-agent row-sum cap m/n.
    """
    if mode not in ("copies", "copies_balanced"):
        raise ValueError(f"unknown mode {mode!r}")
    tau = parse_rational(tau)
    n, m = instance.agent_count, instance.m
    xs = _as_fraction_matrix(x, n, m)
    w = _normalized_values(instance)

    nvar = n * m + n  # y cells then per-agent improvements
    c = [Fraction(0)] * (n * m) + [Fraction(1)] * n
    A_ub, b_ub = [], []
    for g in range(m):
        row = [Fraction(0)] * nvar
        for i in range(n):
            row[i * m + g] = Fraction(1)
        A_ub.append(row)
        b_ub.append(Fraction(instance.supplies[g]))
    if mode == "copies_balanced":
        for i in range(n):
            row = [Fraction(0)] * nvar
            for g in range(m):
                row[i * m + g] = Fraction(1)
            A_ub.append(row)
            b_ub.append(Fraction(m, n))
    for i in range(n):
        row = [Fraction(0)] * nvar
        for g in range(m):
            row[i * m + g] = -w[i][g]
        row[n * m + i] = Fraction(1)
        A_ub.append(row)
        b_ub.append(-sum(w[i][g] * xs[i][g] for g in range(m)))
    bounds = [(0, 1)] * (n * m) + [(0, None)] * n

    result = solve_lp(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, maximize=True)
    if result.status != "optimal":
        raise RuntimeError(f"fractional PO LP ended {result.status}")
    if result.value <= tau:
        return _ok("fractional_po")
    return _fail(
        "fractional_po",
        {"improvement": result.value, "tolerance": tau},
    )


# ---- witness replay -----------------------------------------------------------------


def replay_witness(instance: Instance, report: FairnessReport, alloc: Allocation,
                   fs: FeasibilitySet | None = None) -> bool:
    """Re-run the single comparison a witness encodes; True iff it still
    demonstrates the violation."""
    if report.holds:
        return False
    w = report.witness
    name = report.name
    if name == "ef1":
        i, j = w["envier"], w["envied"]
        own = instance.bundle_value(i, alloc.bundles[i])
        rest = instance.bundle_value(i, alloc.bundles[j]) - instance.value(i, w["removed"])
        return own < report.alpha * rest
    if name in ("po", "po_plus"):
        dom = w["dominator"]
        ours = [instance.bundle_value(i, alloc.bundles[i]) for i in range(instance.n)]
        theirs = [instance.bundle_value(i, dom.bundles[i]) for i in range(instance.n)]
        return all(t >= o for t, o in zip(theirs, ours)) and theirs != ours
    if name == "ef1wc":
        return not check_ef1wc(instance, fs, alloc, report.alpha).holds
    if name == "sd_ef1":
        return not check_sd_ef1(instance, alloc).holds
    if name == "mef1":
        return not check_constrained_mef1(instance, fs, alloc).holds
    if name == "prop1":
        return w["lhs"] < w["rhs"]
    if name == "ef11":
        return w["lhs"] < w["rhs"]
    if name == "ef11_chores":
        return w["lhs"] < w["rhs"]
    if name in ("fractional_ef", "fractional_po"):
        key = "margin" if name == "fractional_ef" else "improvement"
        return w[key] > w["tolerance"]
    raise ValueError(f"no replay rule for {name!r}")
