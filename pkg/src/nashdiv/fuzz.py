"""Seeded random instances, theorem-indexed property checks, and shrinking.

A fuzz run samples instances per constraint family, solves for every MNW
optimum, and applies the requested property checkers to each optimum. A
violation is a finding, not an exception: it is shrunk by greedily removing
goods (then agents) while the violation persists, and reported with a
replayable witness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import fairness
from .errors import EmptyFeasibleSet, ExplosionGuard, NashdivError
from .feasibility import FeasibilitySet
from .instance import Allocation, Instance
from .mnw import solve_mnw

VALUE_GRID = [Fraction(k, 4) for k in range(13)]
POSITIVE_GRID = [Fraction(k, 4) for k in range(1, 13)]

FAMILIES = (
    "free", "uniform", "partition", "laminar", "graphic",
    "copies", "balanced", "partition_lb",
)

DEFAULT_PROPERTIES = {
    "free": ("half-ef1", "po"),
    "uniform": ("half-ef1", "po"),
    "partition": ("half-ef1", "po"),
    "laminar": ("half-ef1", "po"),
    "graphic": ("half-ef1", "po"),
    "copies": ("half-ef1", "ef1wc-half", "mef1", "po"),
    "balanced": ("half-ef1", "po"),
    "partition_lb": ("half-ef1", "po"),
}


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    trials: int = 100
    families: tuple[str, ...] = ("partition",)
    properties: tuple[str, ...] = ()  # empty = family defaults
    n_range: tuple[int, int] = (2, 3)
    m_range: tuple[int, int] = (3, 7)
    positive: bool = False
    complete: bool = False
    cap: int = 2_000_000


@dataclass
class Finding:
    family: str
    trial: int
    property_name: str
    instance: Instance
    fs: FeasibilitySet
    allocation: Allocation
    report: fairness.FairnessReport
    shrunk: bool = False


@dataclass
class FuzzOutcome:
    config: FuzzConfig
    trials_run: int = 0
    skipped: int = 0
    findings: list[Finding] = field(default_factory=list)


def trial_rng(seed: int, trial: int) -> random.Random:
    return random.Random(f"{seed}:{trial}")


def _grid(rng, positive):
    return rng.choice(POSITIVE_GRID if positive else VALUE_GRID)


def _random_partition(rng, items, parts):
    buckets = [[] for _ in range(parts)]
    for x in items:
        buckets[rng.randrange(parts)].append(x)
    return [b for b in buckets if b]


def random_instance(rng: random.Random, family: str, n_range, m_range,
                    positive: bool) -> tuple[Instance, FeasibilitySet]:
    n = rng.randint(*n_range)
    m = rng.randint(*m_range)
    goods = [f"g{j}" for j in range(1, m + 1)]

    def ceil_div(a, b):
        return -(-a // b)

    if family == "copies":
        # categories of identical copies; m counts materialized goods
        goods, cats, cols = [], [], [[] for _ in range(n)]
        left = m
        j = 0
        while left > 0:
            j += 1
            size = rng.randint(1, min(n, left))
            members = [f"g{j}#{k + 1}" for k in range(size)]
            goods.extend(members)
            cats.append((frozenset(members), 1))
            for i in range(n):
                v = _grid(rng, positive)
                cols[i].extend([v] * size)
            left -= size
        inst = Instance(n, tuple(goods), tuple(tuple(c) for c in cols))
        return inst, FeasibilitySet.copies(goods, cats, n)

    values = tuple(
        tuple(_grid(rng, positive) for _ in range(m)) for _ in range(n)
    )
    inst = Instance(n, tuple(goods), values)
    if family == "free":
        return inst, FeasibilitySet.free(goods)
    if family == "uniform":
        return inst, FeasibilitySet.uniform(goods, rng.randint(ceil_div(m, n), m))
    if family == "partition":
        cats = [
            (frozenset(c), rng.randint(ceil_div(len(c), n), len(c)))
            for c in _random_partition(rng, goods, rng.randint(1, 3))
        ]
        return inst, FeasibilitySet.partition(goods, cats)
    if family == "laminar":
        cats = [
            (frozenset(c), rng.randint(ceil_div(len(c), n), len(c)))
            for c in _random_partition(rng, goods, rng.randint(1, 3))
        ]
        cats.append((frozenset(goods), rng.randint(ceil_div(m, n), m)))
        return inst, FeasibilitySet.laminar(goods, cats)
    if family == "graphic":
        vertices = rng.randint(3, 5)
        edges = []
        for _ in range(m):
            u = rng.randrange(vertices)
            v = rng.randrange(vertices)
            while v == u:
                v = rng.randrange(vertices)
            edges.append((f"v{u}", f"v{v}"))
        return inst, FeasibilitySet.graphic(goods, edges)
    if family == "balanced":
        return inst, FeasibilitySet.balanced(goods, n)
    if family == "partition_lb":
        while True:
            cats = []
            for c in _random_partition(rng, goods, rng.randint(1, 2)):
                lo = rng.randint(0, min(1, len(c) // n))
                hi = rng.randint(ceil_div(len(c), n), len(c))
                cats.append((frozenset(c), hi, lo))
            fs = FeasibilitySet.partition_lb(goods, cats, n)
            from .feasibility import count_lower_bound_worlds

            if count_lower_bound_worlds(fs) <= 2000:
                return inst, fs
    raise ValueError(f"unknown family {family!r}")


# ---- property registry ---------------------------------------------------------


def _per_maximizer(check):
    def run(instance, fs, result):
        out = []
        for alloc in result.maximizers:
            report = check(instance, fs, alloc)
            if not report.holds:
                out.append((alloc, report))
        return out

    return run


PROPERTY_CHECKS = {
    "half-ef1": _per_maximizer(
        lambda inst, fs, a: fairness.check_alpha_ef1(inst, a, Fraction(1, 2))
    ),
    "ef1-exact": _per_maximizer(
        lambda inst, fs, a: fairness.check_alpha_ef1(inst, a, 1)
    ),
    "po": _per_maximizer(
        lambda inst, fs, a: fairness.check_po(inst, fs, a, "all_feasible")
    ),
    "complete-po": _per_maximizer(
        lambda inst, fs, a: fairness.check_po(inst, fs, a, "complete_feasible")
    ),
    "ef1wc-half": _per_maximizer(
        lambda inst, fs, a: fairness.check_ef1wc(inst, fs, a, Fraction(1, 2))
    ),
    "mef1": _per_maximizer(
        lambda inst, fs, a: fairness.check_constrained_mef1(inst, fs, a)
    ),
    "sd-ef1": _per_maximizer(lambda inst, fs, a: fairness.check_sd_ef1(inst, a)),
    "prop1": _per_maximizer(lambda inst, fs, a: fairness.check_prop1(inst, a)),
}


def _applicable(prop: str, fs: FeasibilitySet) -> bool:
    if prop in ("ef1wc-half",):
        return fs.tag == "copies"
    if prop in ("mef1",):
        return fs.is_matroidal
    return True


def run_trial(config: FuzzConfig, family: str, trial: int):
    rng = trial_rng(config.seed, trial)
    instance, fs = random_instance(
        rng, family, config.n_range, config.m_range, config.positive
    )
    props = config.properties or DEFAULT_PROPERTIES[family]
    try:
        result = solve_mnw(
            instance, fs, complete=config.complete, mode="all_optima", cap=config.cap
        )
    except EmptyFeasibleSet:
        return instance, fs, None, []
    findings = []
    for prop in props:
        if not _applicable(prop, fs):
            continue
        for alloc, report in PROPERTY_CHECKS[prop](instance, fs, result):
            findings.append(
                Finding(
                    family=family,
                    trial=trial,
                    property_name=prop,
                    instance=instance,
                    fs=fs,
                    allocation=alloc,
                    report=report,
                )
            )
    return instance, fs, result, findings


def fuzz(config: FuzzConfig) -> FuzzOutcome:
    outcome = FuzzOutcome(config=config)
    for family in config.families:
        for trial in range(config.trials):
            try:
                _inst, _fs, result, findings = run_trial(config, family, trial)
            except (ExplosionGuard, NashdivError):
                outcome.skipped += 1
                continue
            outcome.trials_run += 1
            if result is None:
                outcome.skipped += 1
            for finding in findings:
                outcome.findings.append(shrink_finding(finding, config))
    return outcome


# ---- shrinking --------------------------------------------------------------------


def _drop_good(instance: Instance, fs: FeasibilitySet, good: str):
    keep = [g for g in instance.goods if g != good]
    gidx = instance.good_index[good]
    inst2 = Instance(
        instance.agent_count,
        tuple(keep),
        tuple(tuple(v for k, v in enumerate(row) if k != gidx)
              for row in instance.valuations),
    )
    tag = fs.tag
    if tag == "free":
        return inst2, FeasibilitySet.free(keep)
    if tag == "uniform":
        return inst2, FeasibilitySet.uniform(keep, min(fs.uniform_rank, len(keep)))
    if tag in ("partition", "laminar", "copies"):
        cats = []
        for cat in fs.categories:
            members = cat.goods - {good}
            if members:
                cats.append((members, cat.upper, cat.lower))
        maker = {
            "partition": FeasibilitySet.partition,
            "laminar": FeasibilitySet.laminar,
        }.get(tag)
        if maker is not None:
            return inst2, maker(keep, cats)
        return inst2, FeasibilitySet.copies(keep, [(m, u) for m, u, _ in cats],
                                            instance.agent_count)
    if tag == "graphic":
        edges = [e for k, e in enumerate(fs.edges) if k != gidx]
        return inst2, FeasibilitySet.graphic(keep, edges)
    if tag == "balanced":
        return inst2, FeasibilitySet.balanced(keep, fs.n_agents)
    if tag == "partition_lb":
        cats = []
        n = fs.n_agents
        for cat in fs.categories:
            members = cat.goods - {good}
            if not members:
                continue
            lo = min(cat.lower, len(members) // n)
            hi = max(cat.upper, -(-len(members) // n))
            cats.append((members, hi, lo))
        return inst2, FeasibilitySet.partition_lb(keep, cats, n)
    raise ValueError(tag)


def _still_violates(instance, fs, prop: str, config: FuzzConfig) -> bool:
    try:
        result = solve_mnw(instance, fs, complete=config.complete,
                           mode="all_optima", cap=config.cap)
    except NashdivError:
        return False
    if not _applicable(prop, fs):
        return False
    return bool(PROPERTY_CHECKS[prop](instance, fs, result))


def shrink_finding(finding: Finding, config: FuzzConfig) -> Finding:
    """Greedy good removal preserving the violation, to a local minimum."""
    instance, fs = finding.instance, finding.fs
    changed = True
    while changed and instance.m > 1:
        changed = False
        for good in list(instance.goods):
            try:
                inst2, fs2 = _drop_good(instance, fs, good)
            except NashdivError:
                continue
            if _still_violates(inst2, fs2, finding.property_name, config):
                instance, fs = inst2, fs2
                changed = True
                break
    if (instance, fs) == (finding.instance, finding.fs):
        return finding
    result = solve_mnw(instance, fs, complete=config.complete, cap=config.cap)
    alloc, report = PROPERTY_CHECKS[finding.property_name](instance, fs, result)[0]
    return Finding(
        family=finding.family,
        trial=finding.trial,
        property_name=finding.property_name,
        instance=instance,
        fs=fs,
        allocation=alloc,
        report=report,
        shrunk=True,
    )
