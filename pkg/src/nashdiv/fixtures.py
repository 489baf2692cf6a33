"""Canonical benchmark instances shipped with the package.

Each builder returns (Instance, constraint_dict); the constraint dict is
the file form consumed by the feasibility loader, so fixture files are
hash-stable across runs.
"""

from __future__ import annotations

from fractions import Fraction

from .feasibility import FeasibilitySet, constraint_from_dict
from .instance import Instance, save_instance


def _instance(agents, goods, rows, supplies=()) -> Instance:
    return Instance(
        agent_count=agents,
        goods=tuple(goods),
        valuations=tuple(tuple(Fraction(v) for v in row) for row in rows),
        supplies=tuple(supplies),
    )


def example1() -> tuple[Instance, dict]:
    """Two agents, eight goods, nested categories; the unique MNW allocation
    leaves one good unassigned and dominates every complete allocation."""
    goods = [f"g{k}" for k in range(1, 9)]
    inst = _instance(
        2,
        goods,
        [
            [0, 1, 0, 0, 1, 1, 1, 0],
            [0, 0, 1, 1, 0, 0, 0, 1],
        ],
    )
    constraint = {
        "type": "laminar",
        "categories": [
            {"goods": ["g1", "g2", "g3", "g4"], "upper": 2},
            {"goods": goods, "upper": 4},
        ],
    }
    return inst, constraint


def tightness(k: int, balanced: bool = False) -> tuple[Instance, dict]:
    """Two agents, k unit goods plus k half-value goods, bundles capped at k.

    The unique MNW allocation splits the groups and is exactly
    k/(2(k-1))-EF1; with ``balanced`` the cap becomes an exact-size rule.
    """
    goods = [f"s{j}" for j in range(1, k + 1)] + [f"t{j}" for j in range(1, k + 1)]
    inst = _instance(
        2,
        goods,
        [
            [1] * k + [0] * k,
            [1] * k + [Fraction(1, 2)] * k,
        ],
    )
    if balanced:
        return inst, {"type": "balanced"}
    return inst, {"type": "partition", "categories": [{"goods": goods, "upper": k}]}


def sdef1_impossible() -> tuple[Instance, dict]:
    """Two agents, four pairs with per-pair cap 1; no complete feasible
    allocation is SD-EF1."""
    goods = [f"g{j}" for j in range(1, 9)]
    inst = _instance(
        2,
        goods,
        [
            [8, 4, 7, 5, 6, 1, 3, 2],
            [6, 2, 8, 5, 7, 3, 4, 1],
        ],
    )
    constraint = {
        "type": "partition",
        "categories": [
            {"goods": ["g1", "g2"], "upper": 1},
            {"goods": ["g3", "g4"], "upper": 1},
            {"goods": ["g5", "g6"], "upper": 1},
            {"goods": ["g7", "g8"], "upper": 1},
        ],
    }
    return inst, constraint


def poplus_copies() -> tuple[Instance, dict]:
    """Three agents, three goods with two copies each, epsilon = 1/4; no
    feasible allocation survives dominance by unconstrained allocations."""
    eps = Fraction(1, 4)
    goods, cats, rows = [], [], [[], [], []]
    for j in range(1, 4):
        members = [f"g{j}#1", f"g{j}#2"]
        goods.extend(members)
        cats.append({"goods": members, "upper": 1})
        for i in range(3):
            value = 1 if i == j - 1 else eps
            rows[i].extend([value, value])
    inst = _instance(3, goods, rows)
    return inst, {"type": "copies", "categories": cats}


def poplus_balanced_k2() -> tuple[Instance, dict]:
    """Two agents, six unit goods plus six high goods valued (3, 2); no
    balanced allocation is both exactly EF1 and unconstrained-PO."""
    goods = [f"l{j}" for j in range(1, 7)] + [f"h{j}" for j in range(1, 7)]
    inst = _instance(
        2,
        goods,
        [
            [1] * 6 + [3] * 6,
            [1] * 6 + [2] * 6,
        ],
    )
    return inst, {"type": "balanced"}


def copies_tight(k: int) -> tuple[Instance, dict]:
    """Two agents; k doubled goods valued (1/(2k), 1) plus k single goods
    valued (1, 1). The unique MNW allocation is only k/(2k-1)-EF1."""
    delta = Fraction(1, 2 * k)
    goods, cats, rows = [], [], [[], []]
    for j in range(1, k + 1):
        members = [f"s{j}#1", f"s{j}#2"]
        goods.extend(members)
        cats.append({"goods": members, "upper": 1})
        rows[0].extend([delta, delta])
        rows[1].extend([1, 1])
    for j in range(1, k + 1):
        goods.append(f"t{j}")
        cats.append({"goods": [f"t{j}"], "upper": 1})
        rows[0].append(1)
        rows[1].append(1)
    inst = _instance(2, goods, rows)
    return inst, {"type": "copies", "categories": cats}


def chores_gap_chores_instance() -> Instance:
    """The three-chore instance whose copies-side MNW gives the chores side
    zero EF1 approximation (costs stored as magnitudes)."""
    return _instance(
        3,
        ["g1", "g2", "g3"],
        [
            [1, Fraction(1, 100), Fraction(1, 100)],
            [1, 1, 1],
            [1, 1, 1],
        ],
    )


def chores_ef1_gap() -> tuple[Instance, dict]:
    """Copies form of the chores gap example: three goods, two copies each."""
    goods, cats, rows = [], [], [[], [], []]
    chores = chores_gap_chores_instance()
    for j, chore in enumerate(chores.goods):
        members = [f"{chore}#1", f"{chore}#2"]
        goods.extend(members)
        cats.append({"goods": members, "upper": 1})
        for i in range(3):
            rows[i].extend([chores.valuations[i][j]] * 2)
    inst = _instance(3, goods, rows)
    return inst, {"type": "copies", "categories": cats}


def roundrobin_po() -> tuple[Instance, dict]:
    """Two agents sharing a strict good order; every round-robin allocation
    is dominated by ({g1,g2,g7,g8}, {g3,g4,g5,g6})."""
    goods = [f"g{j}" for j in range(1, 9)]
    inst = _instance(
        2,
        goods,
        [
            [10, 9, 5, 4, 3, 2, 1, 0],
            [10, 9, 8, 7, 6, 5, 1, 0],
        ],
    )
    return inst, {"type": "free"}


_BUILDERS = {
    "example1": example1,
    "sdef1-impossible": sdef1_impossible,
    "poplus-copies": poplus_copies,
    "poplus-balanced-k2": poplus_balanced_k2,
    "chores-ef1-gap": chores_ef1_gap,
    "roundrobin-po": roundrobin_po,
}
for _k in range(2, 7):
    _BUILDERS[f"tightness-k{_k}"] = (lambda k: (lambda: tightness(k)))(_k)
    _BUILDERS[f"copies-tight-k{_k}"] = (lambda k: (lambda: copies_tight(k)))(_k)


def fixture_names() -> list[str]:
    return sorted(_BUILDERS)


def build_fixture(name: str) -> tuple[Instance, FeasibilitySet, dict]:
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture {name!r}")
    inst, constraint = _BUILDERS[name]()
    fs = constraint_from_dict(constraint, inst.goods, inst.agent_count)
    return inst, fs, constraint


def fixture_file(name: str) -> str:
    inst, _fs, constraint = build_fixture(name)
    return save_instance(inst, constraint)
