"""Small dense simplex over exact rationals.

Two-phase tableau simplex with Bland's rule (deterministic, never cycles).
Problem sizes in this package stay tiny (tens of rows), so clarity wins
over sparse cleverness. All arithmetic is Fraction; results are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: tuple[Fraction, ...] | None = None
    value: Fraction | None = None


def _frac_vec(values):
    return [Fraction(v) for v in values]


def _pivot(rows, objs, basis, r, c):
    inv = _ONE / rows[r][c]
    rows[r] = [v * inv for v in rows[r]]
    prow = rows[r]
    for i, row in enumerate(rows):
        if i != r:
            f = row[c]
            if f:
                rows[i] = [a - f * b for a, b in zip(row, prow)]
    for obj in objs:
        f = obj[c]
        if f:
            obj[:] = [a - f * b for a, b in zip(obj, prow)]
    basis[r] = c


def _run_simplex(rows, obj, extra_obj, basis, allowed):
    """Minimize obj over the tableau; Bland's rule over ``allowed`` columns."""
    while True:
        enter = None
        for j in allowed:
            if obj[j] < 0:
                enter = j
                break
        if enter is None:
            return "optimal"
        leave = None
        best_ratio = None
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if (
                    leave is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave is None:
            return "unbounded"
        objs = [obj] if extra_obj is None else [obj, extra_obj]
        _pivot(rows, objs, basis, leave, enter)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None,
             maximize: bool = False) -> LpResult:
    """Solve min (or max) c.x subject to A_ub x <= b_ub, A_eq x = b_eq,
    and per-variable bounds (lo, hi); lo must be finite, hi may be None."""
    nvar = len(c)
    c = _frac_vec(c)
    if maximize:
        c = [-v for v in c]
    A_ub = [_frac_vec(r) for r in (A_ub or [])]
    b_ub = _frac_vec(b_ub or [])
    A_eq = [_frac_vec(r) for r in (A_eq or [])]
    b_eq = _frac_vec(b_eq or [])
    bounds = list(bounds) if bounds is not None else [(0, None)] * nvar

    # shift lower bounds to zero; finite upper bounds become <= rows
    shift = []
    const = _ZERO
    for j, (lo, hi) in enumerate(bounds):
        lo = Fraction(lo)
        shift.append(lo)
        const += c[j] * lo
        if hi is not None:
            row = [_ZERO] * nvar
            row[j] = _ONE
            A_ub.append(row)
            b_ub.append(Fraction(hi) - lo)
    for rows_, rhs in ((A_ub, b_ub), (A_eq, b_eq)):
        for i, row in enumerate(rows_):
            rhs[i] -= sum(a * s for a, s in zip(row, shift) if a)

    nslack = len(A_ub)
    rows: list[list[Fraction]] = []
    basis: list[int] = []
    art_cols: list[int] = []
    total = nvar + nslack  # artificials appended after

    def make_row(coeffs, slack_idx, rhs):
        row = list(coeffs) + [_ZERO] * nslack + [rhs]
        if slack_idx is not None:
            row[nvar + slack_idx] = _ONE
        return row

    pending = []  # rows needing artificials
    for i, (coeffs, rhs) in enumerate(zip(A_ub, b_ub)):
        row = make_row(coeffs, i, rhs)
        if rhs >= 0:
            rows.append(row)
            basis.append(nvar + i)
        else:
            pending.append([-v for v in row])
    for coeffs, rhs in zip(A_eq, b_eq):
        row = make_row(coeffs, None, rhs)
        if rhs < 0:
            row = [-v for v in row]
        pending.append(row)

    for row in pending:
        art = total + len(art_cols)
        art_cols.append(art)
        rows.append(row)
        basis.append(art)
    ncols = total + len(art_cols)
    for i, row in enumerate(rows):
        rhs = row.pop()
        row.extend([_ZERO] * len(art_cols))
        row.append(rhs)
        if basis[i] >= total:
            row[basis[i]] = _ONE

    # phase-2 objective row (reduced costs), kept in sync during phase 1
    obj2 = c + [_ZERO] * (nslack + len(art_cols)) + [_ZERO]
    for i, b in enumerate(basis):
        f = obj2[b]
        if f:
            obj2 = [a - f * v for a, v in zip(obj2, rows[i])]

    if art_cols:
        obj1 = [_ZERO] * ncols + [_ZERO]
        for a in art_cols:
            obj1[a] = _ONE
        for i, b in enumerate(basis):
            if b >= total:
                obj1 = [x - y for x, y in zip(obj1, rows[i])]
        allowed = list(range(total))
        status = _run_simplex(rows, obj1, obj2, basis, allowed)
        if status != "optimal" or -obj1[-1] != 0:
            return LpResult(status="infeasible")
        # pivot lingering zero-level artificials out of the basis
        for i in range(len(rows)):
            if basis[i] >= total:
                col = next((j for j in range(total) if rows[i][j] != 0), None)
                if col is not None:
                    _pivot(rows, [obj1, obj2], basis, i, col)
        keep = [i for i in range(len(rows)) if basis[i] < total]
        rows[:] = [rows[i] for i in keep]
        basis[:] = [basis[i] for i in keep]

    status = _run_simplex(rows, obj2, None, basis, list(range(total)))
    if status == "unbounded":
        return LpResult(status="unbounded")
    xfull = [_ZERO] * ncols
    for i, b in enumerate(basis):
        xfull[b] = rows[i][-1]
    x = tuple(xfull[j] + shift[j] for j in range(nvar))
    value = -obj2[-1] + const
    if maximize:
        value = -value
    return LpResult(status="optimal", x=x, value=value)
