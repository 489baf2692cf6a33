"""Constrained CEEI computation and certification.

A certificate is never trusted: whatever path produced it, ``verify_ceei``
re-derives every equilibrium condition with exact rational LPs and reports
residuals. Valuations are normalized per agent (v_i(M) = 1) before any
market computation; prices live in those normalized units.

Goods-with-copies mode pipeline:
  1. goods with supply >= n are nonscarce: everyone takes a full copy at
     price zero, and they drop out of the market (demand for the remaining
     goods is unaffected because utilities are additive);
  2. an Eisenberg-Gale program over the scarce goods (projected gradient
     ascent) pins the equilibrium utilities;
  3. prices follow from the bang-per-buck structure (p_g is the largest
     value-to-utility ratio over agents), a small LP re-solves the cell
     allocation consistently with budgets and clearing, and an exact
     rational feasibility solve turns the cell regime (full / partial /
     zero) into an exact equilibrium;
  4. if any step degenerates, a mixed-integer search over cell regimes
     (HiGHS) retries from scratch.

Copies-plus-balancedness mode runs price adjustment: at candidate prices
each agent's best-then-cheapest budget-1 bundle comes from two small LPs, a
selection LP picks the clearing-friendliest point of each demand face, and
prices move with excess demand until the clearing residual is tiny.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from ..errors import ConvergenceFailure, NotStrictlyPositive, SchemaViolation
from ..instance import Instance
from ..lp import solve_lp

DEFAULT_TAU = Fraction(1, 10**6)
MODES = ("copies", "copies_balanced")


@dataclass(frozen=True)
class FractionalAllocation:
    """Cell matrix x[i][g] in [0,1] with per-good supplies."""

    goods: tuple[str, ...]
    matrix: tuple[tuple[Fraction, ...], ...]
    supplies: tuple[int, ...]

    @staticmethod
    def from_rows(goods, rows, supplies) -> "FractionalAllocation":
        return FractionalAllocation(
            goods=tuple(goods),
            matrix=tuple(tuple(Fraction(v) for v in row) for row in rows),
            supplies=tuple(supplies),
        )

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def m(self) -> int:
        return len(self.goods)

    def column_sum(self, g: int) -> Fraction:
        return sum((row[g] for row in self.matrix), Fraction(0))

    def feasibility_violation(self) -> Fraction:
        worst = Fraction(0)
        for row in self.matrix:
            for v in row:
                worst = max(worst, -v, v - 1)
        for g in range(self.m):
            worst = max(worst, self.column_sum(g) - self.supplies[g])
        return max(worst, Fraction(0))


@dataclass(frozen=True)
class PriceVector:
    values: tuple[Fraction, ...]

    @staticmethod
    def of(values) -> "PriceVector":
        return PriceVector(tuple(Fraction(v) for v in values))


@dataclass(frozen=True)
class CEEIResiduals:
    feasibility: Fraction
    best_bundle_gap: Fraction
    cheapest_gap: Fraction
    clearing_gap: Fraction

    def worst(self) -> Fraction:
        return max(
            self.feasibility, self.best_bundle_gap, self.cheapest_gap, self.clearing_gap
        )

    def as_floats(self) -> dict:
        return {
            "feasibility": float(self.feasibility),
            "best_bundle_gap": float(self.best_bundle_gap),
            "cheapest_gap": float(self.cheapest_gap),
            "clearing_gap": float(self.clearing_gap),
        }


@dataclass(frozen=True)
class CEEICertificate:
    x: FractionalAllocation
    p: PriceVector
    residuals: CEEIResiduals
    mode: str

    def verified(self, tau=DEFAULT_TAU) -> bool:
        return self.residuals.worst() <= Fraction(tau)


def normalized_values(instance: Instance) -> list[list[Fraction]]:
    """Per-agent valuations scaled so each v_i(M) = 1; requires positivity."""
    rows = []
    for i in range(instance.agent_count):
        if any(v <= 0 for v in instance.valuations[i]):
            raise NotStrictlyPositive(
                f"agent {i} has a non-positive valuation; CEEI needs v_i(g) > 0"
            )
        total = sum(instance.valuations[i], Fraction(0))
        rows.append([v / total for v in instance.valuations[i]])
    return rows


def _check_supplies(instance: Instance):
    n = instance.agent_count
    for g, q in enumerate(instance.supplies):
        if not 1 <= q <= n:
            raise SchemaViolation(
                f"supply of {instance.goods[g]!r} must lie in [1, {n}], got {q}"
            )


# ---- verification -----------------------------------------------------------------


def _demand_lps(w_row, prices, supplies_m, balance_cap, x_row):
    """Exact best-bundle and cheapest-bundle LPs for one agent.

    Returns (u_star, cost_min_at_own_utility).
    """
    m = len(w_row)
    bounds = [(0, 1)] * m
    A_ub = [list(prices)]
    b_ub = [Fraction(1)]
    if balance_cap is not None:
        A_ub.append([Fraction(1)] * m)
        b_ub.append(balance_cap)
    best = solve_lp([-w for w in w_row], A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    if best.status != "optimal":
        raise RuntimeError(f"demand LP ended {best.status}")
    u_star = -best.value

    own_u = sum(w * x for w, x in zip(w_row, x_row))
    A_ub2 = [[-w for w in w_row]]
    b_ub2 = [-own_u]
    if balance_cap is not None:
        A_ub2.append([Fraction(1)] * m)
        b_ub2.append(balance_cap)
    cheap = solve_lp(list(prices), A_ub=A_ub2, b_ub=b_ub2, bounds=bounds)
    cost_min = cheap.value if cheap.status == "optimal" else None
    return u_star, cost_min


def verify_ceei(instance: Instance, mode: str, x, p) -> CEEIResiduals:
    """Exact residuals of the equilibrium conditions for (x, p).

    feasibility: cell bounds, supplies, and (balanced mode) row caps;
    best_bundle_gap: shortfall against the budget-1 utility optimum, plus
    any budget overrun by the held bundle; cheapest_gap: overpayment against
    the cheapest bundle reaching the held utility; clearing_gap: summed
    min(p_g, q_g - column) slack.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    w = normalized_values(instance)
    n, m = instance.agent_count, instance.m
    if not isinstance(x, FractionalAllocation):
        x = FractionalAllocation.from_rows(instance.goods, x, instance.supplies)
    prices = p.values if isinstance(p, PriceVector) else tuple(Fraction(v) for v in p)

    feas = x.feasibility_violation()
    balance_cap = Fraction(m, n) if mode == "copies_balanced" else None
    if balance_cap is not None:
        for row in x.matrix:
            feas = max(feas, sum(row, Fraction(0)) - balance_cap)

    best_gap = Fraction(0)
    cheap_gap = Fraction(0)
    for i in range(n):
        u_star, cost_min = _demand_lps(w[i], prices, instance.supplies, balance_cap, x.matrix[i])
        own_u = sum(a * b for a, b in zip(w[i], x.matrix[i]))
        spend = sum(a * b for a, b in zip(prices, x.matrix[i]))
        best_gap = max(best_gap, u_star - own_u, spend - 1)
        if cost_min is not None:
            cheap_gap = max(cheap_gap, spend - cost_min)

    clearing = Fraction(0)
    for g in range(m):
        slack = Fraction(instance.supplies[g]) - x.column_sum(g)
        clearing += min(max(prices[g], Fraction(0)), max(slack, Fraction(0)))

    return CEEIResiduals(
        feasibility=max(feas, Fraction(0)),
        best_bundle_gap=max(best_gap, Fraction(0)),
        cheapest_gap=max(cheap_gap, Fraction(0)),
        clearing_gap=clearing,
    )


def bang_per_buck_violation(instance: Instance, x, p) -> Fraction:
    """Worst violation of the bang-per-buck ordering on a certificate:
    per agent, fully-held goods >= the common partially-held ratio >=
    unallocated goods (ratios measured as v_i(g)/p_g, infinite at p=0)."""
    w = normalized_values(instance)
    if not isinstance(x, FractionalAllocation):
        x = FractionalAllocation.from_rows(instance.goods, x, instance.supplies)
    prices = p.values if isinstance(p, PriceVector) else tuple(Fraction(v) for v in p)
    eps = Fraction(1, 10**9)
    worst = Fraction(0)
    for i in range(instance.agent_count):
        ratios = {"full": [], "partial": [], "zero": []}
        for g in range(instance.m):
            if prices[g] == 0:
                continue  # infinite ratio; never a violation source
            bb = w[i][g] / prices[g]
            cell = x.matrix[i][g]
            if cell >= 1 - eps:
                ratios["full"].append(bb)
            elif cell <= eps:
                ratios["zero"].append(bb)
            else:
                ratios["partial"].append(bb)
        partial = ratios["partial"]
        if partial:
            worst = max(worst, max(partial) - min(partial))
        lo_full = min(ratios["full"], default=None)
        hi_zero = max(ratios["zero"], default=None)
        hi_partial = max(partial, default=None)
        lo_partial = min(partial, default=None)
        if lo_full is not None and hi_partial is not None:
            worst = max(worst, hi_partial - lo_full)
        if hi_zero is not None and lo_partial is not None:
            worst = max(worst, hi_zero - lo_partial)
        if lo_full is not None and hi_zero is not None:
            worst = max(worst, hi_zero - lo_full)
    return worst


# ---- copies mode: EG + regime polish ------------------------------------------------


def _project_columns(z: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Column-wise Euclidean projection onto {y in [0,1]^n : sum y <= q}.

    Bisection on the common shift, vectorized over all columns at once."""
    y = np.clip(z, 0.0, 1.0)
    need = y.sum(axis=0) > q + 1e-12
    if not np.any(need):
        return y
    lo = np.zeros(z.shape[1])
    hi = np.where(need, z.max(axis=0, initial=0.0), 0.0)
    for _ in range(45):
        theta = 0.5 * (lo + hi)
        over = np.clip(z - theta, 0.0, 1.0).sum(axis=0) > q
        lo = np.where(need & over, theta, lo)
        hi = np.where(need & ~over, theta, hi)
    out = np.clip(z - np.where(need, hi, 0.0), 0.0, 1.0)
    return out


def _eg_scarce_utilities(wf: np.ndarray, q: np.ndarray, iters: int = 20000):
    """Projected gradient ascent on sum_i log(w_i . x_i) over the capped
    supply polytope; returns the (unique) optimal utility vector."""
    n, _ms = wf.shape
    x = np.minimum(1.0, np.tile(q / n, (n, 1)))
    step = 0.5

    def objective(mat):
        u = (wf * mat).sum(axis=1)
        if np.any(u <= 0):
            return -np.inf, u
        return float(np.log(u).sum()), u

    best, u = objective(x)
    stall = 0
    for _ in range(iters):
        grad = wf / u[:, None]
        cand = _project_columns(x + step * grad, q)
        val, cu = objective(cand)
        if val >= best:
            stall = stall + 1 if val - best < 1e-14 else 0
            x, best, u = cand, val, cu
            step = min(step * 1.1, 8.0)
            if stall >= 30:
                break
        else:
            step *= 0.5
            if step < 1e-13:
                break
    return (wf * x).sum(axis=1), x


def _repair_demand_consistent(wf, q, u_star, rel_tol):
    """Re-solve cells so budgets and clearing hold at the ratio prices.

    Prices are p_g = max_i w_ig / u_i; an agent may hold g only at maximal
    ratio. Returns (x, p) as floats or None when infeasible (which happens
    exactly when some budget cannot be balanced, e.g. a satiated agent)."""
    n, ms = wf.shape
    ratios = wf / u_star[:, None]
    p = ratios.max(axis=0)
    allowed = ratios >= p * (1 - rel_tol)
    nv = n * ms
    A_eq, b_eq = [], []
    for g in range(ms):
        row = np.zeros(nv)
        for i in range(n):
            row[i * ms + g] = 1.0
        A_eq.append(row)
        b_eq.append(float(q[g]))
    for i in range(n):
        row = np.zeros(nv)
        row[i * ms : (i + 1) * ms] = p
        A_eq.append(row)
        b_eq.append(1.0)
    bounds = [
        (0.0, 1.0 if allowed[i, g] else 0.0) for i in range(n) for g in range(ms)
    ]
    res = linprog(
        c=np.zeros(nv), A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    return res.x.reshape(n, ms), p


def _polish_regime(w_scarce, q, regimes, fully_capped):
    """Exact equilibrium for a fixed full/partial/zero cell regime.

    Solves the linear system in prices p, inverse thresholds beta_i, and
    partial-cell spending b: partial pins p_g = w_ig beta_i, full/zero turn
    that into inequalities, budgets are tight (<= 1 for fully capped
    agents), and money clears each good. Returns (x, p) exact or None.
    """
    n = len(regimes)
    ms = len(q)
    p_off = 0
    beta_off = ms
    b_vars = [(i, g) for i in range(n) for g in range(ms) if regimes[i][g] == "P"]
    b_off = ms + n
    nvar = b_off + len(b_vars)
    b_index = {cell: b_off + k for k, cell in enumerate(b_vars)}

    A_eq, b_eq, A_ub, b_ub = [], [], [], []

    def zeros():
        return [Fraction(0)] * nvar

    for i in range(n):
        for g in range(ms):
            row = zeros()
            row[p_off + g] = Fraction(1)
            row[beta_off + i] = -w_scarce[i][g]
            kind = regimes[i][g]
            if kind == "P":
                A_eq.append(row)
                b_eq.append(Fraction(0))
            elif kind == "F":
                A_ub.append(row)  # p <= w beta
                b_ub.append(Fraction(0))
            else:
                A_ub.append([-v for v in row])  # p >= w beta
                b_ub.append(Fraction(0))
    for i in range(n):
        row = zeros()
        for g in range(ms):
            if regimes[i][g] == "F":
                row[p_off + g] += Fraction(1)
            elif regimes[i][g] == "P":
                row[b_index[(i, g)]] += Fraction(1)
        if i in fully_capped:
            A_ub.append(row)
            b_ub.append(Fraction(1))
        else:
            A_eq.append(row)
            b_eq.append(Fraction(1))
    for g in range(ms):
        row = zeros()
        full_holders = sum(1 for i in range(n) if regimes[i][g] == "F")
        row[p_off + g] = Fraction(full_holders) - Fraction(q[g])
        for i in range(n):
            if regimes[i][g] == "P":
                row[b_index[(i, g)]] += Fraction(1)
        A_eq.append(row)
        b_eq.append(Fraction(0))
    for (i, g), col in b_index.items():
        row = zeros()
        row[col] = Fraction(1)
        row[p_off + g] = Fraction(-1)
        A_ub.append(row)  # b <= p
        b_ub.append(Fraction(0))

    objective = zeros()
    for g in range(ms):
        objective[p_off + g] = Fraction(1)
    result = solve_lp(
        objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=[(0, None)] * nvar, maximize=True,
    )
    if result.status != "optimal":
        return None
    prices = list(result.x[p_off:beta_off])
    if any(v <= 0 for v in prices):
        return None
    x = [[Fraction(0)] * ms for _ in range(n)]
    for i in range(n):
        for g in range(ms):
            kind = regimes[i][g]
            if kind == "F":
                x[i][g] = Fraction(1)
            elif kind == "P":
                x[i][g] = result.x[b_index[(i, g)]] / prices[g]
    return x, prices


def _regimes_from_matrix(x, tol=1e-6):
    regimes = []
    for row in x:
        regimes.append(
            ["F" if v >= 1 - tol else "Z" if v <= tol else "P" for v in row]
        )
    return regimes


def _milp_regimes(w_scarce, q):
    """Mixed-integer search for an equilibrium cell regime (fallback path)."""
    from scipy.optimize import LinearConstraint, milp
    from scipy.optimize import Bounds

    n = len(w_scarce)
    ms = len(q)
    wf = np.array([[float(v) for v in row] for row in w_scarce])
    p_max = float(n)
    beta_max = max(p_max / wf[i].max() for i in range(n)) * 4.0
    big_wb = float(wf.max()) * beta_max + p_max

    # variable layout: p, beta, b, slack, F, Z, FC
    p0 = 0
    beta0 = ms
    b0 = beta0 + n
    s0 = b0 + n * ms
    f0 = s0 + n
    z0 = f0 + n * ms
    fc0 = z0 + n * ms
    nv = fc0 + n

    lb = np.zeros(nv)
    ub = np.concatenate(
        [
            np.full(ms, p_max),
            np.full(n, beta_max),
            np.full(n * ms, p_max),
            np.ones(n),
            np.ones(2 * n * ms + n),
        ]
    )
    integrality = np.zeros(nv)
    integrality[f0:] = 1

    rows, lows, highs = [], [], []

    def add(row, lo, hi):
        rows.append(row)
        lows.append(lo)
        highs.append(hi)

    for i in range(n):
        for g in range(ms):
            cell = i * ms + g
            r = np.zeros(nv)  # b - p <= 0
            r[b0 + cell] = 1
            r[p0 + g] = -1
            add(r, -np.inf, 0)
            r = np.zeros(nv)  # p - b <= p_max (1 - F)
            r[p0 + g] = 1
            r[b0 + cell] = -1
            r[f0 + cell] = p_max
            add(r, -np.inf, p_max)
            r = np.zeros(nv)  # b <= p_max (1 - Z)
            r[b0 + cell] = 1
            r[z0 + cell] = p_max
            add(r, -np.inf, p_max)
            r = np.zeros(nv)  # p - w beta + big F >= 0
            r[p0 + g] = 1
            r[beta0 + i] = -wf[i][g]
            r[f0 + cell] = big_wb
            add(r, 0, np.inf)
            r = np.zeros(nv)  # p - w beta - p_max Z <= 0
            r[p0 + g] = 1
            r[beta0 + i] = -wf[i][g]
            r[z0 + cell] = -p_max
            add(r, -np.inf, 0)
            r = np.zeros(nv)  # F + Z <= 1
            r[f0 + cell] = 1
            r[z0 + cell] = 1
            add(r, -np.inf, 1)
            r = np.zeros(nv)  # FC <= F cellwise
            r[fc0 + i] = 1
            r[f0 + cell] = -1
            add(r, -np.inf, 0)
        r = np.zeros(nv)  # budget: sum b + slack = 1
        r[b0 + i * ms : b0 + (i + 1) * ms] = 1
        r[s0 + i] = 1
        add(r, 1, 1)
        r = np.zeros(nv)  # slack <= FC
        r[s0 + i] = 1
        r[fc0 + i] = -1
        add(r, -np.inf, 0)
    for g in range(ms):
        r = np.zeros(nv)  # clearing: sum_i b = q p
        for i in range(n):
            r[b0 + i * ms + g] = 1
        r[p0 + g] = -float(q[g])
        add(r, 0, 0)
        r = np.zeros(nv)  # scarce goods keep a positive price
        r[p0 + g] = 1
        add(r, 1e-7, np.inf)

    res = milp(
        c=np.zeros(nv),
        constraints=LinearConstraint(np.array(rows), np.array(lows), np.array(highs)),
        integrality=integrality,
        bounds=Bounds(lb, ub),
    )
    if not res.success:
        return None
    sol = res.x
    regimes = []
    for i in range(n):
        row = []
        for g in range(ms):
            cell = i * ms + g
            if sol[f0 + cell] > 0.5:
                row.append("F")
            elif sol[z0 + cell] > 0.5:
                row.append("Z")
            else:
                row.append("P")
        regimes.append(row)
    fully_capped = {i for i in range(n) if sol[fc0 + i] > 0.5}
    return regimes, fully_capped


def _assemble_certificate(instance, mode, scarce, x_scarce, p_scarce) -> CEEICertificate:
    n, m = instance.agent_count, instance.m
    x_full = [[Fraction(1)] * m for _ in range(n)]
    p_full = [Fraction(0)] * m
    for k, g in enumerate(scarce):
        p_full[g] = Fraction(p_scarce[k])
        for i in range(n):
            x_full[i][g] = Fraction(x_scarce[i][k])
    x = FractionalAllocation.from_rows(instance.goods, x_full, instance.supplies)
    p = PriceVector.of(p_full)
    residuals = verify_ceei(instance, mode, x, p)
    return CEEICertificate(x=x, p=p, residuals=residuals, mode=mode)


def _compute_ceei_copies(instance: Instance, tau) -> CEEICertificate:
    n = instance.agent_count
    w = normalized_values(instance)
    scarce = [g for g in range(instance.m) if instance.supplies[g] < n]
    if not scarce:
        cert = _assemble_certificate(instance, "copies", [], [], [])
        if not cert.verified(tau):
            raise ConvergenceFailure("degenerate all-nonscarce market", cert)
        return cert

    w_scarce = [[w[i][g] for g in scarce] for i in range(n)]
    wf = np.array([[float(v) for v in row] for row in w_scarce])
    q = np.array([float(instance.supplies[g]) for g in scarce])

    best_cert = None
    u_star, _x_eg = _eg_scarce_utilities(wf, q)
    for rel_tol in (1e-6, 1e-4, 1e-3):
        repaired = _repair_demand_consistent(wf, q, u_star, rel_tol)
        if repaired is None:
            continue
        x_hat, _p_hat = repaired
        regimes = _regimes_from_matrix(x_hat)
        polished = _polish_regime(w_scarce, [instance.supplies[g] for g in scarce],
                                  regimes, fully_capped=set())
        if polished is None:
            continue
        cert = _assemble_certificate(instance, "copies", scarce, *polished)
        if cert.verified(tau):
            return cert
        if best_cert is None or cert.residuals.worst() < best_cert.residuals.worst():
            best_cert = cert

    found = _milp_regimes(w_scarce, [instance.supplies[g] for g in scarce])
    if found is not None:
        regimes, fully_capped = found
        polished = _polish_regime(w_scarce, [instance.supplies[g] for g in scarce],
                                  regimes, fully_capped)
        if polished is not None:
            cert = _assemble_certificate(instance, "copies", scarce, *polished)
            if cert.verified(tau):
                return cert
            if best_cert is None or cert.residuals.worst() < best_cert.residuals.worst():
                best_cert = cert

    raise ConvergenceFailure(
        "no verified competitive equilibrium found for copies mode", best_cert
    )


# ---- copies + balancedness: price adjustment ------------------------------------------


def _float_demand(wf_row, p, balance_cap):
    m = len(p)
    bounds = [(0.0, 1.0)] * m
    A_ub = [list(p)]
    b_ub = [1.0]
    if balance_cap is not None:
        A_ub.append([1.0] * m)
        b_ub.append(balance_cap)
    best = linprog(c=-wf_row, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not best.success:
        return None
    u_star = -best.fun
    A_ub2 = [[-v for v in wf_row]]
    b_ub2 = [-(u_star - 1e-11)]
    if balance_cap is not None:
        A_ub2.append([1.0] * m)
        b_ub2.append(balance_cap)
    cheap = linprog(c=p, A_ub=A_ub2, b_ub=b_ub2, bounds=bounds, method="highs")
    if not cheap.success:
        return None
    return u_star, cheap.fun


def _select_demands(wf, p, q, balance_cap, u_star, c_star):
    """Pick one point per agent demand face minimizing the clearing gap."""
    n, m = wf.shape
    nv = n * m + 2 * m  # y cells, oversupply, undersupply
    c = np.zeros(nv)
    c[n * m : n * m + m] = 1e4  # overdemand is a hard violation
    c[n * m + m :] = np.maximum(p, 0.0)
    A_ub, b_ub = [], []
    for i in range(n):
        row = np.zeros(nv)
        row[i * m : (i + 1) * m] = -wf[i]
        A_ub.append(row)
        b_ub.append(-(u_star[i] - 1e-9))
        row = np.zeros(nv)
        row[i * m : (i + 1) * m] = p
        A_ub.append(row)
        b_ub.append(c_star[i] + 1e-9)
        if balance_cap is not None:
            row = np.zeros(nv)
            row[i * m : (i + 1) * m] = 1.0
            A_ub.append(row)
            b_ub.append(balance_cap)
    for g in range(m):
        row = np.zeros(nv)
        for i in range(n):
            row[i * m + g] = 1.0
        row[n * m + g] = -1.0
        A_ub.append(row)
        b_ub.append(q[g])
        row = np.zeros(nv)
        for i in range(n):
            row[i * m + g] = -1.0
        row[n * m + m + g] = -1.0
        A_ub.append(row)
        b_ub.append(-q[g])
    bounds = [(0.0, 1.0)] * (n * m) + [(0.0, None)] * (2 * m)
    res = linprog(c=c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds,
                  method="highs")
    if not res.success:
        return None
    y = res.x[: n * m].reshape(n, m)
    over = res.x[n * m : n * m + m]
    under = res.x[n * m + m :]
    gap = float(over.max(initial=0.0) + (np.maximum(p, 0) * under).sum())
    return y, gap


def _compute_ceei_balanced(instance: Instance, tau, max_iterations) -> CEEICertificate:
    n, m = instance.agent_count, instance.m
    w = normalized_values(instance)
    wf = np.array([[float(v) for v in row] for row in w])
    q = np.array([float(s) for s in instance.supplies])
    balance_cap = m / n

    p = np.full(m, n / q.sum())
    step = 0.25
    best = None  # (gap, x, p)
    prev_gap = np.inf
    for _ in range(max_iterations):
        u_star, c_star = np.zeros(n), np.zeros(n)
        ok = True
        for i in range(n):
            out = _float_demand(wf[i], p, balance_cap)
            if out is None:
                ok = False
                break
            u_star[i], c_star[i] = out
        if not ok:
            p = p * 1.05 + 1e-9
            continue
        picked = _select_demands(wf, p, q, balance_cap, u_star, c_star)
        if picked is None:
            p = p * 1.05 + 1e-9
            continue
        y, gap = picked
        if best is None or gap < best[0]:
            best = (gap, y.copy(), p.copy())
        if gap <= 1e-9:
            break
        excess = y.sum(axis=0) - q
        if gap > prev_gap * 1.2:
            step = max(step * 0.7, 1e-3)
        prev_gap = gap
        p = p * np.exp(step * excess / np.maximum(q, 1.0))
        p = np.where((p < 1e-10) & (excess <= 0), 0.0, p)

    if best is None:
        raise ConvergenceFailure("price adjustment produced no candidate", None)
    _gap, y, p = best
    x_rows = [[Fraction(min(max(float(v), 0.0), 1.0)) for v in row] for row in y]
    # clamp column overshoot from float noise
    for g in range(m):
        col = sum(r[g] for r in x_rows)
        if col > instance.supplies[g]:
            overshoot = col - instance.supplies[g]
            big = max(range(n), key=lambda i: x_rows[i][g])
            x_rows[big][g] -= overshoot
    x = FractionalAllocation.from_rows(instance.goods, x_rows, instance.supplies)
    pv = PriceVector.of([Fraction(float(v)) for v in p])
    residuals = verify_ceei(instance, "copies_balanced", x, pv)
    cert = CEEICertificate(x=x, p=pv, residuals=residuals, mode="copies_balanced")
    if not cert.verified(tau):
        raise ConvergenceFailure(
            f"price adjustment stalled at residual {float(residuals.worst()):.3g}", cert
        )
    return cert


def compute_ceei(instance: Instance, mode: str = "copies", tau=DEFAULT_TAU,
                 max_iterations: int = 100_000) -> CEEICertificate:
    """Competitive equilibrium from equal incomes for a supplies instance.

    The returned certificate has been re-verified by ``verify_ceei``; a
    certificate whose residuals exceed ``tau`` is never returned silently
    (ConvergenceFailure carries it for inspection instead).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    _check_supplies(instance)
    tau = Fraction(tau) if not isinstance(tau, Fraction) else tau
    if mode == "copies":
        return _compute_ceei_copies(instance, tau)
    return _compute_ceei_balanced(instance, tau, max_iterations)
