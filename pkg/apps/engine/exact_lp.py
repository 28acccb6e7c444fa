#!/usr/bin/env python3
"""
Exact-rational linear programming (two-phase tableau simplex, Bland's rule).

  minimize    c . z
  subject to  A_ub z <= b_ub
              A_eq z == b_eq
              z_j >= 0 for every j not in `free`

All arithmetic is `fractions.Fraction`; results are bit-exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Sequence


log = logging.getLogger(__name__)

LPStatus = Literal["optimal", "infeasible", "unbounded"]
ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: Fraction | None
    solution: tuple[Fraction, ...]

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, rows: list[list[Fraction]], basis: list[int]) -> None:
        self.rows = rows
        self.basis = basis
        self.obj: list[Fraction] = []

    @property
    def width(self) -> int:
        return len(self.rows[0]) - 1 if self.rows else 0

    def set_cost(self, cost: Sequence[Fraction]) -> None:
        obj = list(cost) + [ZERO]
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb == 0:
                continue
            row = self.rows[i]
            for j, v in enumerate(row):
                if v:
                    obj[j] -= cb * v
        self.obj = obj

    def pivot(self, r: int, j: int) -> None:
        piv_row = self.rows[r]
        piv = piv_row[j]
        if piv != 1:
            piv_row = [v / piv for v in piv_row]
            self.rows[r] = piv_row
        nz = [(k, v) for k, v in enumerate(piv_row) if v]
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            factor = row[j]
            if factor:
                for k, v in nz:
                    row[k] -= factor * v
        factor = self.obj[j]
        if factor:
            for k, v in nz:
                self.obj[k] -= factor * v
        self.basis[r] = j

    def run(self, blocked: frozenset[int] = frozenset()) -> Literal["optimal", "unbounded"]:
        width = len(self.obj) - 1
        while True:
            entering = -1
            for j in range(width):
                if j not in blocked and self.obj[j] < 0:
                    entering = j
                    break
            if entering < 0:
                return "optimal"

            leave = -1
            best: tuple[Fraction, int] | None = None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    key = (row[-1] / a, self.basis[i])
                    if best is None or key < best:
                        best = key
                        leave = i
            if leave < 0:
                return "unbounded"
            self.pivot(leave, entering)

    def value(self) -> Fraction:
        return -self.obj[-1]


def _as_fractions(values: Iterable[object]) -> list[Fraction]:
    return [v if isinstance(v, Fraction) else Fraction(v) for v in values]  # type: ignore[arg-type]


def solve_lp(
    objective: Sequence[object],
    a_ub: Sequence[Sequence[object]] = (),
    b_ub: Sequence[object] = (),
    a_eq: Sequence[Sequence[object]] = (),
    b_eq: Sequence[object] = (),
    free: Iterable[int] = (),
) -> LPResult:
    c = _as_fractions(objective)
    n = len(c)
    free_set = frozenset(free)
    if len(a_ub) != len(b_ub) or len(a_eq) != len(b_eq):
        raise ValueError("constraint matrix and right-hand side lengths differ")

    # structural columns: one per bounded variable, two (pos, neg) per free variable
    col_of: list[tuple[int, int | None]] = []
    ncols = 0
    for j in range(n):
        if j in free_set:
            col_of.append((ncols, ncols + 1))
            ncols += 2
        else:
            col_of.append((ncols, None))
            ncols += 1
    n_struct = ncols
    n_slack = len(a_ub)
    m = len(a_ub) + len(a_eq)
    n_total = n_struct + n_slack + m

    rows: list[list[Fraction]] = []
    raw_rows = [(_as_fractions(r), Fraction(b), True) for r, b in zip(a_ub, b_ub)]
    raw_rows += [(_as_fractions(r), Fraction(b), False) for r, b in zip(a_eq, b_eq)]
    slack_idx = 0
    for i, (coeffs, rhs, is_ub) in enumerate(raw_rows):
        if len(coeffs) != n:
            raise ValueError(f"constraint row {i} has {len(coeffs)} entries, expected {n}")
        row = [ZERO] * (n_total + 1)
        for j, v in enumerate(coeffs):
            if not v:
                continue
            pos, neg = col_of[j]
            row[pos] = v
            if neg is not None:
                row[neg] = -v
        if is_ub:
            row[n_struct + slack_idx] = ONE
            slack_idx += 1
        row[-1] = rhs
        if rhs < 0:
            row = [-v for v in row]
        row[n_struct + n_slack + i] = ONE
        rows.append(row)

    art_start = n_struct + n_slack
    tab = _Tableau(rows, [art_start + i for i in range(m)])
    log.debug("lp size", extra={"rows": m, "columns": n_total})

    phase1_cost = [ZERO] * art_start + [ONE] * m
    tab.set_cost(phase1_cost)
    tab.run()
    if tab.value() > 0:
        return LPResult(status="infeasible", value=None, solution=())

    # drive remaining artificials out of the basis; drop redundant rows
    i = 0
    while i < len(tab.rows):
        if tab.basis[i] >= art_start:
            row = tab.rows[i]
            j = next((k for k in range(art_start) if row[k]), -1)
            if j < 0:
                del tab.rows[i]
                del tab.basis[i]
                continue
            tab.pivot(i, j)
        i += 1

    phase2_cost = [ZERO] * n_total
    for j in range(n):
        pos, neg = col_of[j]
        phase2_cost[pos] = c[j]
        if neg is not None:
            phase2_cost[neg] = -c[j]
    tab.set_cost(phase2_cost)
    status = tab.run(blocked=frozenset(range(art_start, n_total)))
    if status == "unbounded":
        return LPResult(status="unbounded", value=None, solution=())

    col_values = [ZERO] * n_total
    for r, b in enumerate(tab.basis):
        col_values[b] = tab.rows[r][-1]
    solution = []
    for j in range(n):
        pos, neg = col_of[j]
        v = col_values[pos]
        if neg is not None:
            v -= col_values[neg]
        solution.append(v)
    return LPResult(status="optimal", value=tab.value(), solution=tuple(solution))


def is_feasible(
    a_ub: Sequence[Sequence[object]] = (),
    b_ub: Sequence[object] = (),
    a_eq: Sequence[Sequence[object]] = (),
    b_eq: Sequence[object] = (),
    n: int | None = None,
) -> LPResult:
    """Feasibility form: zero objective over nonnegative variables."""
    if n is None:
        sample = a_ub[0] if a_ub else a_eq[0]
        n = len(sample)
    return solve_lp([ZERO] * n, a_ub, b_ub, a_eq, b_eq)
