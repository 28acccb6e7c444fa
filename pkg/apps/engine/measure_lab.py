#!/usr/bin/env python3
"""
Exact measure model on N plus a diffuse remainder, the projection onto the
atomic part, partitions of N into infinite blocks, and the affine map without
fixed points together with its step-by-step impossibility certificate.
"""

from __future__ import annotations

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

from core_spaces import SparseVector, format_rational, parse_rational
from errors import ConfigError, DomainEscape
from exact_lp import LPResult, solve_lp


log = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class FiniteMeasureModel:
    """Atoms on N (1-based) plus mass on the remainder of the compactification."""

    atoms: SparseVector = field(default_factory=SparseVector)
    diffuse: Fraction = ZERO

    @classmethod
    def dirac(cls, n: int, mass: Any = 1) -> "FiniteMeasureModel":
        return cls(SparseVector.basis(n, mass), ZERO)

    @classmethod
    def pure_diffuse(cls, mass: Any = 1) -> "FiniteMeasureModel":
        return cls(SparseVector(), Fraction(mass))

    @classmethod
    def zero(cls) -> "FiniteMeasureModel":
        return cls(SparseVector(), ZERO)

    def total(self) -> Fraction:
        return self.diffuse + sum((v for _, v in self.atoms.items()), ZERO)

    def tv_norm(self) -> Fraction:
        return abs(self.diffuse) + self.atoms.l1()

    def is_nonnegative(self) -> bool:
        return self.diffuse >= 0 and self.atoms.is_nonnegative()

    def is_probability(self) -> bool:
        return self.is_nonnegative() and self.total() == 1

    def mass_on(self, members: Callable[[int], bool]) -> Fraction:
        return sum((v for n, v in self.atoms.items() if members(n)), ZERO)

    def __add__(self, other: "FiniteMeasureModel") -> "FiniteMeasureModel":
        return FiniteMeasureModel(self.atoms + other.atoms, self.diffuse + other.diffuse)

    def __sub__(self, other: "FiniteMeasureModel") -> "FiniteMeasureModel":
        return FiniteMeasureModel(self.atoms - other.atoms, self.diffuse - other.diffuse)

    def __neg__(self) -> "FiniteMeasureModel":
        return FiniteMeasureModel(-self.atoms, -self.diffuse)

    def scale(self, factor: Any) -> "FiniteMeasureModel":
        f = Fraction(factor)
        return FiniteMeasureModel(self.atoms.scale(f), self.diffuse * f)

    def __truediv__(self, divisor: Any) -> "FiniteMeasureModel":
        return self.scale(1 / Fraction(divisor))

    def to_json(self) -> dict[str, Any]:
        return {"atoms": self.atoms.to_json(), "diffuse": format_rational(self.diffuse)}

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "FiniteMeasureModel":
        if not isinstance(payload, Mapping):
            raise ConfigError("measure must be a JSON object {\"atoms\", \"diffuse\"}")
        unknown = set(payload) - {"schema", "atoms", "diffuse"}
        if unknown:
            raise ConfigError(f"unknown measure keys: {sorted(unknown)}")
        return cls(
            SparseVector.from_json(payload.get("atoms", {})),
            parse_rational(payload.get("diffuse", "0"), name="diffuse"),
        )


def tv_norm(mu: FiniteMeasureModel) -> Fraction:
    return mu.tv_norm()


def project_P(mu: FiniteMeasureModel) -> FiniteMeasureModel:
    """Restriction to N: atoms kept, diffuse mass dropped."""
    return FiniteMeasureModel(mu.atoms, ZERO)


class PartitionRule(ABC):
    name: str = "partition"

    @abstractmethod
    def block_of(self, n: int) -> int:
        """1-based index j of the block A_j holding n."""

    def next_outside(self, after: int, j: int) -> int:
        """Smallest n > after with n outside A_1 u ... u A_j."""
        n = after + 1
        while self.block_of(n) <= j:
            n += 1
        return n

    def sample_block(self, j: int, count: int) -> list[int]:
        """First `count` members of A_j."""
        out: list[int] = []
        n = 1
        while len(out) < count:
            if self.block_of(n) == j:
                out.append(n)
            n += 1
        return out


class DyadicPartition(PartitionRule):
    """A_j = {2^(j-1) (2m+1)}: block index is the 2-adic valuation plus one."""

    name = "dyadic"

    def block_of(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"partition is over positive integers, got {n}")
        return (n & -n).bit_length()

    def next_outside(self, after: int, j: int) -> int:
        step = 1 << j
        return (after // step + 1) * step

    def sample_block(self, j: int, count: int) -> list[int]:
        return [(1 << (j - 1)) * (2 * m + 1) for m in range(count)]


class CantorPartition(PartitionRule):
    """Block of n is the first coordinate of the Cantor unpairing of n - 1, plus one."""

    name = "cantor"

    def block_of(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"partition is over positive integers, got {n}")
        m = n - 1
        w = (math.isqrt(8 * m + 1) - 1) // 2
        second = m - w * (w + 1) // 2
        return w - second + 1


PARTITIONS: dict[str, type[PartitionRule]] = {
    "dyadic": DyadicPartition,
    "cantor": CantorPartition,
}


def make_partition(name: str) -> PartitionRule:
    try:
        return PARTITIONS[name]()
    except KeyError as exc:
        raise ConfigError(f"unknown partition {name!r}; choose from {sorted(PARTITIONS)}") from exc


class ForwardIndexRule:
    """k_1 = min{n > 1 : n not in A_1}, k_{j+1} = min{n > k_j : n not in A_1..A_{j+1}}."""

    def __init__(self, partition: PartitionRule) -> None:
        self.partition = partition
        self._memo: list[int] = []

    def k(self, j: int) -> int:
        if j < 1:
            raise ValueError("forward index is 1-based")
        while len(self._memo) < j:
            i = len(self._memo) + 1
            after = 1 if i == 1 else self._memo[-1]
            self._memo.append(self.partition.next_outside(after, i))
        return self._memo[j - 1]

    def upto(self, bound: int) -> list[int]:
        """All k_j <= bound."""
        out: list[int] = []
        j = 1
        while self.k(j) <= bound:
            out.append(self.k(j))
            j += 1
        return out

    def index_of(self, n: int) -> int | None:
        j = 1
        while self.k(j) <= n:
            if self.k(j) == n:
                return j
            j += 1
        return None

    def violations(self, j_max: int) -> list[str]:
        found: list[str] = []
        k1 = self.k(1)
        if k1 < 2:
            found.append(f"k_1 = {k1} < 2")
        if self.partition.block_of(k1) == 1:
            found.append(f"k_1 = {k1} lies in A_1")
        for j in range(1, j_max):
            prev, cur = self.k(j), self.k(j + 1)
            if cur <= prev:
                found.append(f"k_{j + 1} = {cur} <= k_{j} = {prev}")
            if self.partition.block_of(cur) <= j + 1:
                found.append(f"k_{j + 1} = {cur} lies in A_1..A_{j + 1}")
        return found


def forward_indices(rule: ForwardIndexRule, j_max: int) -> list[int]:
    if j_max < 1:
        raise ConfigError("j_max must be >= 1")
    found = rule.violations(j_max)
    if found:
        raise AssertionError("; ".join(found))
    return [rule.k(j) for j in range(1, j_max + 1)]


@dataclass
class Ex2Map:
    """mu -> mu(diffuse) delta_1 + sum_j mu(A_j) delta_{k_j}."""

    partition: PartitionRule = field(default_factory=DyadicPartition)
    forward: ForwardIndexRule | None = None

    def __post_init__(self) -> None:
        if self.forward is None:
            self.forward = ForwardIndexRule(self.partition)

    @property
    def rule(self) -> ForwardIndexRule:
        assert self.forward is not None
        return self.forward

    def target_of(self, n: int) -> int:
        return self.rule.k(self.partition.block_of(n))

    def __call__(self, mu: FiniteMeasureModel) -> FiniteMeasureModel:
        return eval_f_ex2(self, mu)


def eval_f_ex2(f: Ex2Map, mu: FiniteMeasureModel) -> FiniteMeasureModel:
    out: dict[int, Fraction] = {}
    if mu.diffuse:
        out[1] = mu.diffuse
    for n, mass in mu.atoms.items():
        target = f.target_of(n)
        out[target] = out.get(target, ZERO) + mass
    return FiniteMeasureModel(SparseVector(out), ZERO)


def orbit_displacement(
    f: Callable[[FiniteMeasureModel], FiniteMeasureModel], mu0: FiniteMeasureModel, steps: int
) -> list[tuple[int, Fraction]]:
    """[(k, ||f(mu_k) - mu_k||_TV)] along mu_{k+1} = f(mu_k), mu_1 = mu0."""
    if mu0.total() != 1:
        raise ConfigError("orbit start must have total mass 1")
    out: list[tuple[int, Fraction]] = []
    mu = mu0
    for k in range(1, steps + 1):
        image = f(mu)
        out.append((k, (image - mu).tv_norm()))
        mu = image
    return out


@dataclass(frozen=True)
class CertificateStep:
    kind: str
    claim: str
    detail: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "claim": self.claim, "detail": self.detail}


@dataclass(frozen=True)
class CertificateReport:
    support_bound: int
    partition: str
    steps: tuple[CertificateStep, ...]
    infeasible: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "support_bound": self.support_bound,
            "partition": self.partition,
            "infeasible": self.infeasible,
            "steps": [s.to_json() for s in self.steps],
        }


def no_fixed_point_certificate(f: Ex2Map, support_bound: int) -> CertificateReport:
    """
    Runs the impossibility argument for a fixed point with atoms in
    {1..support_bound} plus diffuse mass. Unknowns are d = mu(diffuse) and
    mu_n; every step pins unknowns to 0 using f(mu) = mu coordinatewise.
    """
    if support_bound < 1:
        raise ConfigError("support bound must be >= 1")
    N = support_bound
    pinned: dict[int, Fraction] = {}
    steps: list[CertificateStep] = []

    steps.append(CertificateStep(
        "diffuse",
        "f(mu) has no diffuse part, so mu(diffuse) = 0",
        {"diffuse": "0"},
    ))

    rule = f.rule
    forward = rule.upto(N)
    if 1 in forward:
        raise AssertionError("k_1 must be >= 2")
    pinned[1] = ZERO
    steps.append(CertificateStep(
        "atom-1",
        "f(mu)({1}) = mu(diffuse) = 0 since 1 is not a forward index, so mu({1}) = 0",
        {"n": 1},
    ))

    forward_set = set(forward)
    off = [n for n in range(2, N + 1) if n not in forward_set]
    for n in off:
        pinned[n] = ZERO
    steps.append(CertificateStep(
        "forward-support",
        "f(mu) is carried by {k_j}, so mu vanishes off the forward indices",
        {"eliminated": off, "forward_indices": forward},
    ))

    for j, k_j in enumerate(forward, start=1):
        # mu({k_j}) = f(mu)({k_j}) = mu(A_j); inside {k_i} only k_i with i < j can lie in A_j
        contributors = [k for k in forward if f.partition.block_of(k) == j]
        if any(pinned.get(k) != ZERO for k in contributors):
            raise AssertionError(f"minimal-j step {j} relies on an unpinned contributor")
        pinned[k_j] = ZERO
        steps.append(CertificateStep(
            "minimal-j",
            f"mu({{k_{j}}}) = mu(A_{j}) = 0",
            {"j": j, "k_j": k_j, "contributors": contributors},
        ))

    total = sum(pinned.values(), ZERO)
    infeasible = total == 0 and sorted(pinned) == list(range(1, N + 1))
    steps.append(CertificateStep(
        "total-mass",
        "every unknown is 0, so total mass 0 != 1",
        {"total": format_rational(total) if infeasible else "undetermined"},
    ))
    log.info("no-fixed-point certificate", extra={"support_bound": N, "infeasible": infeasible})
    return CertificateReport(N, f.partition.name, tuple(steps), infeasible)


def fixed_point_lp_check(f: Ex2Map, support_bound: int) -> LPResult:
    """Exact LP for f(mu) = mu, mu >= 0, total 1, atoms in {1..N}; expected infeasible."""
    N = support_bound
    n_vars = N + 1  # mu_1..mu_N, then d
    d_col = N
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    image: dict[int, list[Fraction]] = {}

    def coeffs_for(target: int) -> list[Fraction]:
        return image.setdefault(target, [ZERO] * n_vars)

    coeffs_for(1)[d_col] += 1
    for m in range(1, N + 1):
        coeffs_for(f.target_of(m))[m - 1] += 1
    for target in sorted(set(image) | set(range(1, N + 1))):
        row = list(coeffs_for(target))
        if target <= N:
            row[target - 1] -= 1
        rows.append(row)
        rhs.append(ZERO)
    diffuse_row = [ZERO] * n_vars
    diffuse_row[d_col] = ONE
    rows.append(diffuse_row)
    rhs.append(ZERO)
    rows.append([ONE] * n_vars)
    rhs.append(ONE)
    return solve_lp([ZERO] * n_vars, a_eq=rows, b_eq=rhs)


def ex1_map(g: Callable[[SparseVector], SparseVector]) -> Callable[[FiniteMeasureModel], FiniteMeasureModel]:
    """mu -> g(P mu), with g acting on the positive unit ball of l1."""

    def apply(mu: FiniteMeasureModel) -> FiniteMeasureModel:
        atoms = project_P(mu).atoms
        if not atoms.is_nonnegative() or atoms.l1() > 1:
            raise DomainEscape("projected measure is outside the positive unit ball")
        return FiniteMeasureModel(g(atoms), ZERO)

    return apply


def parse_start(spec: str) -> FiniteMeasureModel:
    """'diffuse', 'atom:n', or a JSON measure file path."""
    if spec == "diffuse":
        return FiniteMeasureModel.pure_diffuse()
    if spec.startswith("atom:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad atom start: {spec!r}") from exc
        if n < 1:
            raise ConfigError("atom index must be >= 1")
        return FiniteMeasureModel.dirac(n)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"start is not 'diffuse', 'atom:n' or an existing file: {spec!r}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"start file is not valid JSON: {spec}: {exc}") from exc
    mu = FiniteMeasureModel.from_json(payload)
    if not mu.is_probability():
        raise ConfigError("start measure must be nonnegative with total mass 1")
    return mu
