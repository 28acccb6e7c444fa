#!/usr/bin/env python3
"""
Exact scalars and sparse vectors, polyhedral seminorms, distance-to-span LP,
and the separated-sequence / total-boundedness probes.

Rationals are `fractions.Fraction` and serialize as "p/q" strings.
Vector indices are 1-based coordinates of l1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator, Literal, Mapping, Sequence

from errors import ConfigError, UnboundedBasis
from exact_lp import solve_lp


log = logging.getLogger(__name__)

Rational = Fraction
ZERO = Fraction(0)
ONE = Fraction(1)

SEMINORM_SCHEMA = "afp.seminorm.v1"
SeminormKind = Literal["l1", "linf", "max"]


def parse_rational(value: Any, *, name: str = "value") -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{name}: not a rational 'p/q' string: {value!r}") from exc
    raise ConfigError(f"{name}: expected a 'p/q' string, got {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    return str(value)


class SparseVector:
    """Finitely supported rational sequence. Immutable; never stores a zero."""

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[int, Any] | Iterable[tuple[int, Any]] = ()) -> None:
        items = entries.items() if isinstance(entries, Mapping) else entries
        clean: dict[int, Fraction] = {}
        for idx, raw in items:
            if not isinstance(idx, int) or isinstance(idx, bool) or idx < 1:
                raise ValueError(f"index must be a positive integer, got {idx!r}")
            value = raw if isinstance(raw, Fraction) else Fraction(raw)
            total = clean.get(idx, ZERO) + value
            if total:
                clean[idx] = total
            else:
                clean.pop(idx, None)
        self._entries = clean
        self._hash: int | None = None

    @classmethod
    def _trusted(cls, entries: dict[int, Fraction]) -> "SparseVector":
        vec = cls.__new__(cls)
        vec._entries = entries
        vec._hash = None
        return vec

    @classmethod
    def basis(cls, n: int, scale: Any = 1) -> "SparseVector":
        return cls({n: scale})

    @classmethod
    def dense(cls, values: Sequence[Any]) -> "SparseVector":
        return cls({i + 1: v for i, v in enumerate(values)})

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self._entries))

    def items(self) -> list[tuple[int, Fraction]]:
        return sorted(self._entries.items())

    def __getitem__(self, idx: int) -> Fraction:
        return self._entries.get(idx, ZERO)

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self.support)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{i}: {v}" for i, v in self.items())
        return f"SparseVector({{{body}}})"

    def _combine(self, other: "SparseVector", sign: int) -> "SparseVector":
        out = dict(self._entries)
        for idx, v in other._entries.items():
            total = out.get(idx, ZERO) + (v if sign > 0 else -v)
            if total:
                out[idx] = total
            else:
                out.pop(idx, None)
        return SparseVector._trusted(out)

    def __add__(self, other: "SparseVector") -> "SparseVector":
        return self._combine(other, 1)

    def __sub__(self, other: "SparseVector") -> "SparseVector":
        return self._combine(other, -1)

    def __neg__(self) -> "SparseVector":
        return SparseVector._trusted({i: -v for i, v in self._entries.items()})

    def scale(self, factor: Any) -> "SparseVector":
        f = factor if isinstance(factor, Fraction) else Fraction(factor)
        if not f:
            return SparseVector._trusted({})
        return SparseVector._trusted({i: f * v for i, v in self._entries.items()})

    def __mul__(self, factor: Any) -> "SparseVector":
        return self.scale(factor)

    __rmul__ = __mul__

    def __truediv__(self, divisor: Any) -> "SparseVector":
        return self.scale(1 / Fraction(divisor))

    def dot(self, other: "SparseVector") -> Fraction:
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        return sum((v * big[i] for i, v in small._entries.items()), ZERO)

    def l1(self) -> Fraction:
        return sum((abs(v) for v in self._entries.values()), ZERO)

    def linf(self) -> Fraction:
        return max((abs(v) for v in self._entries.values()), default=ZERO)

    def is_nonnegative(self) -> bool:
        return all(v > 0 for v in self._entries.values())

    def clamp_nonnegative(self) -> "SparseVector":
        return SparseVector._trusted({i: v for i, v in self._entries.items() if v > 0})

    def to_json(self) -> dict[str, str]:
        return {str(i): format_rational(v) for i, v in self.items()}

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "SparseVector":
        if not isinstance(payload, Mapping):
            raise ConfigError("vector must be a JSON object {\"index\": \"p/q\"}")
        entries: dict[int, Fraction] = {}
        for key, raw in payload.items():
            try:
                idx = int(key)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"vector index is not an integer: {key!r}") from exc
            if idx < 1:
                raise ConfigError(f"vector index must be >= 1: {key!r}")
            entries[idx] = parse_rational(raw, name=f"vector[{key}]")
        return cls(entries)


def combination(coefficients: Sequence[Fraction], vectors: Sequence[SparseVector]) -> SparseVector:
    out: dict[int, Fraction] = {}
    for coef, vec in zip(coefficients, vectors):
        if not coef:
            continue
        for idx, v in vec.items():
            total = out.get(idx, ZERO) + coef * v
            if total:
                out[idx] = total
            else:
                out.pop(idx, None)
    return SparseVector._trusted(out)


@dataclass(frozen=True)
class PolyhedralSeminorm:
    """max_j |<a_j, x>| with built-in l1 / linf evaluators."""

    kind: SeminormKind
    functionals: tuple[SparseVector, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in ("l1", "linf", "max"):
            raise ConfigError(f"unsupported seminorm kind: {self.kind!r}")
        if self.kind == "max" and not self.functionals:
            raise ConfigError("max-of-functionals seminorm needs at least one functional")

    @classmethod
    def l1(cls) -> "PolyhedralSeminorm":
        return cls("l1")

    @classmethod
    def linf(cls) -> "PolyhedralSeminorm":
        return cls("linf")

    @classmethod
    def max_of(cls, functionals: Iterable[SparseVector]) -> "PolyhedralSeminorm":
        return cls("max", tuple(functionals))

    def __call__(self, x: SparseVector) -> Fraction:
        return seminorm_eval(self, x)

    def distance(self, x: SparseVector, y: SparseVector) -> Fraction:
        return seminorm_eval(self, x - y)

    def to_json(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"schema": SEMINORM_SCHEMA, "kind": self.kind}
        if self.kind == "max":
            payload["functionals"] = [a.to_json() for a in self.functionals]
        return payload

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "PolyhedralSeminorm":
        if not isinstance(payload, Mapping):
            raise ConfigError("seminorm descriptor must be a JSON object")
        unknown = set(payload) - {"schema", "kind", "functionals"}
        if unknown:
            raise ConfigError(f"unknown seminorm keys: {sorted(unknown)}")
        schema = payload.get("schema", SEMINORM_SCHEMA)
        if schema != SEMINORM_SCHEMA:
            raise ConfigError(f"unsupported seminorm schema: {schema!r}")
        kind = str(payload.get("kind", "")).lower()
        if kind in ("l1", "linf"):
            return cls(kind)  # type: ignore[arg-type]
        if kind in ("max", "maxoffunctionals"):
            raw = payload.get("functionals")
            if not isinstance(raw, list):
                raise ConfigError("max seminorm needs a 'functionals' list")
            return cls.max_of(SparseVector.from_json(a) for a in raw)
        raise ConfigError(f"unsupported seminorm kind: {payload.get('kind')!r}")


@dataclass(frozen=True)
class SeparationParams:
    delta: Fraction
    M_bound: Fraction

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ConfigError("delta must be > 0")
        if self.M_bound < self.delta:
            raise ConfigError("M must be >= delta")


def seminorm_eval(rho: PolyhedralSeminorm, x: SparseVector) -> Fraction:
    if rho.kind == "l1":
        return x.l1()
    if rho.kind == "linf":
        return x.linf()
    return max(abs(a.dot(x)) for a in rho.functionals)


def _relevant_coordinates(vectors: Iterable[SparseVector]) -> list[int]:
    coords: set[int] = set()
    for v in vectors:
        coords.update(v.support)
    return sorted(coords)


def _linear_forms(
    rho: PolyhedralSeminorm, x: SparseVector, basis: Sequence[SparseVector]
) -> list[tuple[Fraction, list[Fraction]]]:
    """Forms phi with rho(r) = combine(|phi(r)|); each as (phi(x), [phi(b_l)])."""
    if rho.kind == "max":
        return [(a.dot(x), [a.dot(b) for b in basis]) for a in rho.functionals]
    coords = _relevant_coordinates([x, *basis])
    return [(x[i], [b[i] for b in basis]) for i in coords]


def distance_to_span(
    rho: PolyhedralSeminorm, x: SparseVector, basis: Sequence[SparseVector]
) -> Fraction:
    """inf over real beta of rho(x - sum beta_l b_l), solved as an exact LP."""
    live = [b for b in basis if b]
    for b in live:
        if seminorm_eval(rho, b) == 0:
            raise UnboundedBasis(
                f"basis vector {b!r} is nonzero but has seminorm 0; "
                "its coefficient is unconstrained"
            )
    if not live:
        return seminorm_eval(rho, x)

    forms = _linear_forms(rho, x, live)
    k = len(live)
    # variables: beta_1..beta_k (free), then t (one per form for l1, shared otherwise)
    per_form = rho.kind == "l1"
    n_t = len(forms) if per_form else 1
    n = k + n_t
    objective = [ZERO] * k + [ONE] * n_t
    a_ub: list[list[Fraction]] = []
    b_ub: list[Fraction] = []
    for idx, (value, coeffs) in enumerate(forms):
        t_col = k + (idx if per_form else 0)
        # phi(x) - sum beta phi(b) <= t  and  -(phi(x) - sum beta phi(b)) <= t
        upper = [-c for c in coeffs] + [ZERO] * n_t
        upper[t_col] = -ONE
        a_ub.append(upper)
        b_ub.append(-value)
        lower = list(coeffs) + [ZERO] * n_t
        lower[t_col] = -ONE
        a_ub.append(lower)
        b_ub.append(value)
    log.debug("distance_to_span lp", extra={"basis_size": k, "forms": len(forms)})
    result = solve_lp(objective, a_ub, b_ub, free=range(k))
    if not result.is_optimal or result.value is None:
        raise UnboundedBasis(f"distance LP ended with status {result.status}")
    return result.value


def in_rational_span(x: SparseVector, basis: Sequence[SparseVector]) -> bool:
    """Exact Gaussian elimination: is x a rational combination of `basis`?"""
    coords = _relevant_coordinates([x, *basis])
    if not x:
        return True
    rows = [[b[i] for i in coords] for b in basis if b]
    pivots: list[tuple[int, list[Fraction]]] = []
    for row in rows:
        row = list(row)
        for col, prow in pivots:
            if row[col]:
                f = row[col] / prow[col]
                row = [a - f * p for a, p in zip(row, prow)]
        lead = next((j for j, v in enumerate(row) if v), -1)
        if lead >= 0:
            pivots.append((lead, row))
    target = [x[i] for i in coords]
    for col, prow in pivots:
        if target[col]:
            f = target[col] / prow[col]
            target = [a - f * p for a, p in zip(target, prow)]
    return not any(target)


def greedy_separated_sequence(
    stream: Iterable[SparseVector],
    rho0: PolyhedralSeminorm,
    delta: Fraction,
    limit: int,
) -> list[SparseVector]:
    """Accept each stream point lying outside every open delta-ball around accepted ones."""
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    accepted: list[SparseVector] = []
    for consumed, x in enumerate(stream):
        if consumed >= limit:
            break
        if all(seminorm_eval(rho0, x - y) > delta for y in accepted):
            accepted.append(x)
    return accepted


def span_separated_sequence(
    stream: Iterable[SparseVector],
    rho0: PolyhedralSeminorm,
    delta: Fraction,
    limit: int,
) -> list[SparseVector]:
    """rho0(x_1) > delta and dist(x_{n+1}, span{x_1..x_n}) > delta for every accepted point."""
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    accepted: list[SparseVector] = []
    for consumed, x in enumerate(stream):
        if consumed >= limit:
            break
        if distance_to_span(rho0, x, accepted) > delta:
            accepted.append(x)
    return accepted


def verify_span_separated(
    points: Sequence[SparseVector], rho0: PolyhedralSeminorm, delta: Fraction
) -> int | None:
    """Index of the first point violating the span separation conditions, or None."""
    for n, x in enumerate(points):
        if distance_to_span(rho0, x, points[:n]) <= delta:
            return n
    return None


@dataclass(frozen=True)
class BoundednessProbe:
    consumed: int
    separated: tuple[SparseVector, ...]
    uncovered: int

    @property
    def covering_size(self) -> int:
        return len(self.separated)


def total_boundedness_probe(
    stream: Iterable[SparseVector],
    rho0: PolyhedralSeminorm,
    delta: Fraction,
    limit: int,
) -> BoundednessProbe:
    """Greedy separated set plus a check that it covers every consumed point at scale delta."""
    prefix: list[SparseVector] = []
    for consumed, x in enumerate(stream):
        if consumed >= limit:
            break
        prefix.append(x)
    separated = greedy_separated_sequence(prefix, rho0, delta, limit)
    uncovered = sum(
        1 for x in prefix if all(seminorm_eval(rho0, x - y) > delta for y in separated)
    )
    return BoundednessProbe(consumed=len(prefix), separated=tuple(separated), uncovered=uncovered)


def check_seminorm_axioms(
    rho: PolyhedralSeminorm,
    samples: Iterable[tuple[SparseVector, SparseVector, Fraction]],
) -> tuple[str, SparseVector, SparseVector, Fraction] | None:
    """First (axiom, x, y, lambda) that fails exactly, or None."""
    for x, y, lam in samples:
        rx = seminorm_eval(rho, x)
        if rx < 0:
            return ("nonnegative", x, y, lam)
        if seminorm_eval(rho, x.scale(lam)) != abs(lam) * rx:
            return ("homogeneous", x, y, lam)
        if seminorm_eval(rho, x + y) > rx + seminorm_eval(rho, y):
            return ("subadditive", x, y, lam)
    return None
