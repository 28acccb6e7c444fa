#!/usr/bin/env python3
"""
Convex domains with exactly decidable membership: boxes and rational polytopes.

Descriptor format (schema "afp.domain.v1"):
  {"schema": "afp.domain.v1", "kind": "box", "lower": ["0", "0"], "upper": ["1", "1"]}
  {"schema": "afp.domain.v1", "kind": "polytope", "lower": [...], "upper": [...],
   "A": [["1", "1"]], "b": ["1"], "anchor": ["1/4", "1/4"]}
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from core_spaces import SparseVector, format_rational, parse_rational
from errors import ConfigError
from json_contract import require_descriptor
from sampling import box_point


DOMAIN_SCHEMA = "afp.domain.v1"


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ConfigError("box bounds must be non-empty and of equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigError("box lower bound exceeds upper bound")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def in_bounds(self, x: SparseVector) -> bool:
        if any(i > self.dimension for i in x.support):
            return False
        return all(lo <= x[i + 1] <= hi for i, (lo, hi) in enumerate(zip(self.lower, self.upper)))

    def contains(self, x: SparseVector) -> bool:
        return self.in_bounds(x)

    def axis_values(self, resolution: int) -> list[list[Fraction]]:
        if resolution < 1:
            raise ConfigError("resolution must be >= 1")
        return [
            [lo + (hi - lo) * Fraction(k, resolution) for k in range(resolution + 1)]
            for lo, hi in zip(self.lower, self.upper)
        ]

    def grid(self, resolution: int) -> list[SparseVector]:
        """Points of the 1/resolution lattice of the box that lie in the domain."""
        points = (SparseVector.dense(p) for p in itertools.product(*self.axis_values(resolution)))
        return [p for p in points if self.contains(p)]

    def anchor(self) -> SparseVector:
        return SparseVector.dense([(lo + hi) / 2 for lo, hi in zip(self.lower, self.upper)])

    def sample(self, rng: np.random.Generator, count: int) -> list[SparseVector]:
        return [box_point(rng, self.lower, self.upper) for _ in range(count)]

    def diameter_linf(self) -> Fraction:
        return max(hi - lo for lo, hi in zip(self.lower, self.upper))

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": DOMAIN_SCHEMA,
            "kind": "box",
            "lower": [format_rational(v) for v in self.lower],
            "upper": [format_rational(v) for v in self.upper],
        }


@dataclass(frozen=True)
class PolytopeDomain(BoxDomain):
    """{x in box : A x <= b}; `explicit_anchor` is an interior point if given."""

    A: tuple[tuple[Fraction, ...], ...] = ()
    b: tuple[Fraction, ...] = ()
    explicit_anchor: tuple[Fraction, ...] | None = None

    def __post_init__(self) -> None:
        super().__post_init__()
        if len(self.A) != len(self.b):
            raise ConfigError("polytope A and b have different row counts")
        if any(len(row) != self.dimension for row in self.A):
            raise ConfigError("polytope row length differs from the box dimension")

    def contains(self, x: SparseVector) -> bool:
        if not self.in_bounds(x):
            return False
        for row, rhs in zip(self.A, self.b):
            if sum((a * x[j + 1] for j, a in enumerate(row)), Fraction(0)) > rhs:
                return False
        return True

    def anchor(self) -> SparseVector:
        if self.explicit_anchor is not None:
            return SparseVector.dense(self.explicit_anchor)
        # mean of member lattice points is inside a convex set
        for resolution in (2, 4, 8, 16):
            pts = self.grid(resolution)
            if pts:
                total = pts[0]
                for p in pts[1:]:
                    total = total + p
                return total / len(pts)
        raise ConfigError("polytope has no lattice points at resolution 16; give an anchor")

    def sample(self, rng: np.random.Generator, count: int) -> list[SparseVector]:
        out: list[SparseVector] = []
        attempts = 0
        while len(out) < count:
            attempts += 1
            if attempts > 100 * count + 100:
                raise ConfigError("polytope rejection sampling found too few members")
            p = box_point(rng, self.lower, self.upper)
            if self.contains(p):
                out.append(p)
        return out

    def to_json(self) -> dict[str, Any]:
        payload = super().to_json()
        payload["kind"] = "polytope"
        payload["A"] = [[format_rational(v) for v in row] for row in self.A]
        payload["b"] = [format_rational(v) for v in self.b]
        if self.explicit_anchor is not None:
            payload["anchor"] = [format_rational(v) for v in self.explicit_anchor]
        return payload


Domain = BoxDomain

BUILTIN_DOMAINS: dict[str, BoxDomain] = {
    "unit-interval": BoxDomain((Fraction(0),), (Fraction(1),)),
    "unit-square": BoxDomain((Fraction(0), Fraction(0)), (Fraction(1), Fraction(1))),
    "unit-triangle": PolytopeDomain(
        (Fraction(0), Fraction(0)),
        (Fraction(1), Fraction(1)),
        A=((Fraction(1), Fraction(1)),),
        b=(Fraction(1),),
    ),
}


def _rationals(raw: Any, name: str) -> tuple[Fraction, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{name} must be a list of 'p/q' strings")
    return tuple(parse_rational(v, name=name) for v in raw)


def domain_from_json(payload: Mapping[str, Any]) -> BoxDomain:
    if not isinstance(payload, Mapping):
        raise ConfigError("domain descriptor must be a JSON object")
    unknown = set(payload) - {"schema", "kind", "lower", "upper", "A", "b", "anchor"}
    if unknown:
        raise ConfigError(f"unknown domain keys: {sorted(unknown)}")
    if payload.get("schema", DOMAIN_SCHEMA) != DOMAIN_SCHEMA:
        raise ConfigError(f"unsupported domain schema: {payload.get('schema')!r}")
    lower = _rationals(payload.get("lower"), "lower")
    upper = _rationals(payload.get("upper"), "upper")
    kind = payload.get("kind", "box")
    if kind == "box":
        return BoxDomain(lower, upper)
    if kind == "polytope":
        rows = payload.get("A", [])
        if not isinstance(rows, list):
            raise ConfigError("A must be a list of rows")
        anchor_raw = payload.get("anchor")
        domain = PolytopeDomain(
            lower,
            upper,
            A=tuple(_rationals(r, "A") for r in rows),
            b=_rationals(payload.get("b", []), "b"),
            explicit_anchor=None if anchor_raw is None else _rationals(anchor_raw, "anchor"),
        )
        if anchor_raw is not None and not domain.contains(domain.anchor()):
            raise ConfigError("declared polytope anchor is outside the polytope")
        return domain
    raise ConfigError(f"unsupported domain kind: {kind!r}")


def load_domain(spec: str) -> BoxDomain:
    """Built-in name or path to a JSON descriptor."""
    if spec in BUILTIN_DOMAINS:
        return BUILTIN_DOMAINS[spec]
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"unknown domain (not built-in, no such file): {spec}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"domain file is not valid JSON: {spec}: {exc}") from exc
    require_descriptor("domain", payload)
    return domain_from_json(payload)


def iter_vertices(domain: BoxDomain) -> Iterator[SparseVector]:
    for corner in itertools.product(*zip(domain.lower, domain.upper)):
        yield SparseVector.dense(corner)

