#!/usr/bin/env python3
"""
Orbits, Cesaro averages with the exact telescoping identity, affinity checks,
and cluster-point extraction for maps on compact boxes.

Points are any exact vector type supporting +, -, scale() and / by an int
(SparseVector, FiniteMeasureModel).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Generic, Iterator, Protocol, Sequence, TypeVar

import numpy as np

from core_spaces import SparseVector
from domains import BoxDomain
from errors import ConfigError, DomainEscape
from sampling import make_rng, rational_unit


log = logging.getLogger(__name__)


class VectorLike(Protocol):
    def __add__(self, other: Any) -> Any: ...
    def __sub__(self, other: Any) -> Any: ...
    def scale(self, factor: Any) -> Any: ...
    def __truediv__(self, divisor: Any) -> Any: ...


P = TypeVar("P", bound=VectorLike)


def _always(_: Any) -> bool:
    return True


@dataclass(frozen=True)
class MapDescriptor(Generic[P]):
    """A self-map f: C -> C with its evaluation norm and domain test."""

    name: str
    apply: Callable[[P], P]
    norm: Callable[[P], Fraction]
    affine: bool = False
    contains: Callable[[P], bool] = field(default=_always)
    kind: str = "vector"
    description: str = ""

    def __call__(self, x: P) -> P:
        return self.apply(x)

    def distance(self, x: P, y: P) -> Fraction:
        return self.norm(x - y)

    def residual(self, x: P) -> Fraction:
        return self.norm(x - self.apply(x))


def iterate_orbit(f: MapDescriptor[P], y1: P, steps: int) -> list[P]:
    """[y_1, ..., y_{steps+1}] with y_{k+1} = f(y_k)."""
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    if not f.contains(y1):
        raise DomainEscape(f"start point is outside the domain of {f.name}")
    orbit = [y1]
    y = y1
    for k in range(steps):
        y = f(y)
        if not f.contains(y):
            raise DomainEscape(f"{f.name}: iterate y_{k + 2} left the domain")
        orbit.append(y)
    return orbit


@dataclass(frozen=True)
class CesaroState(Generic[P]):
    k: int
    y_sum: P
    y_next: P
    y_first: P

    @property
    def x_k(self) -> P:
        return self.y_sum / self.k

    def identity_vector(self) -> P:
        """(y_1 - y_{k+1}) / k, which equals x_k - f(x_k) for affine f."""
        return (self.y_first - self.y_next) / self.k

    def displacement(self, f: MapDescriptor[P]) -> P:
        x = self.x_k
        return x - f(x)

    def residual(self, f: MapDescriptor[P]) -> Fraction:
        return f.norm(self.displacement(f))

    def identity_holds(self, f: MapDescriptor[P]) -> bool:
        return self.displacement(f) == self.identity_vector()


def cesaro_sequence(f: MapDescriptor[P], y1: P, k_max: int) -> Iterator[CesaroState[P]]:
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    if not f.contains(y1):
        raise DomainEscape(f"start point is outside the domain of {f.name}")
    y = y1
    total = y1
    for k in range(1, k_max + 1):
        y_next = f(y)
        if not f.contains(y_next):
            raise DomainEscape(f"{f.name}: iterate y_{k + 1} left the domain")
        yield CesaroState(k=k, y_sum=total, y_next=y_next, y_first=y1)
        total = total + y_next
        y = y_next


def cesaro_residuals(f: MapDescriptor[P], y1: P, k_max: int) -> Iterator[tuple[int, Fraction]]:
    """(k, ||y_1 - y_{k+1}|| / k); exact residual of x_k only when f is affine."""
    if not f.affine:
        raise ConfigError(f"{f.name} is not declared affine; use cesaro_sequence")
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    if not f.contains(y1):
        raise DomainEscape(f"start point is outside the domain of {f.name}")
    y = y1
    for k in range(1, k_max + 1):
        y = f(y)
        if not f.contains(y):
            raise DomainEscape(f"{f.name}: iterate y_{k + 1} left the domain")
        yield k, f.norm(y1 - y) / k


Sampler = Callable[[np.random.Generator], Any]


def verify_affine(
    f: MapDescriptor[P], sampler: Sampler, trials: int, seed: int
) -> tuple[P, P, Fraction] | None:
    """First (x, y, t) with f(tx + (1-t)y) != t f(x) + (1-t) f(y), or None."""
    rng = make_rng(seed)
    for _ in range(trials):
        x = sampler(rng)
        y = sampler(rng)
        t = rational_unit(rng)
        mixed = x.scale(t) + y.scale(1 - t)
        if f(mixed) != f(x).scale(t) + f(y).scale(1 - t):
            log.info("affinity counterexample", extra={"map": f.name, "t": str(t)})
            return x, y, t
    return None


def _halves(lower: list[Fraction], upper: list[Fraction], axis: int) -> tuple[tuple[list, list], tuple[list, list]]:
    mid = (lower[axis] + upper[axis]) / 2
    left = (list(lower), [*upper[:axis], mid, *upper[axis + 1:]])
    right = ([*lower[:axis], mid, *lower[axis + 1:]], list(upper))
    return left, right


def _inside(x: SparseVector, lower: Sequence[Fraction], upper: Sequence[Fraction]) -> bool:
    return all(lo <= x[i + 1] <= hi for i, (lo, hi) in enumerate(zip(lower, upper)))


def _candidates(
    points: Sequence[SparseVector],
    alive: Sequence[int],
    lower: Sequence[Fraction],
    upper: Sequence[Fraction],
) -> Iterator[tuple[str, SparseVector]]:
    for i in reversed(alive):
        yield "sequence", points[i]
    yield "box-center", SparseVector.dense([(lo + hi) / 2 for lo, hi in zip(lower, upper)])
    for corner in itertools.product(*zip(lower, upper)):
        yield "box-corner", SparseVector.dense(corner)


def cluster_fixed_point(
    f: MapDescriptor[SparseVector],
    points: Sequence[SparseVector],
    domain: BoxDomain,
    tolerance: Fraction,
    max_depth: int = 64,
) -> SparseVector | None:
    """
    Nested halving toward the limit of the tail of `points`: each level keeps
    the half holding the latest surviving point. At each level the surviving
    points (latest first), the box center and the box corners that lie in the
    domain are tested against `tolerance`.
    """
    if not points:
        return None
    lower = list(domain.lower)
    upper = list(domain.upper)
    alive = list(range(len(points)))
    for depth in range(max_depth + 1):
        for source, candidate in _candidates(points, alive, lower, upper):
            if domain.contains(candidate) and f.residual(candidate) <= tolerance:
                log.info("cluster point found", extra={"depth": depth, "source": source})
                return candidate
        axis = depth % domain.dimension
        (l_lo, l_hi), (r_lo, r_hi) = _halves(lower, upper, axis)
        if _inside(points[alive[-1]], l_lo, l_hi):
            lower, upper = l_lo, l_hi
        else:
            lower, upper = r_lo, r_hi
        alive = [i for i in alive if _inside(points[i], lower, upper)]
    return None
