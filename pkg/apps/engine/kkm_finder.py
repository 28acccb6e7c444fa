#!/usr/bin/env python3
"""
epsilon-fixed points by the KKM covering argument.

  1. cover sampled values f(C) by a greedy net {x_i} of radius eps/2
  2. perturb the centers toward an interior anchor: z_i = (1 - theta) x_i + theta a
  3. scan the edgewise subdivision of the simplex over {z_i} at orders 1, 2, 4, ...
     for a vertex v with rho(f(v) - x_i) < eps/2 for every i in its carrier;
     such a vertex satisfies rho(f(v) - v) < eps

Barycentric and label indices are 0-based.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from core_spaces import PolyhedralSeminorm, SparseVector, combination, format_rational, seminorm_eval
from domains import BoxDomain
from errors import AfpError, AnchorOutsideC, ConfigError, DepthExhausted, DomainEscape, ImproperLabeling


log = logging.getLogger(__name__)

VectorMap = Callable[[SparseVector], SparseVector]
Composition = tuple[int, ...]


@dataclass(frozen=True)
class NetCover:
    centers: tuple[SparseVector, ...]
    radius: Fraction
    samples_used: int

    @property
    def epsilon(self) -> Fraction:
        return 2 * self.radius


@dataclass(frozen=True)
class AlmostConvexWitness:
    z_points: tuple[SparseVector, ...]
    interior_anchor: SparseVector
    shrink: Fraction


@dataclass(frozen=True)
class BarycentricPoint:
    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.weights) or sum(self.weights) != 1:
            raise ValueError("barycentric weights must be nonnegative and sum to 1")

    @classmethod
    def from_composition(cls, lam: Composition) -> "BarycentricPoint":
        r = sum(lam)
        return cls(tuple(Fraction(v, r) for v in lam))

    @property
    def carrier(self) -> tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.weights) if w > 0)

    def embed(self, z_points: Sequence[SparseVector]) -> SparseVector:
        return combination(self.weights, z_points)


def compositions(total: int, parts: int, positive: bool = False) -> Iterator[Composition]:
    """Weak (or positive) compositions of `total` into `parts`, lexicographic."""
    low = 1 if positive else 0
    if parts == 1:
        if total >= low:
            yield (total,)
        return
    for first in range(low, total - low * (parts - 1) + 1):
        for rest in compositions(total - first, parts - 1, positive):
            yield (first, *rest)


@dataclass(frozen=True)
class SubdivisionLattice:
    """Vertices lambda / r of the order-r edgewise subdivision of an (n-1)-simplex."""

    size: int
    order: int

    def __post_init__(self) -> None:
        if self.size < 1 or self.order < 1:
            raise ConfigError("lattice needs at least one vertex and order >= 1")

    @property
    def dimension(self) -> int:
        return self.size - 1

    def vertex_count(self) -> int:
        return math.comb(self.size - 1 + self.order, self.order)

    def vertices(self) -> Iterator[Composition]:
        return compositions(self.order, self.size)

    def vertices_on_carrier(self, carrier: Sequence[int]) -> Iterator[Composition]:
        """Vertices whose carrier is exactly `carrier`."""
        for inner in compositions(self.order, len(carrier), positive=True):
            lam = [0] * self.size
            for idx, v in zip(carrier, inner):
                lam[idx] = v
            yield tuple(lam)

    def point(self, lam: Composition) -> BarycentricPoint:
        return BarycentricPoint.from_composition(lam)


@dataclass(frozen=True)
class Witness:
    point: BarycentricPoint
    vector: SparseVector
    residual: Fraction
    epsilon: Fraction
    order: int

    def __post_init__(self) -> None:
        if not self.residual < self.epsilon:
            raise AfpError(f"witness residual {self.residual} is not below epsilon {self.epsilon}")

    def to_json(self) -> dict[str, object]:
        return {
            "vector": self.vector.to_json(),
            "weights": [format_rational(w) for w in self.point.weights if w],
            "carrier": list(self.point.carrier),
            "residual": format_rational(self.residual),
            "residual_float": float(self.residual),
            "epsilon": format_rational(self.epsilon),
            "order": self.order,
        }


def build_net(
    f: VectorMap,
    samples: Iterable[SparseVector],
    rho: PolyhedralSeminorm,
    epsilon: Fraction,
    domain: BoxDomain | None = None,
) -> NetCover:
    """Greedy cover of {f(x)} by open rho-balls of radius eps/2 centered at f-values."""
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    radius = epsilon / 2
    centers: list[SparseVector] = []
    used = 0
    for x in samples:
        y = f(x)
        used += 1
        if domain is not None and not domain.contains(y):
            raise DomainEscape(f"f maps a sample outside the domain: f({x!r}) = {y!r}")
        if all(seminorm_eval(rho, y - c) >= radius for c in centers):
            centers.append(y)
    return NetCover(tuple(centers), radius, used)


def almost_convex_witness(
    net: NetCover,
    domain: BoxDomain,
    anchor: SparseVector,
    rho: PolyhedralSeminorm,
    epsilon: Fraction,
) -> AlmostConvexWitness:
    if not domain.contains(anchor):
        raise AnchorOutsideC(f"anchor {anchor!r} is not in the domain")
    radius = epsilon / 2
    if all(domain.contains(x) for x in net.centers):
        return AlmostConvexWitness(net.centers, anchor, Fraction(0))
    spread = max(seminorm_eval(rho, x - anchor) for x in net.centers)
    theta = min(radius / spread, Fraction(1, 2)) if spread else Fraction(1, 2)
    for _ in range(128):
        z = tuple(x.scale(1 - theta) + anchor.scale(theta) for x in net.centers)
        close = all(seminorm_eval(rho, zi - xi) < radius for zi, xi in zip(z, net.centers))
        if close and all(domain.contains(zi) for zi in z):
            return AlmostConvexWitness(z, anchor, theta)
        theta /= 2
    raise DomainEscape("no perturbation of the net centers lands inside the domain")


def kkm_label(
    v: BarycentricPoint,
    f: VectorMap,
    rho: PolyhedralSeminorm,
    net: NetCover,
    witness: AlmostConvexWitness,
) -> int | None:
    """Lowest carrier index i with rho(f(v) - x_i) >= eps/2; None when unlabelable."""
    image = f(v.embed(witness.z_points))
    for i in v.carrier:
        if seminorm_eval(rho, image - net.centers[i]) >= net.radius:
            return i
    return None


def close_carriers(
    net: NetCover, rho: PolyhedralSeminorm, epsilon: Fraction, max_size: int
) -> dict[int, list[tuple[int, ...]]]:
    """Index sets of pairwise rho-closer-than-eps centers, by size, lexicographic."""
    n = len(net.centers)
    near: list[set[int]] = [set() for _ in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        if seminorm_eval(rho, net.centers[i] - net.centers[j]) < epsilon:
            near[i].add(j)
            near[j].add(i)
    by_size: dict[int, list[tuple[int, ...]]] = {1: [(i,) for i in range(n)]}
    for size in range(2, max_size + 1):
        grown = [
            (*clique, j)
            for clique in by_size[size - 1]
            for j in range(clique[-1] + 1, n)
            if all(j in near[i] for i in clique)
        ]
        if not grown:
            break
        by_size[size] = grown
    return by_size


@dataclass(frozen=True)
class SearchOutcome:
    witness: Witness
    net_size: int
    lattice_vertices_scanned: int
    shrink: Fraction


def find_epsilon_fixed_point(
    f: VectorMap,
    domain: BoxDomain,
    rho: PolyhedralSeminorm,
    epsilon: Fraction,
    max_order: int,
    resolution: int = 20,
    anchor: SparseVector | None = None,
) -> SearchOutcome:
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    if max_order < 1:
        raise ConfigError("max_order must be >= 1")
    net = build_net(f, domain.grid(resolution), rho, epsilon, domain)
    if anchor is None:
        anchor = domain.anchor()
    witness = almost_convex_witness(net, domain, anchor, rho, epsilon)
    carriers = close_carriers(net, rho, epsilon, domain.dimension + 1)
    log.info(
        "net built",
        extra={"net_size": len(net.centers), "shrink": str(witness.shrink), "resolution": resolution},
    )

    scanned = 0
    order = 1
    while order <= max_order:
        lattice = SubdivisionLattice(len(net.centers), order)
        before = scanned
        for size in sorted(carriers):
            for carrier in carriers[size]:
                for lam in lattice.vertices_on_carrier(carrier):
                    if order > 1 and all(v % 2 == 0 for v in lam):
                        continue
                    scanned += 1
                    v = lattice.point(lam)
                    if kkm_label(v, f, rho, net, witness) is not None:
                        continue
                    x = v.embed(witness.z_points)
                    residual = seminorm_eval(rho, f(x) - x)
                    if residual >= epsilon:
                        log.warning(
                            "unlabelable vertex failed re-verification",
                            extra={"order": order, "carrier": list(carrier), "residual": str(residual)},
                        )
                        continue
                    log.info("witness found", extra={"order": order, "scanned": scanned})
                    return SearchOutcome(
                        Witness(v, x, residual, epsilon, order),
                        len(net.centers),
                        scanned,
                        witness.shrink,
                    )
        log.debug("order scanned", extra={"order": order, "vertices": scanned - before})
        order *= 2
    raise DepthExhausted(max_order)


def witness_sequence(
    f: VectorMap,
    domain: BoxDomain,
    rho: PolyhedralSeminorm,
    epsilons: Sequence[Fraction],
    max_order: int,
    resolution: int = 20,
) -> list[Witness]:
    """One witness per eps, for a decreasing eps schedule."""
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigError("epsilon schedule must be strictly decreasing")
    return [
        find_epsilon_fixed_point(f, domain, rho, eps, max_order, resolution).witness
        for eps in epsilons
    ]


def lattice_cells(size: int, order: int) -> list[tuple[Composition, ...]]:
    """
    Cells of the order-r subdivision of the (size-1)-simplex, via the Freudenthal
    triangulation of the staircase r >= y_1 >= ... >= y_k >= 0; r^k cells.
    """
    k = size - 1
    if k == 0:
        return [((order,),)]

    def to_lambda(y: Sequence[int]) -> Composition:
        lam = [order - y[0]]
        lam += [y[i - 1] - y[i] for i in range(1, k)]
        lam.append(y[k - 1])
        return tuple(lam)

    def inside(y: Sequence[int]) -> bool:
        return order >= y[0] and all(y[i] >= y[i + 1] for i in range(k - 1)) and y[k - 1] >= 0

    cells: list[tuple[Composition, ...]] = []
    for base in itertools.product(range(order), repeat=k):
        for perm in itertools.permutations(range(k)):
            y = list(base)
            path = [tuple(y)]
            for axis in perm:
                y[axis] += 1
                path.append(tuple(y))
            if all(inside(p) for p in path):
                cells.append(tuple(to_lambda(p) for p in path))
    return cells


def sperner_fully_labeled(
    lattice: SubdivisionLattice, labeling: Mapping[Composition, int]
) -> list[tuple[Composition, ...]]:
    """Cells whose vertices carry all labels 0..n-1; labels must lie in each vertex's carrier."""
    for lam in lattice.vertices():
        label = labeling.get(lam)
        if label is None:
            raise ImproperLabeling(f"vertex {lam} has no label")
        if not 0 <= label < lattice.size or lam[label] == 0:
            raise ImproperLabeling(f"label {label} of vertex {lam} is outside its carrier")
    full = set(range(lattice.size))
    return [
        cell
        for cell in lattice_cells(lattice.size, lattice.order)
        if {labeling[v] for v in cell} == full
    ]


def grid_oracle_min_displacement(
    f: VectorMap, grid: Iterable[SparseVector], rho: PolyhedralSeminorm
) -> tuple[SparseVector, Fraction]:
    """Exact argmin of rho(x - f(x)) over the grid (first in grid order on ties)."""
    best: tuple[SparseVector, Fraction] | None = None
    for x in grid:
        value = seminorm_eval(rho, x - f(x))
        if best is None or value < best[1]:
            best = (x, value)
    if best is None:
        raise ConfigError("grid is empty")
    return best
