#!/usr/bin/env python3
"""
Geometry of the triangle fan Delta = U_n co{0, e_n, e_{n+1}} in l1, the
displacement maps on it, the four-term norm-equivalence bounds for separated
sequences, and the sampled certification of the composed map g o r.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Generic, Mapping, Sequence, TypeVar

import numpy as np

from core_spaces import (
    PolyhedralSeminorm,
    SparseVector,
    combination,
    format_rational,
    parse_rational,
    seminorm_eval,
    verify_span_separated,
)
from errors import ConfigError, DomainEscape, HypothesisViolation, NotARetraction
from exact_lp import is_feasible
from sampling import make_rng, ordered_indices, rational_between, rational_unit, signed_rational, simplex_weights


log = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class DeltaPoint:
    """a e_n + b e_{n+1}; stored in canonical form (a > 0 unless apex)."""

    n: int
    a: Fraction
    b: Fraction

    def __post_init__(self) -> None:
        a, b = Fraction(self.a), Fraction(self.b)
        if self.n < 1:
            raise ValueError(f"triangle index must be >= 1, got {self.n}")
        if a < 0 or b < 0 or a + b > 1:
            raise ValueError(f"weights ({a}, {b}) are outside the triangle")
        n = self.n
        if a == 0 and b == 0:
            n = 1
        elif a == 0:
            n, a, b = n + 1, b, ZERO
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def apex(cls) -> "DeltaPoint":
        return cls(1, ZERO, ZERO)

    @property
    def is_apex(self) -> bool:
        return self.a == 0

    def mass(self) -> Fraction:
        return self.a + self.b

    def embed(self) -> SparseVector:
        return SparseVector({self.n: self.a, self.n + 1: self.b})

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "a": format_rational(self.a), "b": format_rational(self.b)}

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "DeltaPoint":
        unknown = set(payload) - {"n", "a", "b"}
        if unknown:
            raise ConfigError(f"unknown delta point keys: {sorted(unknown)}")
        try:
            return cls(int(payload["n"]), parse_rational(payload["a"], name="a"), parse_rational(payload["b"], name="b"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid delta point {dict(payload)!r}: {exc}") from exc


def embed_to_sparse(p: DeltaPoint) -> SparseVector:
    return p.embed()


def delta_distance(p: DeltaPoint, q: DeltaPoint) -> Fraction:
    """Closed-form l1 distance between canonical points."""
    if p.n > q.n:
        p, q = q, p
    if p.n == q.n:
        return abs(p.a - q.a) + abs(p.b - q.b)
    if q.n == p.n + 1:
        return p.a + abs(p.b - q.a) + q.b
    return p.a + p.b + q.a + q.b


def _triangle_projection(u: Fraction, v: Fraction) -> tuple[Fraction, Fraction, Fraction]:
    """l1 projection of (u, v) >= 0 onto {a, b >= 0, a + b <= 1}: (a, b, cost)."""
    if u + v <= 1:
        return u, v, ZERO
    a = max(ZERO, 1 - v)
    return a, 1 - a, u + v - 1


def retract_with_distance(x: SparseVector) -> tuple[DeltaPoint, Fraction]:
    """Nearest point of Delta to x (negatives clamped first) and the exact l1 distance."""
    negative_mass = sum((-v for _, v in x.items() if v < 0), ZERO)
    pos = x.clamp_nonnegative()
    if not pos:
        return DeltaPoint.apex(), negative_mass
    total = pos.l1()
    candidates = sorted({n for i in pos.support for n in (i - 1, i) if n >= 1})
    best: tuple[Fraction, int, Fraction, Fraction] | None = None
    for n in candidates:
        u, v = pos[n], pos[n + 1]
        a, b, cost = _triangle_projection(u, v)
        dist = total - u - v + cost
        if best is None or dist < best[0]:
            best = (dist, n, a, b)
    assert best is not None
    dist, n, a, b = best
    return DeltaPoint(n, a, b), dist + negative_mass


def nearest_point_retraction(x: SparseVector) -> DeltaPoint:
    return retract_with_distance(x)[0]


def distance_to_delta(x: SparseVector) -> Fraction:
    return retract_with_distance(x)[1]


def shift_map(p: DeltaPoint) -> DeltaPoint:
    """(n, a, b) -> (n + 1, a, b); the apex is its only fixed point."""
    if p.is_apex:
        return p
    return DeltaPoint(p.n + 1, p.a, p.b)


def shift_displacement(p: DeltaPoint) -> Fraction:
    return p.a + abs(p.a - p.b) + p.b


def shift_sparse(x: SparseVector) -> SparseVector:
    return SparseVector({i + 1: v for i, v in x.items()})


def in_positive_ball(x: SparseVector) -> bool:
    return x.is_nonnegative() and x.l1() <= 1


def baker_affine(x: SparseVector) -> SparseVector:
    """x -> (1 - ||x||) e_1 + shift(x) on the positive unit ball of l1."""
    if not in_positive_ball(x):
        raise DomainEscape("baker map is defined on the positive unit ball of l1")
    return SparseVector.basis(1, 1 - x.l1()) + shift_sparse(x)


def baker_no_fixed_point_certificate(support_bound: int) -> dict[str, Any]:
    """Fixed points with support in {1..N}: x_1 = 1 - ||x||, x_{i+1} = x_i, x_{N+1} = 0."""
    if support_bound < 1:
        raise ConfigError("support bound must be >= 1")
    N = support_bound
    steps = [
        {"kind": "coordinate-shift", "claim": "x_{i+1} = x_i for every i >= 1"},
        {"kind": "support", "claim": f"x_{N + 1} = 0 since the support lies in 1..{N}"},
        {"kind": "propagate", "claim": f"x_{N} = x_{N - 1} = ... = x_1 = 0" if N > 1 else "x_1 = 0"},
        {"kind": "first-coordinate", "claim": "x_1 = 1 - ||x|| = 1, contradicting x_1 = 0"},
    ]
    # same argument as a linear system: no nonnegative solution
    n_vars = N
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    first = [ONE] * n_vars
    first[0] += 1
    rows.append(first)
    rhs.append(ONE)
    for i in range(1, N):
        row = [ZERO] * n_vars
        row[i] = ONE
        row[i - 1] = -ONE
        rows.append(row)
        rhs.append(ZERO)
    last = [ZERO] * n_vars
    last[N - 1] = ONE
    rows.append(last)
    rhs.append(ZERO)
    lp = is_feasible(a_eq=rows, b_eq=rhs, n=n_vars)
    return {"support_bound": N, "steps": steps, "lp_status": lp.status, "infeasible": lp.status == "infeasible"}


def baker_trend(sizes: Sequence[int]) -> list[tuple[int, Fraction]]:
    """Displacement of the uniform vector (1/N)(e_1 + ... + e_N); equals 2/N."""
    out = []
    for N in sizes:
        x = SparseVector({i: Fraction(1, N) for i in range(1, N + 1)})
        out.append((N, (x - baker_affine(x)).l1()))
    return out


T = TypeVar("T")


@dataclass(frozen=True)
class DisplacementMap(Generic[T]):
    """A map on Delta (kind 'delta') or on the positive l1 ball (kind 'ball')."""

    name: str
    apply: Callable[[T], T]
    distance: Callable[[T, T], Fraction]
    kind: str = "delta"

    def __call__(self, x: T) -> T:
        try:
            y = self.apply(x)
        except ValueError as exc:
            raise DomainEscape(f"{self.name}: image left the codomain: {exc}") from exc
        if self.kind == "delta" and not isinstance(y, DeltaPoint):
            raise DomainEscape(f"{self.name}: image is not a point of Delta")
        if self.kind == "ball" and not in_positive_ball(y):  # type: ignore[arg-type]
            raise DomainEscape(f"{self.name}: image left the positive unit ball")
        return y

    def displacement(self, x: T) -> Fraction:
        return self.distance(x, self(x))


def _l1_distance(x: SparseVector, y: SparseVector) -> Fraction:
    return (x - y).l1()


SHIFT = DisplacementMap("shift", shift_map, delta_distance, "delta")
BAKER = DisplacementMap("baker", baker_affine, _l1_distance, "ball")


@dataclass(frozen=True)
class E1Constants:
    delta: Fraction
    M: Fraction
    c: tuple[Fraction, Fraction, Fraction, Fraction]
    m: Fraction

    @classmethod
    def from_params(cls, delta: Fraction, M: Fraction) -> "E1Constants":
        if delta <= 0 or M < delta:
            raise ConfigError("need 0 < delta <= M")
        ratio = delta / M
        c = tuple(Fraction(1, 2 ** (2 * i + 1)) * ratio ** (i - 1) for i in range(1, 5))
        consts = cls(delta, M, c, delta**4 / (32 * M**3))  # type: ignore[arg-type]
        if sum(consts.c) >= 1:
            raise AssertionError("c_1 + ... + c_4 must be < 1")
        return consts

    def to_json(self) -> dict[str, Any]:
        return {
            "delta": format_rational(self.delta),
            "M": format_rational(self.M),
            "c": [format_rational(v) for v in self.c],
            "m": format_rational(self.m),
        }


@dataclass(frozen=True)
class E1Report:
    trials: int
    lower_violations: int
    upper_violations: int
    min_lower_slack: Fraction
    min_upper_slack: Fraction
    i0_counts: dict[int, int]
    step_bound_shortfalls: int
    constants: E1Constants

    def to_json(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "lower_violations": self.lower_violations,
            "upper_violations": self.upper_violations,
            "min_lower_slack": format_rational(self.min_lower_slack),
            "min_upper_slack": format_rational(self.min_upper_slack),
            "i0_counts": {str(k): v for k, v in sorted(self.i0_counts.items())},
            "step_bound_shortfalls": self.step_bound_shortfalls,
            "constants": self.constants.to_json(),
        }


def largest_dominant_index(alpha: Sequence[Fraction], c: Sequence[Fraction]) -> int:
    """Greatest i (1-based) with |alpha_i| >= c_i * sum |alpha|."""
    s = sum((abs(a) for a in alpha), ZERO)
    found = [i for i in range(1, 5) if abs(alpha[i - 1]) >= c[i - 1] * s]
    if not found:
        raise AssertionError("c_1 + ... + c_4 < 1 guarantees a dominant index")
    return found[-1]


def e1_bounds_check(
    points: Sequence[SparseVector],
    rho: PolyhedralSeminorm,
    consts: E1Constants,
    trials: int,
    seed: int,
    rho0: PolyhedralSeminorm | None = None,
) -> E1Report:
    """
    Checks m sum|alpha_i| <= rho(sum alpha_i x_{k_i}) <= M sum|alpha_i| on random
    index quadruples and coefficients, after checking the sequence hypotheses.
    """
    if len(points) < 4:
        raise ConfigError("need at least 4 points for four-term combinations")
    base = rho0 or rho
    bad = verify_span_separated(points, base, consts.delta)
    if bad is not None:
        raise HypothesisViolation(f"point {bad + 1} breaks the span separation at delta={consts.delta}")
    for n, x in enumerate(points, start=1):
        value = seminorm_eval(rho, x)
        if value > consts.M:
            raise HypothesisViolation(f"rho(x_{n}) = {value} exceeds M = {consts.M}")
        if rho0 is not None and value < seminorm_eval(rho0, x):
            raise HypothesisViolation(f"rho(x_{n}) < rho0(x_{n})")

    rng = make_rng(seed)
    lower_bad = upper_bad = shortfalls = 0
    min_lower: Fraction | None = None
    min_upper: Fraction | None = None
    i0_counts: dict[int, int] = {}
    for _ in range(trials):
        ks = ordered_indices(rng, 4, len(points))
        alpha = [signed_rational(rng) for _ in range(4)]
        if not any(alpha):
            alpha[0] = ONE
        s = sum((abs(a) for a in alpha), ZERO)
        value = seminorm_eval(rho, combination(alpha, [points[k - 1] for k in ks]))
        lower = value - consts.m * s
        upper = consts.M * s - value
        lower_bad += lower < 0
        upper_bad += upper < 0
        min_lower = lower if min_lower is None else min(min_lower, lower)
        min_upper = upper if min_upper is None else min(min_upper, upper)
        i0 = largest_dominant_index(alpha, consts.c)
        i0_counts[i0] = i0_counts.get(i0, 0) + 1
        if consts.c[i0 - 1] * consts.delta / 2 < consts.m:
            shortfalls += 1
    log.info(
        "four-term bounds checked",
        extra={"trials": trials, "lower_violations": lower_bad, "upper_violations": upper_bad},
    )
    return E1Report(
        trials=trials,
        lower_violations=lower_bad,
        upper_violations=upper_bad,
        min_lower_slack=min_lower if min_lower is not None else ZERO,
        min_upper_slack=min_upper if min_upper is not None else ZERO,
        i0_counts=i0_counts,
        step_bound_shortfalls=shortfalls,
        constants=consts,
    )


@dataclass(frozen=True)
class Distortion:
    lower: Fraction
    upper: Fraction
    pairs: int


@dataclass(frozen=True)
class ChainedTriangleDomain:
    """D = U_n co{0, x_n, x_{n+1}} with (n, a, b) <-> a x_n + b x_{n+1}."""

    points: tuple[SparseVector, ...]
    rho0: PolyhedralSeminorm = field(default_factory=PolyhedralSeminorm.l1)

    @property
    def triangles(self) -> int:
        return len(self.points) - 1

    def point_at(self, p: DeltaPoint) -> SparseVector:
        if p.n > len(self.points) or (p.b and p.n + 1 > len(self.points)):
            raise ConfigError(f"triangle {p.n} is beyond the {len(self.points)} chained points")
        out = self.points[p.n - 1].scale(p.a)
        if p.b:
            out = out + self.points[p.n].scale(p.b)
        return out

    def contains(self, y: SparseVector) -> bool:
        """Exact LP membership test, one small feasibility problem per triangle."""
        if not y:
            return True
        for n in range(1, self.triangles + 1):
            x1, x2 = self.points[n - 1], self.points[n]
            coords = sorted(set(y.support) | set(x1.support) | set(x2.support))
            a_eq = [[x1[i], x2[i]] for i in coords]
            b_eq = [y[i] for i in coords]
            if is_feasible(a_ub=[[ONE, ONE]], b_ub=[ONE], a_eq=a_eq, b_eq=b_eq, n=2).is_optimal:
                return True
        return False

    def sample(self, rng: np.random.Generator, count: int) -> list[DeltaPoint]:
        out = []
        for _ in range(count):
            n = int(rng.integers(1, self.triangles + 1))
            a, b, _ = simplex_weights(rng, 3)
            out.append(DeltaPoint(n, a, b))
        return out

    def distortion(self, rng: np.random.Generator, pairs: int) -> Distortion:
        """Extremes of rho0(P - Q) / d_Delta(p, q) over sampled pairs."""
        lo: Fraction | None = None
        hi: Fraction | None = None
        used = 0
        for _ in range(pairs):
            p, q = self.sample(rng, 2)
            d = delta_distance(p, q)
            if d == 0:
                continue
            ratio = seminorm_eval(self.rho0, self.point_at(p) - self.point_at(q)) / d
            lo = ratio if lo is None else min(lo, ratio)
            hi = ratio if hi is None else max(hi, ratio)
            used += 1
        if lo is None or hi is None:
            raise ConfigError("distortion sampling produced only degenerate pairs")
        return Distortion(lo, hi, used)


def build_D(points: Sequence[SparseVector], rho0: PolyhedralSeminorm | None = None) -> ChainedTriangleDomain:
    if len(points) < 2:
        raise ConfigError("D needs at least two chained points")
    return ChainedTriangleDomain(tuple(points), rho0 or PolyhedralSeminorm.l1())


@dataclass(frozen=True)
class DeltaRegion:
    """Points of the first `max_index` triangles with a + b >= min_mass."""

    min_mass: Fraction = ZERO
    max_index: int = 32

    def __post_init__(self) -> None:
        if not 0 <= self.min_mass <= 1:
            raise ConfigError("region mass bound must lie in [0, 1]")
        if self.max_index < 1:
            raise ConfigError("region needs at least one triangle")

    @classmethod
    def parse(cls, spec: str | None) -> "DeltaRegion":
        """'all', 'mass>=p/q', optionally ',triangles=N'."""
        if not spec or spec == "all":
            return cls()
        min_mass, max_index = ZERO, 32
        for part in spec.split(","):
            key, sep, value = part.strip().partition("=")
            if key == "mass>" and sep:
                min_mass = parse_rational(value, name="region mass")
            elif key == "triangles" and sep:
                try:
                    max_index = int(value)
                except ValueError as exc:
                    raise ConfigError(f"bad triangle count in region: {value!r}") from exc
            else:
                raise ConfigError(f"unsupported region spec: {spec!r}")
        return cls(min_mass, max_index)

    def contains(self, p: DeltaPoint) -> bool:
        return p.mass() >= self.min_mass and p.n <= self.max_index

    def sample(self, rng: np.random.Generator) -> DeltaPoint:
        # a = 0 canonicalizes onto triangle n + 1, which may leave the region
        while True:
            s = rational_between(rng, self.min_mass, ONE)
            t = rational_unit(rng)
            n = int(rng.integers(1, self.max_index + 1))
            p = DeltaPoint(n, s * t, s * (1 - t))
            if self.contains(p):
                return p

    def to_json(self) -> dict[str, Any]:
        return {"min_mass": format_rational(self.min_mass), "max_index": self.max_index}


@dataclass(frozen=True)
class LipschitzEstimate:
    value: Fraction
    pairs: int
    degenerate: int


def estimate_lipschitz(
    g: DisplacementMap, sampler: Callable[[np.random.Generator], Any], pairs: int, seed: int
) -> LipschitzEstimate:
    """max dist(g p, g q) / dist(p, q) over seeded pairs; p = q pairs are counted and skipped."""
    if pairs < 1:
        raise ConfigError("pairs must be >= 1")
    rng = make_rng(seed)
    best = ZERO
    degenerate = 0
    for _ in range(pairs):
        p, q = sampler(rng), sampler(rng)
        d = g.distance(p, q)
        if d == 0:
            degenerate += 1
            continue
        best = max(best, g.distance(g(p), g(q)) / d)
    return LipschitzEstimate(best, pairs, degenerate)


def estimate_min_displacement(
    g: DisplacementMap, sampler: Callable[[np.random.Generator], Any], samples: int, seed: int
) -> tuple[Fraction, Any]:
    """Smallest sampled dist(x, g x): an upper estimate of the true infimum."""
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    rng = make_rng(seed)
    best: tuple[Fraction, Any] | None = None
    for _ in range(samples):
        x = sampler(rng)
        value = g.displacement(x)
        if best is None or value < best[0]:
            best = (value, x)
    assert best is not None
    return best


@dataclass(frozen=True)
class CertificationReport:
    lipschitz_estimate: Fraction
    displacement_min_estimate: Fraction
    epsilon_bound: Fraction
    samples: int
    seed: int
    region: dict[str, Any]
    degenerate_pairs: int
    chain_checked: int
    chain_violations: int

    @property
    def certified(self) -> bool:
        return self.displacement_min_estimate > 0 and self.chain_violations == 0

    def to_json(self) -> dict[str, Any]:
        return {
            "lipschitz_estimate": format_rational(self.lipschitz_estimate),
            "lipschitz_estimate_float": float(self.lipschitz_estimate),
            "displacement_min_estimate": format_rational(self.displacement_min_estimate),
            "displacement_min_estimate_float": float(self.displacement_min_estimate),
            "epsilon_bound": format_rational(self.epsilon_bound),
            "epsilon_bound_float": float(self.epsilon_bound),
            "samples": self.samples,
            "seed": self.seed,
            "region": self.region,
            "degenerate_pairs": self.degenerate_pairs,
            "chain_checked": self.chain_checked,
            "chain_violations": self.chain_violations,
            "certified": self.certified,
        }


def epsilon_bound(eta: Fraction, lipschitz: Fraction) -> Fraction:
    return eta / (lipschitz + 2)


def perturb(rng: np.random.Generator, x: SparseVector, scale: Fraction, spread: int = 3) -> SparseVector:
    """Add a small nonnegative bump on a few coordinates near the support of x."""
    top = max(x.support, default=1)
    bump = {int(rng.integers(1, top + spread + 1)): scale * rational_unit(rng) for _ in range(spread)}
    return x + SparseVector(bump)


def compose_pipeline(
    g: DisplacementMap,
    retraction: Callable[[SparseVector], DeltaPoint],
    region: DeltaRegion,
    samples: int,
    seed: int,
    perturbation: Fraction = ZERO,
) -> tuple[Callable[[SparseVector], SparseVector], CertificationReport]:
    """
    f = g o r on sampled C points. C samples are region points, optionally
    pushed off Delta by `perturbation`. The displacement estimate runs over the
    region samples and the retracted C samples.
    """
    if g.kind != "delta":
        raise ConfigError(f"{g.name} is not a map on Delta")
    rng = make_rng(seed)
    d_points = [region.sample(rng) for _ in range(samples)]
    for p in d_points:
        back = retraction(p.embed())
        if back != p:
            raise NotARetraction(f"r(x) = {back} differs from x = {p} on Delta")

    c_points = [p.embed() for p in d_points]
    if perturbation:
        c_points = [perturb(rng, x, perturbation) for x in c_points]
    retracted = [retraction(x) for x in c_points]

    lip = estimate_lipschitz(g, region.sample, samples, seed)
    pool = d_points + retracted
    eta = min(g.displacement(p) for p in pool)
    eps = epsilon_bound(eta, lip.value)

    def composed(x: SparseVector) -> SparseVector:
        return g(retraction(x)).embed()

    violations = 0
    for x, rx in zip(c_points, retracted):
        dist_d = (x - rx.embed()).l1()
        moved = (x - composed(x)).l1()
        if dist_d < eps:
            ok = moved >= eta - (1 + lip.value) * dist_d
        else:
            ok = moved >= eps
        violations += not ok
    log.info(
        "pipeline certified" if eta > 0 and not violations else "pipeline not certified",
        extra={"map": g.name, "eta": str(eta), "lipschitz": str(lip.value), "epsilon": str(eps)},
    )
    report = CertificationReport(
        lipschitz_estimate=lip.value,
        displacement_min_estimate=eta,
        epsilon_bound=eps,
        samples=samples,
        seed=seed,
        region=region.to_json(),
        degenerate_pairs=lip.degenerate,
        chain_checked=len(c_points),
        chain_violations=violations,
    )
    return composed, report
