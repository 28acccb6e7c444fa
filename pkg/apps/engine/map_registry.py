#!/usr/bin/env python3
"""
Built-in maps and the piecewise-affine plugin format.

Vector plugin (schema "afp.map.v1"), first matching piece applies:
  {"schema": "afp.map.v1", "name": "fold", "dimension": 1, "affine": false,
   "pieces": [{"when": [{"a": ["1"], "b": "1/2"}], "matrix": [["2"]], "offset": ["0"]},
              {"when": [], "matrix": [["-2"]], "offset": ["2"]}]}

Delta plugin (schema "afp.delta-map.v1") acts on the weights (a, b) of a point
of triangle n and moves it to triangle n + index_shift:
  {"schema": "afp.delta-map.v1", "name": "tilt",
   "pieces": [{"when": [], "index_shift": 1, "matrix": [["1", "0"], ["0", "1"]], "offset": ["0", "0"]}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from affine_dynamics import MapDescriptor
from core_spaces import PolyhedralSeminorm, SparseVector, parse_rational, seminorm_eval
from delta_lab import BAKER, SHIFT, DeltaPoint, DisplacementMap, baker_affine, delta_distance, in_positive_ball
from domains import BoxDomain
from errors import ConfigError, DomainEscape
from json_contract import require_descriptor
from measure_lab import Ex2Map, FiniteMeasureModel, ex1_map, make_partition


MAP_SCHEMA = "afp.map.v1"
DELTA_MAP_SCHEMA = "afp.delta-map.v1"

HALF = Fraction(1, 2)
ROT_COS = Fraction(3, 5)
ROT_SIN = Fraction(4, 5)


def _coords(x: SparseVector, dim: int) -> list[Fraction]:
    if any(i > dim for i in x.support):
        raise DomainEscape(f"point has coordinates beyond dimension {dim}")
    return [x[i] for i in range(1, dim + 1)]


def _identity(x: SparseVector) -> SparseVector:
    return x


def _half_step(x: SparseVector) -> SparseVector:
    (t,) = _coords(x, 1)
    return SparseVector.dense([(t + 1) / 2])


def _square(x: SparseVector) -> SparseVector:
    (t,) = _coords(x, 1)
    return SparseVector.dense([t * t])


def _half_plus_quarter(x: SparseVector) -> SparseVector:
    (t,) = _coords(x, 1)
    return SparseVector.dense([t / 2 + Fraction(1, 4)])


def _rotation(cos: Fraction, sin: Fraction) -> Callable[[SparseVector], SparseVector]:
    def rotate(x: SparseVector) -> SparseVector:
        u, v = (c - HALF for c in _coords(x, 2))
        return SparseVector.dense([HALF + cos * u - sin * v, HALF + sin * u + cos * v])

    return rotate


@dataclass(frozen=True)
class VectorMapEntry:
    apply: Callable[[SparseVector], SparseVector]
    dimension: int | None
    affine: bool
    description: str
    # an irrational turn maps no polytope into itself; orbits started in the inscribed disk stay in the square
    orbit_only: bool = False


VECTOR_MAPS: dict[str, VectorMapEntry] = {
    "identity": VectorMapEntry(_identity, None, True, "x -> x"),
    "half-step": VectorMapEntry(_half_step, 1, True, "x -> (x + 1) / 2"),
    "square": VectorMapEntry(_square, 1, False, "x -> x^2"),
    "half-plus-quarter": VectorMapEntry(_half_plus_quarter, 1, True, "x -> x / 2 + 1/4"),
    "rotation90": VectorMapEntry(_rotation(Fraction(0), Fraction(1)), 2, True, "quarter turn about (1/2, 1/2)"),
    "rotation345": VectorMapEntry(
        _rotation(ROT_COS, ROT_SIN),
        2,
        True,
        "turn by the angle with cosine 3/5 about (1/2, 1/2); orbit runs only",
        orbit_only=True,
    ),
}

MEASURE_MAPS = ("ex2", "ex1")
BALL_MAPS = ("baker",)
DELTA_MAPS = ("shift",)

PLUGIN_PREFIX = "plugin:"


def builtin_names() -> list[str]:
    return sorted([*VECTOR_MAPS, *MEASURE_MAPS, *BALL_MAPS, *DELTA_MAPS])


def require_self_map(name: str) -> None:
    """The net search needs f(C) inside C."""
    entry = VECTOR_MAPS.get(name)
    if entry is not None and entry.orbit_only:
        raise ConfigError(f"map {name} maps no shipped domain into itself; use it with cesaro runs")


def _read_json(path_text: str) -> Mapping[str, Any]:
    path = Path(path_text)
    if not path.exists():
        raise ConfigError(f"plugin file not found: {path_text}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"plugin file is not valid JSON: {path_text}: {exc}") from exc
    if not isinstance(payload, Mapping):
        raise ConfigError("plugin descriptor must be a JSON object")
    return payload


@dataclass(frozen=True)
class AffinePiece:
    """Region {x : a.x <= b for every (a, b)} with the map x -> M x + c."""

    when: tuple[tuple[tuple[Fraction, ...], Fraction], ...]
    matrix: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]
    index_shift: int = 0

    def matches(self, coords: Sequence[Fraction]) -> bool:
        return all(sum((ai * xi for ai, xi in zip(a, coords)), Fraction(0)) <= b for a, b in self.when)

    def evaluate(self, coords: Sequence[Fraction]) -> list[Fraction]:
        return [
            sum((m * xi for m, xi in zip(row, coords)), Fraction(0)) + c
            for row, c in zip(self.matrix, self.offset)
        ]


def _rational_list(raw: Any, name: str, length: int) -> tuple[Fraction, ...]:
    if not isinstance(raw, list) or len(raw) != length:
        raise ConfigError(f"{name} must be a list of {length} 'p/q' strings")
    return tuple(parse_rational(v, name=name) for v in raw)


def parse_pieces(raw: Any, dim: int, allow_shift: bool) -> tuple[AffinePiece, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("plugin needs a non-empty 'pieces' list")
    pieces = []
    allowed = {"when", "matrix", "offset"} | ({"index_shift"} if allow_shift else set())
    for idx, item in enumerate(raw):
        if not isinstance(item, Mapping):
            raise ConfigError(f"piece {idx} must be an object")
        unknown = set(item) - allowed
        if unknown:
            raise ConfigError(f"piece {idx}: unknown keys {sorted(unknown)}")
        when_raw = item.get("when", [])
        if not isinstance(when_raw, list):
            raise ConfigError(f"piece {idx}: 'when' must be a list")
        when = []
        for cond in when_raw:
            if not isinstance(cond, Mapping) or set(cond) != {"a", "b"}:
                raise ConfigError(f"piece {idx}: each condition is {{\"a\": [...], \"b\": \"p/q\"}}")
            when.append((_rational_list(cond["a"], "a", dim), parse_rational(cond["b"], name="b")))
        matrix_raw = item.get("matrix")
        if not isinstance(matrix_raw, list) or len(matrix_raw) != dim:
            raise ConfigError(f"piece {idx}: matrix must have {dim} rows")
        matrix = tuple(_rational_list(row, "matrix", dim) for row in matrix_raw)
        offset = _rational_list(item.get("offset", ["0"] * dim), "offset", dim)
        shift = item.get("index_shift", 0)
        if not isinstance(shift, int) or isinstance(shift, bool):
            raise ConfigError(f"piece {idx}: index_shift must be an integer")
        pieces.append(AffinePiece(tuple(when), matrix, offset, shift))
    return tuple(pieces)


def _first_piece(pieces: Sequence[AffinePiece], coords: Sequence[Fraction], name: str) -> AffinePiece:
    for piece in pieces:
        if piece.matches(coords):
            return piece
    raise DomainEscape(f"plugin map {name} is undefined at {[str(c) for c in coords]}")


def load_vector_plugin(path_text: str) -> tuple[str, VectorMapEntry]:
    payload = _read_json(path_text)
    require_descriptor("map", payload)
    unknown = set(payload) - {"schema", "name", "dimension", "affine", "pieces"}
    if unknown:
        raise ConfigError(f"unknown map plugin keys: {sorted(unknown)}")
    if payload.get("schema") != MAP_SCHEMA:
        raise ConfigError(f"map plugin schema must be {MAP_SCHEMA!r}")
    dim = payload.get("dimension")
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("map plugin needs a positive integer 'dimension'")
    pieces = parse_pieces(payload.get("pieces"), dim, allow_shift=False)
    name = str(payload.get("name", Path(path_text).stem))

    def apply(x: SparseVector) -> SparseVector:
        coords = _coords(x, dim)
        return SparseVector.dense(_first_piece(pieces, coords, name).evaluate(coords))

    declared_affine = bool(payload.get("affine", len(pieces) == 1))
    return name, VectorMapEntry(apply, dim, declared_affine, f"piecewise-affine plugin ({len(pieces)} pieces)")


def load_delta_plugin(path_text: str) -> DisplacementMap:
    payload = _read_json(path_text)
    require_descriptor("delta-map", payload)
    unknown = set(payload) - {"schema", "name", "pieces"}
    if unknown:
        raise ConfigError(f"unknown delta plugin keys: {sorted(unknown)}")
    if payload.get("schema") != DELTA_MAP_SCHEMA:
        raise ConfigError(f"delta plugin schema must be {DELTA_MAP_SCHEMA!r}")
    pieces = parse_pieces(payload.get("pieces"), 2, allow_shift=True)
    name = str(payload.get("name", Path(path_text).stem))

    def apply(p: DeltaPoint) -> DeltaPoint:
        coords = (p.a, p.b)
        piece = _first_piece(pieces, coords, name)
        a, b = piece.evaluate(coords)
        target = p.n + piece.index_shift
        if target < 1:
            raise DomainEscape(f"plugin map {name} sends triangle {p.n} below 1")
        return DeltaPoint(target, a, b)

    return DisplacementMap(name, apply, delta_distance, "delta")


def vector_map(
    name: str,
    domain: BoxDomain | None = None,
    rho: PolyhedralSeminorm | None = None,
) -> MapDescriptor[SparseVector]:
    """MapDescriptor for a built-in or plugin map on a box or polytope."""
    if name.startswith(PLUGIN_PREFIX):
        label, entry = load_vector_plugin(name[len(PLUGIN_PREFIX):])
    elif name in VECTOR_MAPS:
        label, entry = name, VECTOR_MAPS[name]
    else:
        raise ConfigError(f"unknown vector map {name!r}; built-ins: {sorted(VECTOR_MAPS)}")
    if domain is not None and entry.dimension is not None and entry.dimension != domain.dimension:
        raise ConfigError(f"map {label} acts in dimension {entry.dimension}, domain has {domain.dimension}")
    norm_rho = rho or PolyhedralSeminorm.l1()
    return MapDescriptor(
        name=label,
        apply=entry.apply,
        norm=lambda v: seminorm_eval(norm_rho, v),
        affine=entry.affine,
        contains=domain.contains if domain is not None else (lambda _: True),
        kind="vector",
        description=entry.description,
    )


def measure_map(name: str, partition: str = "dyadic") -> MapDescriptor[FiniteMeasureModel]:
    if name == "ex2":
        f = Ex2Map(make_partition(partition))
        apply: Callable[[FiniteMeasureModel], FiniteMeasureModel] = f
        description = "mu -> mu(diffuse) delta_1 + sum_j mu(A_j) delta_{k_j}"
    elif name == "ex1":
        apply = ex1_map(baker_affine)
        description = "mu -> baker(P mu)"
    else:
        raise ConfigError(f"unknown measure map {name!r}; built-ins: {list(MEASURE_MAPS)}")
    return MapDescriptor(
        name=name,
        apply=apply,
        norm=lambda mu: mu.tv_norm(),
        affine=True,
        contains=lambda mu: mu.is_nonnegative() and mu.total() <= 1,
        kind="measure",
        description=description,
    )


def ball_map(name: str) -> MapDescriptor[SparseVector]:
    if name != "baker":
        raise ConfigError(f"unknown ball map {name!r}; built-ins: {list(BALL_MAPS)}")
    return MapDescriptor(
        name=name,
        apply=baker_affine,
        norm=lambda v: v.l1(),
        affine=True,
        contains=in_positive_ball,
        kind="ball",
        description="x -> (1 - ||x||) e_1 + shift(x)",
    )


def displacement_map(name: str) -> DisplacementMap:
    if name == "shift":
        return SHIFT
    if name == "baker":
        return BAKER
    if name.startswith(PLUGIN_PREFIX):
        return load_delta_plugin(name[len(PLUGIN_PREFIX):])
    raise ConfigError(f"unknown displacement map {name!r}; choose shift, baker or plugin:<path>")


def resolve_map(name: str, domain: BoxDomain | None = None, rho: PolyhedralSeminorm | None = None,
                partition: str = "dyadic") -> MapDescriptor[Any]:
    """Any map usable by orbit and averaging experiments."""
    if name in MEASURE_MAPS:
        return measure_map(name, partition)
    if name in BALL_MAPS:
        return ball_map(name)
    return vector_map(name, domain, rho)

