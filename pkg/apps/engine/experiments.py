#!/usr/bin/env python3
"""
Experiment configuration, dispatch and report assembly.

A report is {"schema", "version", "subcommand", "config", "results", "timing"};
`results` depends only on `config` (seed included), never on wall-clock state.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

import affine_dynamics as ad
import delta_lab as dl
import kkm_finder as kf
import measure_lab as ml
from core_spaces import (
    PolyhedralSeminorm,
    SparseVector,
    format_rational,
    parse_rational,
    span_separated_sequence,
    total_boundedness_probe,
    verify_span_separated,
)
from domains import BoxDomain, load_domain
from errors import ConfigError
from json_contract import report_schema_path, require_descriptor, validate_contract
from map_registry import displacement_map, require_self_map, resolve_map, vector_map
from sampling import box_stream, make_rng, ordered_indices, random_sparse, resolve_seed, simplex_weights


log = logging.getLogger(__name__)

ENGINE_VERSION = "0.1.0"
REPORT_SCHEMA = "afp.report.v1"
CONFIG_SCHEMA = "afp.config.v1"

SUBCOMMANDS = ("kkm", "cesaro", "ex2", "delta", "separate")
DELTA_OPS = ("distance", "retract", "certify", "e1", "pipeline", "build-d", "baker")

# every accepted parameter and its default, per subcommand
PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "kkm": {
        "map": "square",
        "domain": "unit-interval",
        "seminorm": "l1",
        "epsilon": "1/10",
        "max_order": 64,
        "resolution": 20,
        "schedule": None,
    },
    "cesaro": {
        "map": "half-step",
        "domain": "unit-interval",
        "seminorm": "l1",
        "start": "0",
        "steps": 100,
        "partition": "dyadic",
        "check_steps": 32,
        "affine_trials": 200,
        "tolerance": None,
    },
    "ex2": {
        "start": "diffuse",
        "steps": 10,
        "support_bound": 64,
        "partition": "dyadic",
        "j_max": 8,
    },
    "delta": {
        "op": "distance",
        "map": "shift",
        "p": "1:1:0",
        "q": "2:1:0",
        "x": "1:1,3:1",
        "samples": 1000,
        "region": "mass>=1/2",
        "delta": "9/10",
        "M": "1",
        "points": 16,
        "scale": "1",
        "trials": 1000,
        "perturb": "0",
        "support_bound": 64,
    },
    "separate": {
        "mode": "greedy",
        "stream": "random",
        "dimension": 2,
        "delta": "1/2",
        "limit": 200,
        "seminorm": "l1",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    report: str | None = None
    csv: str | None = None

    def __post_init__(self) -> None:
        if self.subcommand not in PARAM_DEFAULTS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}; choose from {list(SUBCOMMANDS)}")
        allowed = PARAM_DEFAULTS[self.subcommand]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown {self.subcommand} parameters: {sorted(unknown)}")
        merged = {**allowed, **{k: v for k, v in self.params.items() if v is not None}}
        object.__setattr__(self, "params", merged)

    def get(self, key: str) -> Any:
        return self.params[key]

    def rational(self, key: str) -> Fraction:
        return parse_rational(self.params[key], name=key)

    def integer(self, key: str, minimum: int = 0) -> int:
        value = self.params[key]
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(f"{key} must be an integer")
        try:
            number = int(value)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from exc
        if number < minimum:
            raise ConfigError(f"{key} must be >= {minimum}")
        return number

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": CONFIG_SCHEMA,
            "subcommand": self.subcommand,
            "params": dict(sorted(self.params.items())),
            "seed": self.seed,
            "report": self.report,
            "csv": self.csv,
        }

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(payload, Mapping):
            raise ConfigError("config must be a JSON object")
        if payload.get("schema") == REPORT_SCHEMA:
            payload = payload.get("config", {})
            if not isinstance(payload, Mapping):
                raise ConfigError("report has no embedded config object")
        unknown = set(payload) - {"schema", "subcommand", "params", "seed", "report", "csv"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if payload.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema: {payload.get('schema')!r}")
        params = payload.get("params", {})
        if not isinstance(params, Mapping):
            raise ConfigError("params must be a JSON object")
        seed = payload.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError("seed must be an integer")
        return cls(
            subcommand=str(payload.get("subcommand", "")),
            params=dict(params),
            seed=seed,
            report=payload.get("report"),
            csv=payload.get("csv"),
        )

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        file = Path(path)
        if not file.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            return cls.from_json(json.loads(file.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {path}: {exc}") from exc


Series = tuple[list[str], list[list[Any]]]


@dataclass(frozen=True)
class Report:
    subcommand: str
    config: dict[str, Any]
    results: dict[str, Any]
    timing: dict[str, Any]
    series: Series | None = None
    version: str = ENGINE_VERSION

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "version": self.version,
            "subcommand": self.subcommand,
            "config": self.config,
            "results": self.results,
            "timing": self.timing,
        }

    def results_json(self) -> str:
        return json.dumps(self.results, ensure_ascii=False, sort_keys=True)


def rational_pair(key: str, value: Fraction) -> dict[str, Any]:
    return {key: format_rational(value), f"{key}_float": float(value)}


def parse_vector(text: str) -> SparseVector:
    """'1/2,1/3' (dense from index 1) or '1:1/2,4:3' (sparse)."""
    text = text.strip()
    if not text:
        return SparseVector()
    parts = [p.strip() for p in text.split(",")]
    if any(":" in p for p in parts):
        entries: dict[int, Fraction] = {}
        for part in parts:
            idx, sep, value = part.partition(":")
            if not sep:
                raise ConfigError(f"mixed dense/sparse vector: {text!r}")
            try:
                index = int(idx)
            except ValueError as exc:
                raise ConfigError(f"vector index is not an integer: {idx!r}") from exc
            if index < 1:
                raise ConfigError("vector indices start at 1")
            entries[index] = entries.get(index, Fraction(0)) + parse_rational(value, name="vector")
        return SparseVector(entries)
    return SparseVector.dense([parse_rational(p, name="vector") for p in parts])


def parse_delta_point(text: str) -> dl.DeltaPoint:
    """'n:a:b'."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"delta point must be 'n:a:b', got {text!r}")
    try:
        return dl.DeltaPoint(int(parts[0]), parse_rational(parts[1], name="a"), parse_rational(parts[2], name="b"))
    except ValueError as exc:
        raise ConfigError(f"invalid delta point {text!r}: {exc}") from exc


def load_seminorm(spec: str) -> PolyhedralSeminorm:
    if spec in ("l1", "linf"):
        return PolyhedralSeminorm(spec)  # type: ignore[arg-type]
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"seminorm is not 'l1', 'linf' or an existing file: {spec!r}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"seminorm file is not valid JSON: {spec}: {exc}") from exc
    require_descriptor("seminorm", payload)
    return PolyhedralSeminorm.from_json(payload)


def _vector_json(x: SparseVector) -> dict[str, str]:
    return x.to_json()


def run_kkm(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], Series | None]:
    require_self_map(str(cfg.get("map")))
    domain = load_domain(cfg.get("domain"))
    rho = load_seminorm(cfg.get("seminorm"))
    f = vector_map(cfg.get("map"), domain, rho)
    epsilon = cfg.rational("epsilon")
    max_order = cfg.integer("max_order", 1)
    resolution = cfg.integer("resolution", 1)
    outcome = kf.find_epsilon_fixed_point(f.apply, domain, rho, epsilon, max_order, resolution)
    oracle_point, oracle_value = kf.grid_oracle_min_displacement(f.apply, domain.grid(resolution), rho)
    results: dict[str, Any] = {
        "map": f.name,
        "domain": domain.to_json(),
        "seminorm": rho.to_json(),
        **rational_pair("epsilon", epsilon),
        "witness": outcome.witness.to_json(),
        **rational_pair("residual", outcome.witness.residual),
        "order": outcome.witness.order,
        "net_size": outcome.net_size,
        "lattice_vertices_scanned": outcome.lattice_vertices_scanned,
        "shrink": format_rational(outcome.shrink),
        "grid_oracle": {"point": _vector_json(oracle_point), **rational_pair("residual", oracle_value)},
    }
    schedule = cfg.get("schedule")
    if schedule:
        epsilons = [parse_rational(s, name="schedule") for s in str(schedule).split(",")]
        seq = kf.witness_sequence(f.apply, domain, rho, epsilons, max_order, resolution)
        results["sequence"] = [w.to_json() for w in seq]
    return results, None


def _measure_sampler(rng: np.random.Generator) -> ml.FiniteMeasureModel:
    """Probability measure: four random atoms below 25 plus diffuse mass."""
    weights = simplex_weights(rng, 5)
    atoms = SparseVector(dict(zip(ordered_indices(rng, 4, 24), weights[:4])))
    return ml.FiniteMeasureModel(atoms, weights[4])


def _ball_sampler(rng: np.random.Generator) -> SparseVector:
    x = random_sparse(rng, 16, 4, bound=1, nonnegative=True)
    norm = x.l1()
    return x if norm <= 1 else x / norm


def _sampler_for(f: ad.MapDescriptor[Any], domain: BoxDomain) -> Callable[[np.random.Generator], Any]:
    if f.kind == "measure":
        return _measure_sampler
    if f.kind == "ball":
        return _ball_sampler
    return lambda rng: domain.sample(rng, 1)[0]


def _parse_start(f: ad.MapDescriptor[Any], text: str) -> Any:
    if f.kind == "measure":
        return ml.parse_start(text)
    return parse_vector(text)


def run_cesaro(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], Series | None]:
    domain = load_domain(cfg.get("domain"))
    rho = load_seminorm(cfg.get("seminorm"))
    f = resolve_map(cfg.get("map"), domain, rho, cfg.get("partition"))
    start = _parse_start(f, str(cfg.get("start")))
    steps = cfg.integer("steps", 1)
    check_steps = min(cfg.integer("check_steps", 0), steps)

    counterexample = ad.verify_affine(f, _sampler_for(f, domain), cfg.integer("affine_trials", 0), seed)
    affine = f.affine and counterexample is None

    rows: list[list[Any]] = []
    points: list[SparseVector] = []
    identity_ok = True
    checked = 0
    if affine:
        for k, residual in ad.cesaro_residuals(f, start, steps):
            rows.append([k, format_rational(residual), float(residual)])
        for state in ad.cesaro_sequence(f, start, check_steps) if check_steps else ():
            identity_ok = identity_ok and state.identity_holds(f)
            checked += 1
    tolerance = cfg.get("tolerance")
    want_points = tolerance is not None and f.kind == "vector"
    if not affine or want_points:
        for state in ad.cesaro_sequence(f, start, steps):
            if not affine:
                residual = state.residual(f)
                rows.append([state.k, format_rational(residual), float(residual)])
            if want_points:
                points.append(state.x_k)
    last_k, last_residual, _ = rows[-1]
    results: dict[str, Any] = {
        "map": f.name,
        "kind": f.kind,
        "declared_affine": f.affine,
        "affine_verified": affine,
        "affinity_counterexample": None
        if counterexample is None
        else {"t": format_rational(counterexample[2])},
        "steps": steps,
        "identity_checked": checked,
        "identity_holds": identity_ok if checked else None,
        "final": {"k": last_k, "residual": last_residual, "residual_float": float(Fraction(last_residual))},
    }
    if want_points:
        found = ad.cluster_fixed_point(f, points, domain, parse_rational(tolerance, name="tolerance"))
        results["cluster_point"] = None if found is None else _vector_json(found)
    return results, (["k", "residual", "residual_float"], rows)


def run_ex2(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], Series | None]:
    partition = ml.make_partition(cfg.get("partition"))
    f = ml.Ex2Map(partition)
    mu0 = ml.parse_start(str(cfg.get("start")))
    steps = cfg.integer("steps", 1)
    support_bound = cfg.integer("support_bound", 1)
    forward = ml.forward_indices(f.rule, cfg.integer("j_max", 1))

    orbit = ml.orbit_displacement(f, mu0, steps)
    descriptor = resolve_map("ex2", partition=cfg.get("partition"))
    averages = list(ad.cesaro_residuals(descriptor, mu0, steps))
    certificate = ml.no_fixed_point_certificate(f, support_bound)
    lp = ml.fixed_point_lp_check(f, support_bound)
    rows = [
        [k, format_rational(r), float(r), format_rational(c), float(c)]
        for (k, r), (_, c) in zip(orbit, averages)
    ]
    results = {
        "partition": partition.name,
        "start": mu0.to_json(),
        "forward_indices": forward,
        "orbit_residuals": [format_rational(r) for _, r in orbit],
        "cesaro_residuals": [format_rational(c) for _, c in averages],
        "certificate": certificate.to_json(),
        "lp_status": lp.status,
        "infeasible": certificate.infeasible and lp.status == "infeasible",
    }
    return results, (["k", "orbit_residual", "orbit_residual_float", "cesaro_residual", "cesaro_residual_float"], rows)


def _displacement_sampler(g: dl.DisplacementMap, region: dl.DeltaRegion) -> Callable[[np.random.Generator], Any]:
    return region.sample if g.kind == "delta" else _ball_sampler


def run_delta(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], Series | None]:
    op = cfg.get("op")
    if op not in DELTA_OPS:
        raise ConfigError(f"unknown delta op {op!r}; choose from {list(DELTA_OPS)}")
    results: dict[str, Any] = {"op": op}
    if op == "distance":
        p, q = parse_delta_point(cfg.get("p")), parse_delta_point(cfg.get("q"))
        results.update({"p": p.to_json(), "q": q.to_json(), **rational_pair("distance", dl.delta_distance(p, q))})
        return results, None
    if op == "retract":
        x = parse_vector(cfg.get("x"))
        point, dist = dl.retract_with_distance(x)
        results.update({"x": _vector_json(x), "point": point.to_json(), **rational_pair("distance", dist)})
        return results, None
    if op == "baker":
        cert = dl.baker_no_fixed_point_certificate(cfg.integer("support_bound", 1))
        trend = dl.baker_trend([2**i for i in range(1, 11)])
        results.update({
            "certificate": cert,
            "trend": [{"N": n, "displacement": format_rational(d)} for n, d in trend],
        })
        return results, None

    samples = cfg.integer("samples", 1)
    region = dl.DeltaRegion.parse(cfg.get("region"))
    if op == "certify":
        g = displacement_map(cfg.get("map"))
        sampler = _displacement_sampler(g, region)
        lip = dl.estimate_lipschitz(g, sampler, samples, seed)
        eta, _ = dl.estimate_min_displacement(g, sampler, samples, seed)
        report = dl.CertificationReport(
            lipschitz_estimate=lip.value,
            displacement_min_estimate=eta,
            epsilon_bound=dl.epsilon_bound(eta, lip.value),
            samples=samples,
            seed=seed,
            region=region.to_json() if g.kind == "delta" else {"positive_unit_ball": True},
            degenerate_pairs=lip.degenerate,
            chain_checked=0,
            chain_violations=0,
        )
        results.update({"map": g.name, "certification": report.to_json()})
        return results, None
    if op == "pipeline":
        g = displacement_map(cfg.get("map"))
        _, report = dl.compose_pipeline(
            g, dl.nearest_point_retraction, region, samples, seed, cfg.rational("perturb")
        )
        results.update({"map": g.name, "certification": report.to_json()})
        return results, None

    count = cfg.integer("points", 2)
    scale = cfg.rational("scale")
    points = [SparseVector.basis(n, scale) for n in range(1, count + 1)]
    if op == "build-d":
        D = dl.build_D(points)
        spread = D.distortion(make_rng(seed), samples)
        results.update({
            "points": count,
            "scale": format_rational(scale),
            **rational_pair("distortion_lower", spread.lower),
            **rational_pair("distortion_upper", spread.upper),
            "pairs": spread.pairs,
        })
        return results, None
    consts = dl.E1Constants.from_params(cfg.rational("delta"), cfg.rational("M"))
    e1 = dl.e1_bounds_check(points, PolyhedralSeminorm.l1(), consts, cfg.integer("trials", 1), seed)
    results.update({"points": count, "e1": e1.to_json()})
    return results, None


def _stream(cfg: ExperimentConfig, seed: int):
    dim = cfg.integer("dimension", 1)
    if cfg.get("stream") == "basis":
        return (SparseVector.basis(n) for n in range(1, 10**9))
    if cfg.get("stream") != "random":
        raise ConfigError("stream must be 'random' or 'basis'")
    zeros = tuple(Fraction(0) for _ in range(dim))
    ones = tuple(Fraction(1) for _ in range(dim))
    return box_stream(make_rng(seed), zeros, ones)


def run_separate(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], Series | None]:
    rho = load_seminorm(cfg.get("seminorm"))
    delta = cfg.rational("delta")
    limit = cfg.integer("limit", 1)
    mode = cfg.get("mode")
    if mode == "greedy":
        probe = total_boundedness_probe(_stream(cfg, seed), rho, delta, limit)
        accepted = list(probe.separated)
        extra = {"consumed": probe.consumed, "uncovered": probe.uncovered}
        verified = all(
            rho(accepted[i] - accepted[j]) > delta
            for i in range(len(accepted))
            for j in range(i + 1, len(accepted))
        )
    elif mode == "span":
        accepted = span_separated_sequence(_stream(cfg, seed), rho, delta, limit)
        extra = {"consumed": limit}
        verified = verify_span_separated(accepted, rho, delta) is None
    else:
        raise ConfigError("mode must be 'greedy' or 'span'")
    results = {
        "mode": mode,
        **rational_pair("delta", delta),
        "accepted": len(accepted),
        "points": [_vector_json(x) for x in accepted],
        "verified": verified,
        **extra,
    }
    return results, None


RUNNERS: dict[str, Callable[[ExperimentConfig, int], tuple[dict[str, Any], Series | None]]] = {
    "kkm": run_kkm,
    "cesaro": run_cesaro,
    "ex2": run_ex2,
    "delta": run_delta,
    "separate": run_separate,
}


def _json_ready(value: Any) -> Any:
    return json.loads(json.dumps(value, ensure_ascii=False, sort_keys=True))


def run(cfg: ExperimentConfig) -> Report:
    seed = resolve_seed(cfg.seed)
    config = ExperimentConfig(cfg.subcommand, cfg.params, seed, cfg.report, cfg.csv)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    log.info("experiment start", extra={"subcommand": cfg.subcommand, "seed": seed})
    results, series = RUNNERS[cfg.subcommand](config, seed)
    elapsed_ms = round((time.perf_counter() - t0) * 1000, 3)
    log.info("experiment finish", extra={"subcommand": cfg.subcommand, "elapsed_ms": elapsed_ms})
    report = Report(
        subcommand=cfg.subcommand,
        config=config.to_json(),
        results=_json_ready(results),
        timing={"started_at": started.isoformat(timespec="seconds"), "elapsed_ms": elapsed_ms},
        series=series,
    )
    validate_contract(report_schema_path(cfg.subcommand), report.to_json())
    return report


def write_outputs(report: Report, report_path: str | None, csv_path: str | None) -> None:
    if report_path:
        path = Path(report_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if csv_path:
        if report.series is None:
            raise ConfigError(f"{report.subcommand} produces no CSV series")
        header, rows = report.series
        path = Path(csv_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
