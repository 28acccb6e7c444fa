#!/usr/bin/env python3
"""
Evaluate the engine against its acceptance benchmarks.

Usage:
  python3 scripts/eval/eval_acceptance.py --enforce
  python3 scripts/eval/eval_acceptance.py --cesaro-steps 500 --e1-trials 500 --pairs 500 --sperner-trials 5
"""

from __future__ import annotations

import argparse
import json
import random
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any


ROOT = Path(__file__).resolve().parents[2]
ENGINE_DIR = ROOT / "apps" / "engine"
CLI = ROOT / "apps" / "cli" / "afp.py"
if str(ENGINE_DIR) not in sys.path:
    sys.path.insert(0, str(ENGINE_DIR))

import affine_dynamics as ad  # noqa: E402
import delta_lab as dl  # noqa: E402
import kkm_finder as kf  # noqa: E402
import measure_lab as ml  # noqa: E402
from core_spaces import PolyhedralSeminorm, SparseVector  # noqa: E402
from domains import BUILTIN_DOMAINS  # noqa: E402
from errors import DepthExhausted  # noqa: E402
from map_registry import measure_map, vector_map  # noqa: E402
from sampling import DEFAULT_SEED, make_rng  # noqa: E402


KKM_BENCHMARKS = (
    ("identity", "unit-interval"),
    ("square", "unit-interval"),
    ("half-plus-quarter", "unit-interval"),
    ("rotation90", "unit-square"),
)
KKM_EPSILONS = (Fraction(1, 5), Fraction(1, 10))
CERTIFICATE_ORDER = ("diffuse", "atom-1", "forward-support", "minimal-j", "total-mass")

CLI_BENCHMARKS = (
    ["kkm", "--map", "square", "--epsilon", "1/10"],
    ["cesaro", "--map", "ex2", "--start", "diffuse", "--steps", "50"],
    ["ex2", "--steps", "10", "--support-bound", "64"],
    ["delta", "--op", "pipeline", "--map", "shift", "--samples", "200"],
    ["delta", "--op", "e1", "--trials", "200"],
    ["separate", "--mode", "greedy", "--delta", "1/2", "--limit", "100"],
)


def _checkpoints(steps: int) -> list[int]:
    out: list[int] = []
    k = 1
    while k <= steps:
        out.append(k)
        k *= 2
    return out


def cesaro_metrics(steps: int) -> dict[str, Any]:
    f = measure_map("ex2")
    start = ml.FiniteMeasureModel.pure_diffuse()
    t0 = time.perf_counter()
    mismatches = [k for k, residual in ad.cesaro_residuals(f, start, steps) if residual != Fraction(2, k)]
    orbit = ad.iterate_orbit(f, start, steps)
    checkpoints = set(_checkpoints(steps))
    atoms: dict[int, Fraction] = {}
    diffuse = Fraction(0)
    residual_failures: list[int] = []
    identity_failures: list[int] = []
    for k in range(1, steps + 1):
        y = orbit[k - 1]
        for n, v in y.atoms.items():
            atoms[n] = atoms.get(n, Fraction(0)) + v
        diffuse += y.diffuse
        if k not in checkpoints:
            continue
        state = ad.CesaroState(
            k=k,
            y_sum=ml.FiniteMeasureModel(SparseVector(atoms), diffuse),
            y_next=orbit[k],
            y_first=start,
        )
        if state.residual(f) > Fraction(2, k):
            residual_failures.append(k)
        if not state.identity_holds(f):
            identity_failures.append(k)
    return {
        "steps": steps,
        "mismatches": len(mismatches),
        "first_mismatch": mismatches[0] if mismatches else None,
        "residual_checkpoints": len(checkpoints),
        "residual_failures": residual_failures,
        "identity_failures": identity_failures,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def kkm_metrics(max_order: int, resolution: int) -> dict[str, Any]:
    rho = PolyhedralSeminorm.l1()
    runs: list[dict[str, Any]] = []
    t0 = time.perf_counter()
    for map_name, domain_name in KKM_BENCHMARKS:
        domain = BUILTIN_DOMAINS[domain_name]
        f = vector_map(map_name, domain, rho)
        _, oracle = kf.grid_oracle_min_displacement(f.apply, domain.grid(resolution), rho)
        for eps in KKM_EPSILONS:
            row: dict[str, Any] = {"map": map_name, "epsilon": str(eps), "oracle_below_epsilon": oracle < eps}
            try:
                outcome = kf.find_epsilon_fixed_point(f.apply, domain, rho, eps, max_order, resolution)
            except DepthExhausted:
                row.update({"exhausted": True, "verified": False})
            else:
                x = outcome.witness.vector
                row.update({
                    "exhausted": False,
                    "verified": rho(f.apply(x) - x) < eps,
                    "order": outcome.witness.order,
                })
            runs.append(row)
    return {
        "runs": runs,
        "exhausted": sum(1 for r in runs if r["exhausted"]),
        "unverified": sum(1 for r in runs if not r["verified"]),
        "oracle_failures": sum(1 for r in runs if not r["oracle_below_epsilon"]),
        "seconds": round(time.perf_counter() - t0, 3),
    }


def e1_metrics(trials: int, points: int, seed: int) -> dict[str, Any]:
    delta, M = Fraction(9, 10), Fraction(1)
    consts = dl.E1Constants.from_params(delta, M)
    basis = [SparseVector.basis(n) for n in range(1, points + 1)]
    report = dl.e1_bounds_check(basis, PolyhedralSeminorm.l1(), consts, trials, seed)
    at_equality = dl.E1Constants.from_params(M, M)
    return {
        "trials": trials,
        "lower_violations": report.lower_violations,
        "upper_violations": report.upper_violations,
        "m_matches": consts.m == delta**4 / (32 * M**3),
        "c1_at_equality": str(at_equality.c[0]),
        "constants_match": at_equality.c[0] == Fraction(1, 8)
        and all(consts.c[i - 1] == Fraction(1, 2 ** (2 * i + 1)) * (delta / M) ** (i - 1) for i in range(1, 5)),
    }


def certificate_metrics(support_bound: int) -> dict[str, Any]:
    f = ml.Ex2Map(ml.make_partition("dyadic"))
    t0 = time.perf_counter()
    cert = ml.no_fixed_point_certificate(f, support_bound)
    lp = ml.fixed_point_lp_check(f, support_bound)
    kinds = [s.kind for s in cert.steps]
    collapsed = [k for i, k in enumerate(kinds) if i == 0 or kinds[i - 1] != k]
    return {
        "support_bound": support_bound,
        "infeasible": cert.infeasible,
        "lp_status": lp.status,
        "step_order_ok": tuple(collapsed) == CERTIFICATE_ORDER,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def delta_metrics(pairs: int, seed: int) -> dict[str, Any]:
    rng = make_rng(seed)
    region = dl.DeltaRegion(Fraction(0), max_index=6)
    distance_mismatches = isometry_mismatches = 0
    for _ in range(pairs):
        p, q = region.sample(rng), region.sample(rng)
        d = dl.delta_distance(p, q)
        distance_mismatches += d != (p.embed() - q.embed()).l1()
        isometry_mismatches += dl.delta_distance(dl.shift_map(p), dl.shift_map(q)) != d
    return {
        "pairs": pairs,
        "distance_mismatches": distance_mismatches,
        "isometry_mismatches": isometry_mismatches,
    }


def sperner_metrics(trials: int, max_order: int, max_dimension: int, seed: int) -> dict[str, Any]:
    rnd = random.Random(seed)
    even = 0
    checked = 0
    for size in range(2, max_dimension + 2):
        for order in range(1, max_order + 1):
            lattice = kf.SubdivisionLattice(size, order)
            vertices = list(lattice.vertices())
            for _ in range(trials):
                labeling = {lam: rnd.choice([i for i, v in enumerate(lam) if v]) for lam in vertices}
                count = len(kf.sperner_fully_labeled(lattice, labeling))
                even += count % 2 == 0
                checked += 1
    return {"labelings": checked, "even_counts": even}


PIPELINE_PERTURBATION = Fraction(1, 20)


def pipeline_metrics(samples: int, seed: int) -> dict[str, Any]:
    _, report = dl.compose_pipeline(
        dl.SHIFT,
        dl.nearest_point_retraction,
        dl.DeltaRegion(Fraction(1, 2)),
        samples,
        seed,
        perturbation=PIPELINE_PERTURBATION,
    )
    eta, lip, eps = report.displacement_min_estimate, report.lipschitz_estimate, report.epsilon_bound
    return {
        "samples": samples,
        "perturbation": str(PIPELINE_PERTURBATION),
        "eta": str(eta),
        "lipschitz": str(lip),
        "epsilon": str(eps),
        "formula_ok": eps == eta / (lip + 2),
        "eta_ok": eta >= Fraction(1, 2),
        "lipschitz_ok": lip <= 1 + Fraction(1, 10**6),
        "epsilon_ok": eps >= Fraction(1, 6),
        "chain_violations": report.chain_violations,
    }


def _cli_results(argv: list[str], seed: int) -> str:
    result = subprocess.run(
        [sys.executable, str(CLI), *argv, "--seed", str(seed)],
        cwd=ROOT,
        check=True,
        capture_output=True,
        text=True,
    )
    return json.dumps(json.loads(result.stdout)["results"], ensure_ascii=False, sort_keys=True)


def determinism_metrics(seed: int) -> dict[str, Any]:
    differing = [" ".join(argv) for argv in CLI_BENCHMARKS if _cli_results(argv, seed) != _cli_results(argv, seed)]
    return {"benchmarks": len(CLI_BENCHMARKS), "differing": differing}


def failures(report: dict[str, Any], args: argparse.Namespace) -> list[str]:
    out: list[str] = []
    ces = report["cesaro"]
    if ces["mismatches"] or ces["residual_failures"] or ces["identity_failures"]:
        out.append("cesaro")
    elif ces["seconds"] > args.max_cesaro_seconds:
        out.append("cesaro")
    kkm = report["kkm"]
    if kkm["exhausted"] or kkm["unverified"] or kkm["oracle_failures"] or kkm["seconds"] > args.max_kkm_seconds:
        out.append("kkm")
    e1 = report["e1"]
    if e1["lower_violations"] or e1["upper_violations"] or not (e1["m_matches"] and e1["constants_match"]):
        out.append("e1")
    cert = report["certificate"]
    if not (cert["infeasible"] and cert["lp_status"] == "infeasible" and cert["step_order_ok"]):
        out.append("certificate")
    elif cert["seconds"] > args.max_certificate_seconds:
        out.append("certificate")
    delta = report["delta"]
    if delta["distance_mismatches"] or delta["isometry_mismatches"]:
        out.append("delta")
    if report["sperner"]["even_counts"]:
        out.append("sperner")
    pipe = report["pipeline"]
    if not all(pipe[k] for k in ("formula_ok", "eta_ok", "lipschitz_ok", "epsilon_ok")) or pipe["chain_violations"]:
        out.append("pipeline")
    if report.get("determinism", {}).get("differing"):
        out.append("determinism")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Evaluate acceptance benchmarks.")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--cesaro-steps", type=int, default=10_000)
    parser.add_argument("--kkm-max-order", type=int, default=64)
    parser.add_argument("--kkm-resolution", type=int, default=20)
    parser.add_argument("--e1-trials", type=int, default=10_000)
    parser.add_argument("--e1-points", type=int, default=16)
    parser.add_argument("--support-bound", type=int, default=64)
    parser.add_argument("--pairs", type=int, default=10_000)
    parser.add_argument("--sperner-trials", type=int, default=100)
    parser.add_argument("--sperner-max-order", type=int, default=6)
    parser.add_argument("--sperner-max-dimension", type=int, default=3)
    parser.add_argument("--pipeline-samples", type=int, default=2000)
    parser.add_argument("--max-cesaro-seconds", type=float, default=10.0)
    parser.add_argument("--max-kkm-seconds", type=float, default=60.0)
    parser.add_argument("--max-certificate-seconds", type=float, default=5.0)
    parser.add_argument("--skip-determinism", action="store_true", help="Do not rerun the CLI benchmarks")
    parser.add_argument("--enforce", action="store_true", help="Exit non-zero when thresholds fail")
    return parser


def main() -> int:
    args = build_parser().parse_args()
    report: dict[str, Any] = {
        "cesaro": cesaro_metrics(args.cesaro_steps),
        "kkm": kkm_metrics(args.kkm_max_order, args.kkm_resolution),
        "e1": e1_metrics(args.e1_trials, args.e1_points, args.seed),
        "certificate": certificate_metrics(args.support_bound),
        "delta": delta_metrics(args.pairs, args.seed),
        "sperner": sperner_metrics(args.sperner_trials, args.sperner_max_order, args.sperner_max_dimension, args.seed),
        "pipeline": pipeline_metrics(args.pipeline_samples, args.seed),
    }
    if not args.skip_determinism:
        report["determinism"] = determinism_metrics(args.seed)
    report["failed"] = failures(report, args)
    report["thresholds"] = {
        "max_cesaro_seconds": args.max_cesaro_seconds,
        "max_kkm_seconds": args.max_kkm_seconds,
        "max_certificate_seconds": args.max_certificate_seconds,
        "kkm_max_order": args.kkm_max_order,
    }
    print(json.dumps(report, ensure_ascii=False, indent=2))

    if args.enforce and report["failed"]:
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
