import json
import sys
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st


ROOT = Path(__file__).resolve().parents[1]
ENGINE_DIR = ROOT / "apps/engine"
if str(ENGINE_DIR) not in sys.path:
    sys.path.insert(0, str(ENGINE_DIR))

import measure_lab as ml  # noqa: E402
from core_spaces import SparseVector  # noqa: E402
from errors import ConfigError, DomainEscape  # noqa: E402
from measure_lab import FiniteMeasureModel  # noqa: E402


HALF = Fraction(1, 2)
masses = st.fractions(min_value=-2, max_value=2, max_denominator=16)
measures = st.builds(
    FiniteMeasureModel,
    st.dictionaries(st.integers(min_value=1, max_value=40), masses, max_size=6).map(SparseVector),
    masses,
)


def atoms(**masses: object) -> SparseVector:
    return SparseVector({int(k[1:]): Fraction(v) for k, v in masses.items()})


class MeasureModelTest(unittest.TestCase):
    def test_norms_and_totals(self) -> None:
        mu = FiniteMeasureModel(atoms(n1="1/4", n3="-1/4"), HALF)
        self.assertEqual(mu.total(), HALF)
        self.assertEqual(mu.tv_norm(), 1)
        self.assertFalse(mu.is_nonnegative())
        self.assertTrue(FiniteMeasureModel.dirac(5).is_probability())
        self.assertEqual(FiniteMeasureModel.zero().tv_norm(), 0)

    def test_projection_drops_diffuse_mass(self) -> None:
        mu = FiniteMeasureModel(atoms(n2="1/3"), Fraction(2, 3))
        self.assertEqual(ml.project_P(mu), FiniteMeasureModel(atoms(n2="1/3"), Fraction(0)))
        self.assertEqual(ml.project_P(FiniteMeasureModel.pure_diffuse()), FiniteMeasureModel.zero())

    @settings(max_examples=200, deadline=None)
    @given(measures)
    def test_projection_is_idempotent(self, mu: FiniteMeasureModel) -> None:
        self.assertEqual(ml.project_P(ml.project_P(mu)), ml.project_P(mu))

    @settings(max_examples=200, deadline=None)
    @given(measures, measures, masses, masses)
    def test_projection_is_linear(
        self, mu: FiniteMeasureModel, nu: FiniteMeasureModel, s: Fraction, t: Fraction
    ) -> None:
        mixed = mu.scale(s) + nu.scale(t)
        self.assertEqual(ml.project_P(mixed), ml.project_P(mu).scale(s) + ml.project_P(nu).scale(t))

    @settings(max_examples=200, deadline=None)
    @given(measures)
    def test_projection_does_not_increase_tv_norm(self, mu: FiniteMeasureModel) -> None:
        self.assertLessEqual(ml.project_P(mu).tv_norm(), mu.tv_norm())
        self.assertEqual(ml.project_P(mu).tv_norm(), mu.tv_norm() - abs(mu.diffuse))

    def test_json_fields(self) -> None:
        mu = FiniteMeasureModel(atoms(n4="3/8"), Fraction(5, 8))
        self.assertEqual(mu.to_json(), {"atoms": {"4": "3/8"}, "diffuse": "5/8"})
        self.assertEqual(FiniteMeasureModel.from_json(mu.to_json()), mu)
        with self.assertRaises(ConfigError):
            FiniteMeasureModel.from_json({"atoms": {}, "mass": "1"})


class PartitionTest(unittest.TestCase):
    def test_dyadic_blocks(self) -> None:
        p = ml.DyadicPartition()
        self.assertEqual([p.block_of(n) for n in range(1, 9)], [1, 2, 1, 3, 1, 2, 1, 4])
        self.assertEqual(p.sample_block(3, 3), [4, 12, 20])
        self.assertEqual(p.next_outside(2, 2), 4)

    def test_cantor_blocks_are_infinite_and_disjoint(self) -> None:
        p = ml.CantorPartition()
        self.assertEqual([p.block_of(n) for n in range(1, 7)], [1, 2, 1, 3, 2, 1])
        for j in (1, 2, 3):
            members = p.sample_block(j, 5)
            self.assertEqual(len(set(members)), 5)
            self.assertTrue(all(p.block_of(n) == j for n in members))

    def test_generic_next_outside_matches_dyadic_override(self) -> None:
        p = ml.DyadicPartition()
        for after in range(1, 20):
            for j in range(1, 4):
                self.assertEqual(p.next_outside(after, j), ml.PartitionRule.next_outside(p, after, j))

    def test_unknown_partition(self) -> None:
        with self.assertRaises(ConfigError):
            ml.make_partition("ternary")


class ForwardIndexTest(unittest.TestCase):
    def test_dyadic_indices_are_powers_of_two(self) -> None:
        rule = ml.ForwardIndexRule(ml.DyadicPartition())
        self.assertEqual(ml.forward_indices(rule, 4), [2, 4, 8, 16])
        self.assertEqual(rule.upto(20), [2, 4, 8, 16])
        self.assertEqual(rule.index_of(8), 3)
        self.assertIsNone(rule.index_of(6))

    def test_cantor_indices_satisfy_the_rule(self) -> None:
        rule = ml.ForwardIndexRule(ml.CantorPartition())
        self.assertEqual(rule.violations(12), [])
        ks = ml.forward_indices(rule, 12)
        self.assertEqual(ks, sorted(set(ks)))
        self.assertGreaterEqual(ks[0], 2)

    def test_j_max_must_be_positive(self) -> None:
        with self.assertRaises(ConfigError):
            ml.forward_indices(ml.ForwardIndexRule(ml.DyadicPartition()), 0)


class Ex2MapTest(unittest.TestCase):
    def setUp(self) -> None:
        self.f = ml.Ex2Map()

    def test_evaluation_examples(self) -> None:
        self.assertEqual(self.f(FiniteMeasureModel.pure_diffuse()), FiniteMeasureModel.dirac(1))
        self.assertEqual(self.f(FiniteMeasureModel.dirac(1)), FiniteMeasureModel.dirac(2))
        mixed = FiniteMeasureModel(atoms(n3="1/2"), HALF)
        self.assertEqual(self.f(mixed), FiniteMeasureModel(atoms(n1="1/2", n2="1/2"), Fraction(0)))

    def test_mass_is_preserved(self) -> None:
        mu = FiniteMeasureModel(atoms(n1="1/8", n6="1/8", n12="1/4"), HALF)
        self.assertEqual(self.f(mu).total(), mu.total())
        self.assertEqual(self.f(mu).diffuse, 0)

    def test_orbit_displacement_stays_two(self) -> None:
        steps = ml.orbit_displacement(self.f, FiniteMeasureModel.pure_diffuse(), 10)
        self.assertEqual([k for k, _ in steps], list(range(1, 11)))
        self.assertTrue(all(d == 2 for _, d in steps))

    def test_orbit_needs_unit_mass(self) -> None:
        with self.assertRaises(ConfigError):
            ml.orbit_displacement(self.f, FiniteMeasureModel.pure_diffuse(HALF), 3)


class CertificateTest(unittest.TestCase):
    def test_certificate_closes_for_small_and_large_bounds(self) -> None:
        f = ml.Ex2Map()
        for bound in (1, 64):
            report = ml.no_fixed_point_certificate(f, bound)
            self.assertTrue(report.infeasible)
            kinds = [s.kind for s in report.steps]
            self.assertEqual(kinds[:3], ["diffuse", "atom-1", "forward-support"])
            self.assertEqual(kinds[-1], "total-mass")
            self.assertTrue(all(k == "minimal-j" for k in kinds[3:-1]))

    def test_certificate_lists_forward_indices(self) -> None:
        report = ml.no_fixed_point_certificate(ml.Ex2Map(), 16)
        support = next(s for s in report.steps if s.kind == "forward-support")
        self.assertEqual(support.detail["forward_indices"], [2, 4, 8, 16])
        self.assertEqual(report.to_json()["partition"], "dyadic")

    def test_cantor_certificate(self) -> None:
        self.assertTrue(ml.no_fixed_point_certificate(ml.Ex2Map(ml.CantorPartition()), 40).infeasible)

    def test_lp_agrees(self) -> None:
        for bound in (1, 8, 32):
            self.assertEqual(ml.fixed_point_lp_check(ml.Ex2Map(), bound).status, "infeasible")

    def test_bad_bound(self) -> None:
        with self.assertRaises(ConfigError):
            ml.no_fixed_point_certificate(ml.Ex2Map(), 0)


class Ex1MapTest(unittest.TestCase):
    def test_applies_map_after_projection(self) -> None:
        double_index = lambda x: SparseVector({2 * i: v for i, v in x.items()})  # noqa: E731
        f = ml.ex1_map(double_index)
        mu = FiniteMeasureModel(atoms(n3="1/4"), Fraction(3, 4))
        self.assertEqual(f(mu), FiniteMeasureModel(atoms(n6="1/4"), Fraction(0)))

    def test_rejects_signed_atoms(self) -> None:
        f = ml.ex1_map(lambda x: x)
        with self.assertRaises(DomainEscape):
            f(FiniteMeasureModel(atoms(n1="-1/2"), Fraction(0)))


class ParseStartTest(unittest.TestCase):
    def test_named_starts(self) -> None:
        self.assertEqual(ml.parse_start("diffuse"), FiniteMeasureModel.pure_diffuse())
        self.assertEqual(ml.parse_start("atom:3"), FiniteMeasureModel.dirac(3))
        for bad in ("atom:0", "atom:x", "nowhere.json"):
            with self.assertRaises(ConfigError):
                ml.parse_start(bad)

    def test_file_start(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            good = Path(tmp) / "mu.json"
            good.write_text(json.dumps({"atoms": {"2": "1/2"}, "diffuse": "1/2"}), encoding="utf-8")
            self.assertEqual(ml.parse_start(str(good)), FiniteMeasureModel(atoms(n2="1/2"), HALF))
            light = Path(tmp) / "light.json"
            light.write_text(json.dumps({"atoms": {"2": "1/2"}}), encoding="utf-8")
            with self.assertRaises(ConfigError):
                ml.parse_start(str(light))


if __name__ == "__main__":
    unittest.main()
