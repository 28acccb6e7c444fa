import sys
import unittest
from fractions import Fraction
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st


ROOT = Path(__file__).resolve().parents[1]
ENGINE_DIR = ROOT / "apps/engine"
if str(ENGINE_DIR) not in sys.path:
    sys.path.insert(0, str(ENGINE_DIR))

from core_spaces import (  # noqa: E402
    PolyhedralSeminorm,
    SeparationParams,
    SparseVector,
    check_seminorm_axioms,
    distance_to_span,
    greedy_separated_sequence,
    in_rational_span,
    parse_rational,
    span_separated_sequence,
    total_boundedness_probe,
    verify_span_separated,
)
from errors import ConfigError, UnboundedBasis  # noqa: E402
from sampling import box_stream, make_rng  # noqa: E402


fractions = st.fractions(min_value=-4, max_value=4, max_denominator=16)
vectors = st.dictionaries(st.integers(min_value=1, max_value=6), fractions, max_size=4).map(SparseVector)
SEMINORMS = (
    PolyhedralSeminorm.l1(),
    PolyhedralSeminorm.linf(),
    PolyhedralSeminorm.max_of([SparseVector({1: 1, 2: 1}), SparseVector({1: 1, 2: -1}), SparseVector({3: 2})]),
)


def e(n: int, scale: object = 1) -> SparseVector:
    return SparseVector.basis(n, scale)


class SparseVectorTest(unittest.TestCase):
    def test_zero_entries_are_never_stored(self) -> None:
        x = SparseVector({1: 1, 2: 0, 3: Fraction(1, 2)})
        self.assertEqual(x.support, (1, 3))
        self.assertEqual((x - x).support, ())
        self.assertFalse(x - x)
        self.assertEqual((x + e(1, -1)).support, (3,))
        self.assertEqual(x.scale(0), SparseVector())

    def test_arithmetic_is_exact(self) -> None:
        x = SparseVector({1: Fraction(1, 3), 4: -2})
        y = SparseVector({1: Fraction(2, 3), 2: 1})
        self.assertEqual(x + y, SparseVector({1: 1, 2: 1, 4: -2}))
        self.assertEqual((x * 3)[1], 1)
        self.assertEqual((x / 2)[4], -1)
        self.assertEqual(x.dot(y), Fraction(2, 9))
        self.assertEqual(x.l1(), Fraction(7, 3))
        self.assertEqual(x.linf(), 2)
        self.assertEqual(-x, SparseVector({1: Fraction(-1, 3), 4: 2}))

    def test_dense_and_json_forms(self) -> None:
        x = SparseVector.dense([Fraction(1, 2), 0, 3])
        self.assertEqual(x.to_json(), {"1": "1/2", "3": "3"})
        self.assertEqual(SparseVector.from_json({"1": "1/2", "3": 3}), x)

    def test_rejects_bad_indices(self) -> None:
        with self.assertRaises(ValueError):
            SparseVector({0: 1})
        with self.assertRaises(ConfigError):
            SparseVector.from_json({"x": "1"})
        with self.assertRaises(ConfigError):
            SparseVector.from_json({"0": "1"})

    def test_nonnegativity(self) -> None:
        x = SparseVector({1: 1, 2: -1})
        self.assertFalse(x.is_nonnegative())
        self.assertEqual(x.clamp_nonnegative(), e(1))
        self.assertTrue(SparseVector().is_nonnegative())


class RationalParsingTest(unittest.TestCase):
    def test_parses_strings_and_integers(self) -> None:
        self.assertEqual(parse_rational("3/4"), Fraction(3, 4))
        self.assertEqual(parse_rational(" -2 "), -2)
        self.assertEqual(parse_rational(5), 5)

    def test_rejects_garbage(self) -> None:
        for raw in ("abc", "1/0", True, 0.5, None):
            with self.subTest(raw=raw):
                with self.assertRaises(ConfigError):
                    parse_rational(raw, name="epsilon")


class SeminormTest(unittest.TestCase):
    def test_known_values(self) -> None:
        self.assertEqual(PolyhedralSeminorm.l1()(e(1) - e(2)), 2)
        self.assertEqual(PolyhedralSeminorm.l1()(SparseVector()), 0)
        rho = PolyhedralSeminorm.max_of([SparseVector({1: 1, 2: 1}), SparseVector({1: 1, 2: -1})])
        self.assertEqual(rho(SparseVector.dense([3, 4])), 7)

    def test_descriptor_round_trip_and_aliases(self) -> None:
        rho = PolyhedralSeminorm.from_json(
            {"schema": "afp.seminorm.v1", "kind": "maxOfFunctionals", "functionals": [{"1": "1", "2": "-1"}]}
        )
        self.assertEqual(rho.kind, "max")
        self.assertEqual(rho(SparseVector.dense([1, 1])), 0)
        self.assertEqual(PolyhedralSeminorm.from_json(rho.to_json()), rho)
        with self.assertRaises(ConfigError):
            PolyhedralSeminorm.from_json({"kind": "l2"})
        with self.assertRaises(ConfigError):
            PolyhedralSeminorm.from_json({"kind": "l1", "extra": True})
        with self.assertRaises(ConfigError):
            PolyhedralSeminorm.max_of([])

    def test_separation_params(self) -> None:
        SeparationParams(Fraction(9, 10), Fraction(1))
        with self.assertRaises(ConfigError):
            SeparationParams(Fraction(0), Fraction(1))
        with self.assertRaises(ConfigError):
            SeparationParams(Fraction(2), Fraction(1))

    @settings(max_examples=300, deadline=None)
    @given(vectors, vectors, fractions)
    def test_axioms_hold_exactly(self, x: SparseVector, y: SparseVector, lam: Fraction) -> None:
        for rho in SEMINORMS:
            self.assertIsNone(check_seminorm_axioms(rho, [(x, y, lam)]))


class DistanceToSpanTest(unittest.TestCase):
    def test_known_distances(self) -> None:
        l1 = PolyhedralSeminorm.l1()
        self.assertEqual(distance_to_span(l1, e(3), [e(1), e(2)]), 1)
        self.assertEqual(distance_to_span(l1, e(1) + e(2), [e(1)]), 1)
        self.assertEqual(distance_to_span(l1, SparseVector.dense([2, 1, 0]), [SparseVector.dense([1, 1, 0])]), 1)
        linf = PolyhedralSeminorm.linf()
        self.assertEqual(distance_to_span(linf, SparseVector.dense([2, 0]), [SparseVector.dense([1, 1])]), 1)

    def test_empty_basis_is_the_seminorm(self) -> None:
        x = SparseVector({2: Fraction(-3, 2)})
        self.assertEqual(distance_to_span(PolyhedralSeminorm.l1(), x, []), Fraction(3, 2))
        self.assertEqual(distance_to_span(PolyhedralSeminorm.l1(), x, [SparseVector()]), Fraction(3, 2))

    def test_null_direction_is_rejected(self) -> None:
        rho = PolyhedralSeminorm.max_of([SparseVector({1: 1, 2: -1})])
        with self.assertRaises(UnboundedBasis):
            distance_to_span(rho, e(1), [SparseVector.dense([1, 1])])

    @settings(max_examples=100, deadline=None)
    @given(vectors, st.lists(vectors, max_size=3))
    def test_distance_bounds(self, x: SparseVector, basis: list[SparseVector]) -> None:
        rho = PolyhedralSeminorm.l1()
        dist = distance_to_span(rho, x, basis)
        self.assertGreaterEqual(dist, 0)
        self.assertLessEqual(dist, rho(x))
        if basis and basis[0]:
            self.assertEqual(distance_to_span(rho, basis[0].scale(3), basis), 0)

    def test_rational_span(self) -> None:
        self.assertTrue(in_rational_span(SparseVector.dense([2, 2]), [SparseVector.dense([1, 1])]))
        self.assertFalse(in_rational_span(e(2), [e(1)]))
        self.assertTrue(in_rational_span(SparseVector(), []))
        self.assertTrue(in_rational_span(SparseVector.dense([1, 3]), [e(1) + e(2), e(1) - e(2)]))


class SeparatedSequenceTest(unittest.TestCase):
    def test_basis_stream_is_fully_accepted(self) -> None:
        stream = (e(n) for n in range(1, 50))
        self.assertEqual(len(greedy_separated_sequence(stream, PolyhedralSeminorm.l1(), Fraction(1), 8)), 8)

    def test_tight_cluster_keeps_one_point(self) -> None:
        stream = (e(1, Fraction(k, 80)) for k in range(10))
        accepted = greedy_separated_sequence(stream, PolyhedralSeminorm.l1(), Fraction(1, 2), 10)
        self.assertEqual(accepted, [SparseVector()])

    def test_random_square_points_pack_and_cover(self) -> None:
        rho = PolyhedralSeminorm.l1()
        delta = Fraction(1, 2)
        stream = box_stream(make_rng(7), (Fraction(0), Fraction(0)), (Fraction(1), Fraction(1)))
        probe = total_boundedness_probe(stream, rho, delta, 300)
        points = probe.separated
        self.assertEqual(probe.consumed, 300)
        self.assertEqual(probe.uncovered, 0)
        self.assertLessEqual(len(points), 18)
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                self.assertGreater(rho(points[i] - points[j]), delta)

    def test_span_separated_basis(self) -> None:
        rho = PolyhedralSeminorm.l1()
        accepted = span_separated_sequence((e(n) for n in range(1, 100)), rho, Fraction(9, 10), 8)
        self.assertEqual(accepted, [e(n) for n in range(1, 9)])
        self.assertIsNone(verify_span_separated(accepted, rho, Fraction(9, 10)))

    def test_span_separated_rejects_dependent_points(self) -> None:
        rho = PolyhedralSeminorm.l1()
        stream = [e(1), e(1, 2), e(2), e(1) + e(2), e(3, Fraction(1, 2))]
        accepted = span_separated_sequence(stream, rho, Fraction(9, 10), 10)
        self.assertEqual(accepted, [e(1), e(2)])
        self.assertIsNone(verify_span_separated(accepted, rho, Fraction(9, 10)))
        self.assertEqual(verify_span_separated([e(1), e(1, 2)], rho, Fraction(9, 10)), 1)

    def test_nonpositive_delta_is_rejected(self) -> None:
        with self.assertRaises(ConfigError):
            greedy_separated_sequence([], PolyhedralSeminorm.l1(), Fraction(0), 1)
        with self.assertRaises(ConfigError):
            span_separated_sequence([], PolyhedralSeminorm.l1(), Fraction(-1), 1)


if __name__ == "__main__":
    unittest.main()
