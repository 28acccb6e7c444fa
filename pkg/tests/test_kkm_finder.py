import random
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

import kkm_finder as kf  # noqa: E402
from core_spaces import PolyhedralSeminorm, SparseVector  # noqa: E402
from domains import BUILTIN_DOMAINS, BoxDomain  # noqa: E402
from errors import AfpError, AnchorOutsideC, ConfigError, DepthExhausted, DomainEscape, ImproperLabeling  # noqa: E402
from map_registry import VECTOR_MAPS  # noqa: E402


L1 = PolyhedralSeminorm.l1()
INTERVAL = BUILTIN_DOMAINS["unit-interval"]
SQUARE = BUILTIN_DOMAINS["unit-square"]


def point(*values: object) -> SparseVector:
    return SparseVector.dense([Fraction(v) for v in values])


def identity(x: SparseVector) -> SparseVector:
    return x


def square(x: SparseVector) -> SparseVector:
    return VECTOR_MAPS["square"].apply(x)


def flip(x: SparseVector) -> SparseVector:
    return point(1 - x[1])


def jump(x: SparseVector) -> SparseVector:
    return point(1 if x[1] < Fraction(1, 2) else 0)


class NetTest(unittest.TestCase):
    def test_constant_map_has_one_center(self) -> None:
        net = kf.build_net(lambda x: point(Fraction(1, 2)), INTERVAL.grid(10), L1, Fraction(1, 5))
        self.assertEqual(net.centers, (point(Fraction(1, 2)),))
        self.assertEqual(net.samples_used, 11)
        self.assertEqual(net.epsilon, Fraction(1, 5))

    def test_identity_net_on_tenth_grid(self) -> None:
        net = kf.build_net(identity, INTERVAL.grid(10), L1, Fraction(1, 2))
        self.assertEqual([c[1] for c in net.centers], [0, Fraction(3, 10), Fraction(6, 10), Fraction(9, 10)])

    def test_every_image_is_covered(self) -> None:
        net = kf.build_net(square, INTERVAL.grid(10), L1, Fraction(1, 5))
        for x in INTERVAL.grid(10):
            self.assertTrue(any(L1(square(x) - c) < net.radius for c in net.centers))

    def test_image_outside_domain_escapes(self) -> None:
        with self.assertRaises(DomainEscape):
            kf.build_net(lambda x: point(2), INTERVAL.grid(2), L1, Fraction(1, 5), INTERVAL)

    def test_nonpositive_epsilon(self) -> None:
        with self.assertRaises(ConfigError):
            kf.build_net(identity, INTERVAL.grid(2), L1, Fraction(0))


class AlmostConvexTest(unittest.TestCase):
    def test_centers_inside_need_no_shrink(self) -> None:
        net = kf.build_net(identity, INTERVAL.grid(4), L1, Fraction(1, 5))
        witness = kf.almost_convex_witness(net, INTERVAL, point(Fraction(1, 2)), L1, Fraction(1, 5))
        self.assertEqual(witness.shrink, 0)
        self.assertEqual(witness.z_points, net.centers)

    def test_outside_center_is_pulled_in(self) -> None:
        net = kf.NetCover((point(Fraction(101, 100)), point(Fraction(1, 5))), Fraction(1, 10), 2)
        witness = kf.almost_convex_witness(net, INTERVAL, point(Fraction(1, 2)), L1, Fraction(1, 5))
        self.assertEqual(witness.shrink, Fraction(5, 51))
        self.assertEqual(witness.z_points[0], point(Fraction(24, 25)))
        for z, x in zip(witness.z_points, net.centers):
            self.assertTrue(INTERVAL.contains(z))
            self.assertLess(L1(z - x), net.radius)

    def test_anchor_outside_domain(self) -> None:
        net = kf.build_net(identity, INTERVAL.grid(2), L1, Fraction(1, 5))
        with self.assertRaises(AnchorOutsideC):
            kf.almost_convex_witness(net, INTERVAL, point(2), L1, Fraction(1, 5))


class LabelTest(unittest.TestCase):
    def _net(self, f, eps: Fraction, resolution: int = 4):
        net = kf.build_net(f, INTERVAL.grid(resolution), L1, eps)
        return net, kf.almost_convex_witness(net, INTERVAL, INTERVAL.anchor(), L1, eps)

    def test_identity_vertices_are_unlabelable(self) -> None:
        net, witness = self._net(identity, Fraction(1, 5))
        lattice = kf.SubdivisionLattice(len(net.centers), 1)
        for lam in lattice.vertices():
            self.assertIsNone(kf.kkm_label(lattice.point(lam), identity, L1, net, witness))

    def test_flip_labels_the_segment(self) -> None:
        net = kf.NetCover((point(0), point(1)), Fraction(1, 4), 2)
        witness = kf.AlmostConvexWitness(net.centers, point(Fraction(1, 2)), Fraction(0))
        lattice = kf.SubdivisionLattice(2, 2)
        self.assertEqual(kf.kkm_label(lattice.point((2, 0)), flip, L1, net, witness), 0)
        self.assertEqual(kf.kkm_label(lattice.point((1, 1)), flip, L1, net, witness), 0)
        self.assertEqual(kf.kkm_label(lattice.point((0, 2)), flip, L1, net, witness), 1)

    def test_unlabelable_vertex_implies_small_residual(self) -> None:
        eps = Fraction(1, 5)
        net, witness = self._net(square, eps, resolution=10)
        for order in (1, 2, 4):
            lattice = kf.SubdivisionLattice(len(net.centers), order)
            for carrier in kf.close_carriers(net, L1, eps, 2).get(2, []):
                for lam in lattice.vertices_on_carrier(carrier):
                    v = lattice.point(lam)
                    if kf.kkm_label(v, square, L1, net, witness) is not None:
                        continue
                    x = v.embed(witness.z_points)
                    image = square(x)
                    for i in v.carrier:
                        self.assertLess(L1(image - net.centers[i]), eps / 2)
                        self.assertLess(L1(image - witness.z_points[i]), eps)
                    self.assertLess(L1(image - x), eps)


class LatticeTest(unittest.TestCase):
    def test_compositions(self) -> None:
        self.assertEqual(list(kf.compositions(2, 2)), [(0, 2), (1, 1), (2, 0)])
        self.assertEqual(list(kf.compositions(3, 2, positive=True)), [(1, 2), (2, 1)])

    def test_vertex_count_matches_enumeration(self) -> None:
        for size, order in ((2, 5), (3, 4), (4, 3)):
            lattice = kf.SubdivisionLattice(size, order)
            self.assertEqual(len(list(lattice.vertices())), lattice.vertex_count())

    def test_carrier_vertices_have_exact_carrier(self) -> None:
        lattice = kf.SubdivisionLattice(4, 3)
        for lam in lattice.vertices_on_carrier((0, 2)):
            self.assertEqual(lattice.point(lam).carrier, (0, 2))

    def test_barycentric_weights_are_validated(self) -> None:
        with self.assertRaises(ValueError):
            kf.BarycentricPoint((Fraction(1, 2), Fraction(1, 3)))
        with self.assertRaises(ConfigError):
            kf.SubdivisionLattice(2, 0)

    def test_cell_counts(self) -> None:
        for size, order in ((2, 4), (3, 3), (4, 2)):
            cells = kf.lattice_cells(size, order)
            self.assertEqual(len(cells), order ** (size - 1))
            for cell in cells:
                self.assertEqual(len(cell), size)
                self.assertTrue(all(sum(lam) == order for lam in cell))


class SpernerTest(unittest.TestCase):
    def test_segment_labels_change_an_odd_number_of_times(self) -> None:
        lattice = kf.SubdivisionLattice(2, 12)
        labeling = {lam: (0 if lam[0] > 6 else 1) if lam[0] and lam[1] else (0 if lam[0] else 1) for lam in lattice.vertices()}
        self.assertEqual(len(kf.sperner_fully_labeled(lattice, labeling)), 1)

    def test_every_proper_labeling_of_order_two_triangle(self) -> None:
        lattice = kf.SubdivisionLattice(3, 2)
        vertices = list(lattice.vertices())
        choices = [[i for i, v in enumerate(lam) if v] for lam in vertices]
        total = 1
        for c in choices:
            total *= len(c)
        for code in range(total):
            labeling = {}
            for lam, options in zip(vertices, choices):
                code, pick = divmod(code, len(options))
                labeling[lam] = options[pick]
            self.assertEqual(len(kf.sperner_fully_labeled(lattice, labeling)) % 2, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=2, max_value=4), st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=10**6))
    def test_random_proper_labelings_have_odd_counts(self, size: int, order: int, seed: int) -> None:
        rnd = random.Random(seed)
        lattice = kf.SubdivisionLattice(size, order)
        labeling = {lam: rnd.choice([i for i, v in enumerate(lam) if v]) for lam in lattice.vertices()}
        self.assertEqual(len(kf.sperner_fully_labeled(lattice, labeling)) % 2, 1)

    def test_improper_labeling_is_rejected(self) -> None:
        lattice = kf.SubdivisionLattice(3, 1)
        labeling = {(1, 0, 0): 1, (0, 1, 0): 1, (0, 0, 1): 2}
        with self.assertRaises(ImproperLabeling):
            kf.sperner_fully_labeled(lattice, labeling)
        with self.assertRaises(ImproperLabeling):
            kf.sperner_fully_labeled(lattice, {(1, 0, 0): 0})


class FinderTest(unittest.TestCase):
    def test_identity_is_found_at_order_one(self) -> None:
        outcome = kf.find_epsilon_fixed_point(identity, INTERVAL, L1, Fraction(1, 10), 8)
        self.assertEqual(outcome.witness.order, 1)
        self.assertEqual(outcome.witness.residual, 0)
        self.assertEqual(outcome.shrink, 0)

    def test_square_witness_is_reverified(self) -> None:
        eps = Fraction(1, 10)
        outcome = kf.find_epsilon_fixed_point(square, INTERVAL, L1, eps, 64)
        x = outcome.witness.vector
        self.assertLess(L1(square(x) - x), eps)
        self.assertEqual(outcome.witness.residual, L1(square(x) - x))
        self.assertGreaterEqual(outcome.lattice_vertices_scanned, 1)

    def test_rotation_witness_near_center(self) -> None:
        rotate = VECTOR_MAPS["rotation90"].apply
        eps = Fraction(1, 5)
        outcome = kf.find_epsilon_fixed_point(rotate, SQUARE, L1, eps, 64)
        x = outcome.witness.vector
        self.assertLess(L1(rotate(x) - x), eps)
        self.assertTrue(SQUARE.contains(x))

    def test_flip_needs_order_two(self) -> None:
        outcome = kf.find_epsilon_fixed_point(flip, INTERVAL, L1, Fraction(1, 10), 8, resolution=11)
        self.assertEqual(outcome.net_size, 12)
        self.assertEqual(outcome.witness.order, 2)
        self.assertEqual(outcome.witness.vector, point(Fraction(1, 2)))
        self.assertEqual(outcome.witness.residual, 0)
        # order 1: 12 single-center vertices; order 2: the 12 doubled ones are skipped
        self.assertEqual(outcome.lattice_vertices_scanned, 18)

    def test_zero_anchor_is_kept(self) -> None:
        upper_half = BoxDomain((Fraction(1, 2),), (Fraction(1),))
        with self.assertRaises(AnchorOutsideC):
            kf.find_epsilon_fixed_point(identity, upper_half, L1, Fraction(1, 10), 4, anchor=SparseVector())
        outcome = kf.find_epsilon_fixed_point(identity, INTERVAL, L1, Fraction(1, 10), 4, anchor=SparseVector())
        self.assertEqual(outcome.witness.order, 1)

    def test_jump_map_exhausts_depth(self) -> None:
        with self.assertRaises(DepthExhausted) as ctx:
            kf.find_epsilon_fixed_point(jump, INTERVAL, L1, Fraction(1, 10), 4)
        self.assertEqual(ctx.exception.max_order, 4)
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_witness_rejects_large_residual(self) -> None:
        with self.assertRaises(AfpError):
            kf.Witness(kf.BarycentricPoint((Fraction(1),)), point(0), Fraction(1, 5), Fraction(1, 5), 1)

    def test_witness_sequence_needs_decreasing_schedule(self) -> None:
        seq = kf.witness_sequence(square, INTERVAL, L1, [Fraction(1, 5), Fraction(1, 10)], 64)
        self.assertEqual([w.epsilon for w in seq], [Fraction(1, 5), Fraction(1, 10)])
        with self.assertRaises(ConfigError):
            kf.witness_sequence(square, INTERVAL, L1, [Fraction(1, 10), Fraction(1, 5)], 64)


class GridOracleTest(unittest.TestCase):
    def test_known_minima(self) -> None:
        grid = INTERVAL.grid(10)
        self.assertEqual(kf.grid_oracle_min_displacement(identity, grid, L1)[1], 0)
        x, value = kf.grid_oracle_min_displacement(square, grid, L1)
        self.assertEqual((x, value), (point(0), 0))
        x, value = kf.grid_oracle_min_displacement(VECTOR_MAPS["half-plus-quarter"].apply, grid, L1)
        self.assertEqual((x, value), (point(Fraction(1, 2)), 0))

    def test_empty_grid(self) -> None:
        with self.assertRaises(ConfigError):
            kf.grid_oracle_min_displacement(identity, [], L1)


if __name__ == "__main__":
    unittest.main()
