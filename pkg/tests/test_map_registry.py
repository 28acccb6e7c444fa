import json
import sys
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path


ROOT = Path(__file__).resolve().parents[1]
ENGINE_DIR = ROOT / "apps/engine"
if str(ENGINE_DIR) not in sys.path:
    sys.path.insert(0, str(ENGINE_DIR))

import map_registry as mr  # noqa: E402
from core_spaces import PolyhedralSeminorm, SparseVector  # noqa: E402
from delta_lab import DeltaPoint  # noqa: E402
from domains import BUILTIN_DOMAINS, PolytopeDomain, load_domain  # noqa: E402
from errors import ConfigError, DomainEscape  # noqa: E402
from measure_lab import FiniteMeasureModel  # noqa: E402


HALF = Fraction(1, 2)
FOLD = {
    "schema": "afp.map.v1",
    "name": "fold",
    "dimension": 1,
    "pieces": [
        {"when": [{"a": ["1"], "b": "1/2"}], "matrix": [["2"]], "offset": ["0"]},
        {"when": [], "matrix": [["-2"]], "offset": ["2"]},
    ],
}
TILT = {
    "schema": "afp.delta-map.v1",
    "name": "tilt",
    "pieces": [{"when": [], "index_shift": 1, "matrix": [["1", "0"], ["0", "1"]], "offset": ["0", "0"]}],
}


def point(*values: object) -> SparseVector:
    return SparseVector.dense([Fraction(v) for v in values])


class DescriptorFileCase(unittest.TestCase):
    def setUp(self) -> None:
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self.tmpdir.cleanup()

    def write(self, name: str, payload: object) -> str:
        path = Path(self.tmpdir.name) / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)


class BuiltinMapTest(unittest.TestCase):
    def test_vector_maps(self) -> None:
        interval = BUILTIN_DOMAINS["unit-interval"]
        square = BUILTIN_DOMAINS["unit-square"]
        self.assertEqual(mr.vector_map("half-step", interval)(point(0)), point(HALF))
        self.assertEqual(mr.vector_map("square", interval)(point(HALF)), point(Fraction(1, 4)))
        self.assertEqual(mr.vector_map("half-plus-quarter", interval)(point(HALF)), point(HALF))
        self.assertEqual(mr.vector_map("rotation90", square)(point(1, 0)), point(1, 1))
        self.assertEqual(mr.vector_map("rotation345", square)(point(HALF, HALF)), point(HALF, HALF))
        self.assertFalse(mr.vector_map("square", interval).affine)

    def test_turn_by_345_is_orbit_only(self) -> None:
        square = BUILTIN_DOMAINS["unit-square"]
        turn = mr.vector_map("rotation345", square)
        self.assertEqual(turn(point(1, 0)), point(Fraction(6, 5), Fraction(3, 5)))
        self.assertFalse(square.contains(turn(point(1, 0))))
        self.assertEqual(turn(point(HALF, Fraction(1, 4))), point(Fraction(7, 10), Fraction(7, 20)))
        with self.assertRaises(ConfigError):
            mr.require_self_map("rotation345")
        for name in ("rotation90", "half-step", "plugin:missing.json"):
            mr.require_self_map(name)

    def test_seminorm_drives_residual(self) -> None:
        square = BUILTIN_DOMAINS["unit-square"]
        l1 = mr.vector_map("rotation90", square)
        linf = mr.vector_map("rotation90", square, PolyhedralSeminorm.linf())
        self.assertEqual(l1.residual(point(1, 0)), 1)
        self.assertEqual(linf.residual(point(1, 0)), 1)
        self.assertEqual(l1.residual(point(1, HALF)), 1)
        self.assertEqual(linf.residual(point(1, HALF)), HALF)

    def test_dimension_mismatch_and_unknown_names(self) -> None:
        with self.assertRaises(ConfigError):
            mr.vector_map("rotation90", BUILTIN_DOMAINS["unit-interval"])
        with self.assertRaises(ConfigError):
            mr.vector_map("spiral")
        with self.assertRaises(ConfigError):
            mr.measure_map("ex3")
        with self.assertRaises(ConfigError):
            mr.displacement_map("drift")

    def test_resolve_map_dispatches_by_kind(self) -> None:
        self.assertEqual(mr.resolve_map("ex2").kind, "measure")
        self.assertEqual(mr.resolve_map("baker").kind, "ball")
        self.assertEqual(mr.resolve_map("identity", BUILTIN_DOMAINS["unit-square"]).kind, "vector")
        self.assertIn("shift", mr.builtin_names())

    def test_measure_maps(self) -> None:
        ex2 = mr.measure_map("ex2", "cantor")
        self.assertEqual(ex2(FiniteMeasureModel.pure_diffuse()), FiniteMeasureModel.dirac(1))
        ex1 = mr.measure_map("ex1")
        self.assertEqual(ex1(FiniteMeasureModel.pure_diffuse()), FiniteMeasureModel.dirac(1))
        self.assertTrue(ex1.contains(FiniteMeasureModel.dirac(3, HALF)))
        self.assertFalse(ex1.contains(FiniteMeasureModel.dirac(3, 2)))


class PluginTest(DescriptorFileCase):
    def test_piecewise_vector_plugin(self) -> None:
        f = mr.vector_map("plugin:" + self.write("fold.json", FOLD), BUILTIN_DOMAINS["unit-interval"])
        self.assertEqual(f.name, "fold")
        self.assertFalse(f.affine)
        self.assertEqual(f(point(Fraction(1, 4))), point(HALF))
        self.assertEqual(f(point(Fraction(3, 4))), point(HALF))
        self.assertEqual(f.residual(point(Fraction(2, 3))), 0)

    def test_uncovered_point_escapes(self) -> None:
        partial = {**FOLD, "pieces": FOLD["pieces"][:1]}
        f = mr.vector_map("plugin:" + self.write("partial.json", partial))
        self.assertTrue(f.affine)
        with self.assertRaises(DomainEscape):
            f(point(1))

    def test_delta_plugin(self) -> None:
        g = mr.displacement_map("plugin:" + self.write("tilt.json", TILT))
        self.assertEqual(g(DeltaPoint(2, HALF, Fraction(1, 4))), DeltaPoint(3, HALF, Fraction(1, 4)))
        back = {**TILT, "pieces": [{**TILT["pieces"][0], "index_shift": -1}]}
        g = mr.displacement_map("plugin:" + self.write("back.json", back))
        with self.assertRaises(DomainEscape):
            g(DeltaPoint(1, HALF, 0))

    def test_invalid_descriptors(self) -> None:
        cases = {
            "no-dimension.json": {k: v for k, v in FOLD.items() if k != "dimension"},
            "decimal.json": {**FOLD, "pieces": [{"matrix": [["0.5"]]}]},
            "extra.json": {**FOLD, "color": "red"},
            "wrong-width.json": {**FOLD, "pieces": [{"matrix": [["1", "2"]]}]},
        }
        for name, payload in cases.items():
            with self.subTest(name=name):
                with self.assertRaises(ConfigError):
                    mr.vector_map("plugin:" + self.write(name, payload))
        with self.assertRaises(ConfigError):
            mr.vector_map("plugin:" + str(Path(self.tmpdir.name) / "missing.json"))
        broken = Path(self.tmpdir.name) / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            mr.vector_map(f"plugin:{broken}")

    def test_schema_errors_name_the_descriptor(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            mr.displacement_map("plugin:" + self.write("bad.json", {"schema": "afp.delta-map.v1"}))
        self.assertIn("invalid delta-map descriptor", str(ctx.exception))


class DomainDescriptorTest(DescriptorFileCase):
    def test_builtins(self) -> None:
        triangle = load_domain("unit-triangle")
        self.assertIsInstance(triangle, PolytopeDomain)
        self.assertTrue(triangle.contains(point(HALF, HALF)))
        self.assertFalse(triangle.contains(point(1, HALF)))
        self.assertEqual(load_domain("unit-square").anchor(), point(HALF, HALF))

    def test_polytope_file(self) -> None:
        payload = {
            "schema": "afp.domain.v1",
            "kind": "polytope",
            "lower": ["0", "0"],
            "upper": ["1", "1"],
            "A": [["1", "1"]],
            "b": ["1"],
            "anchor": ["1/4", "1/4"],
        }
        domain = load_domain(self.write("tri.json", payload))
        self.assertEqual(domain.anchor(), point(Fraction(1, 4), Fraction(1, 4)))
        self.assertEqual(domain.to_json(), payload)
        self.assertEqual(len(domain.grid(2)), 6)

    def test_bad_domains(self) -> None:
        outside = {"kind": "polytope", "lower": ["0"], "upper": ["1"], "A": [["1"]], "b": ["1/2"], "anchor": ["3/4"]}
        cases = {
            "inverted.json": {"lower": ["1"], "upper": ["0"]},
            "outside.json": outside,
            "kind.json": {"kind": "ball", "lower": ["0"], "upper": ["1"]},
        }
        for name, payload in cases.items():
            with self.subTest(name=name):
                with self.assertRaises(ConfigError):
                    load_domain(self.write(name, payload))
        with self.assertRaises(ConfigError):
            load_domain("unit-cube")


if __name__ == "__main__":
    unittest.main()
