import json
import os
import tempfile
from unittest import TestCase

import support
from errors import ConfigurationError
from scenario import RunManifest, Scenario, load_scenario, sha256_file


class TestScenario(TestCase):
    def test_defaults(self):
        scenario = Scenario()
        self.assertEqual(scenario.seed, 0)
        self.assertEqual(scenario.technology.noise_sigma, 0.35)
        self.assertEqual(scenario.clustering.k_range, tuple(range(1, 16)))

    def test_snapshot_round_trip(self):
        scenario = Scenario.from_dict({
            "scenario": "custom",
            "seed": 99,
            "technology": {"noise_sigma": 0.0},
            "equilibrium": {"phi_trues": [0.25, 0.75]},
            "simulation": {"gap_range": [1, 3], "mode": "deterministic"},
            "clustering": {"rounds": [1, 3], "k_max": 4},
        })
        self.assertEqual(Scenario.from_dict(scenario.snapshot()), scenario)
        self.assertEqual(scenario.equilibrium.phi_trues, (0.25, 0.75))
        self.assertEqual(scenario.simulation.gap_range, (1.0, 3.0))
        self.assertTrue(scenario.technology.deterministic)

    def test_snapshot_is_json(self):
        json.dumps(Scenario().snapshot())

    def test_unknown_section(self):
        with self.assertRaises(ConfigurationError) as ctx:
            Scenario.from_dict({"plotting": {}})
        self.assertIn("plotting", str(ctx.exception))

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationError) as ctx:
            Scenario.from_dict({"technology": {"alpha": 0.5}})
        self.assertIn("alpha", str(ctx.exception))

    def test_invalid_values(self):
        for data in ({"seed": -1}, {"seed": "7"}, {"seed": True}, {"seed": 2 ** 64},
                     {"technology": {"effort_exponent": 1.5}},
                     {"simulation": {"mode": "chaotic"}},
                     {"clustering": {"k_min": 3, "k_max": 2}},
                     {"estimate": {"gmm_specs": [["lag_score"]]}},
                     {"experiment": []}):
            with self.subTest(data=data), self.assertRaises(ConfigurationError):
                Scenario.from_dict(data)

    def test_with_seed(self):
        scenario = Scenario()
        self.assertIs(scenario.with_seed(None), scenario)
        reseeded = scenario.with_seed(42)
        self.assertEqual(reseeded.seed, 42)
        self.assertEqual(reseeded.technology, scenario.technology)

    def test_load_shipped_scenarios(self):
        default = load_scenario(os.path.join(support.ROOT, "scenarios", "default.json"))
        self.assertEqual(default.name, "default")
        self.assertEqual(default.seed, 20240101)
        self.assertEqual(default.clustering.k_max, 6)
        calibrated = load_scenario(os.path.join(support.ROOT, "scenarios", "calibrated.json"))
        self.assertEqual(calibrated.name, "calibrated")

    def test_load_none_gives_defaults(self):
        self.assertEqual(load_scenario(None), Scenario())

    def test_load_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_scenario(os.path.join(tmp, "missing.json"))
            broken = os.path.join(tmp, "broken.json")
            with open(broken, "w") as f:
                f.write("{not json")
            with self.assertRaises(ConfigurationError):
                load_scenario(broken)


class TestRunManifest(TestCase):
    def test_write_read_and_hashes(self):
        with tempfile.TemporaryDirectory() as tmp:
            artifact = os.path.join(tmp, "sub", "out.csv")
            os.makedirs(os.path.dirname(artifact))
            with open(artifact, "wb") as f:
                f.write(b"abc")
            manifest = RunManifest(command="panel", scenario="default", config=Scenario().snapshot(), seed=3,
                                   options={"n": 10})
            manifest.record(tmp, artifact)
            manifest.record_input(artifact)
            self.assertEqual(
                manifest.artifacts,
                {"sub/out.csv": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"},
            )
            self.assertEqual(manifest.inputs[os.path.abspath(artifact)], sha256_file(artifact))

            path = manifest.write(tmp)
            self.assertEqual(os.path.basename(path), "manifest_panel.json")
            self.assertEqual(RunManifest.read(path), manifest)

    def test_read_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                RunManifest.read(os.path.join(tmp, "manifest_panel.json"))
            path = os.path.join(tmp, "manifest_bad.json")
            with open(path, "w") as f:
                json.dump({"command": "panel"}, f)
            with self.assertRaises(ConfigurationError):
                RunManifest.read(path)
