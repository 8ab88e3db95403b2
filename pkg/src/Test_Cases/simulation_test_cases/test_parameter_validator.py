"""
Unit tests for ParameterValidator
"""

import unittest
import sys
import os

# Add Simulation_Codebase to path to import simulation modules
simulation_codebase_path = os.path.join(
    os.path.dirname(__file__), "..", "..", "Simulation_Codebase"
)
sys.path.insert(0, simulation_codebase_path)

from parameter_validator import ParameterValidator


class TestParameterValidator(unittest.TestCase):
    """Test cases for ParameterValidator"""

    def setUp(self):
        """Set up test fixtures"""
        self.validator = ParameterValidator()
        self.bell = {
            "seed": 0,
            "trials": 100,
            "delta": 0.01,
            "n": 10,
            "alpha_sq": 0.5,
        }

    def test_validate_delta(self):
        """delta must lie in (0, 0.5]"""
        self.assertEqual(self.validator.validate_delta(0.5), (True, None))
        for bad in (0.0, 0.7, -0.1, "abc", None):
            is_valid, error = self.validator.validate_delta(bad)
            self.assertFalse(is_valid)
            self.assertIsNotNone(error)

    def test_validate_trials(self):
        """Trials must be a positive integer"""
        self.assertEqual(self.validator.validate_trials(1), (True, None))
        for bad in (0, -5, 2.5, True, "ten"):
            self.assertFalse(self.validator.validate_trials(bad)[0])

    def test_validate_n_detectors(self):
        """Detector count fits the register"""
        self.assertTrue(self.validator.validate_n_detectors(23)[0])
        self.assertFalse(self.validator.validate_n_detectors(24)[0])
        self.assertFalse(self.validator.validate_n_detectors(0)[0])
        small = ParameterValidator(max_register=4)
        self.assertFalse(small.validate_n_detectors(4)[0])

    def test_validate_r_branch(self):
        """r >= 1 and r * delta <= 0.5"""
        self.assertTrue(self.validator.validate_r_branch(1.0, 0.01)[0])
        self.assertTrue(self.validator.validate_r_branch(50.0, 0.01)[0])
        is_valid, error = self.validator.validate_r_branch(0.5, 0.01)
        self.assertFalse(is_valid)
        self.assertIn("r-branch", error)
        self.assertFalse(self.validator.validate_r_branch(51.0, 0.01)[0])

    def test_validate_seed(self):
        """Seeds are unsigned 64-bit integers"""
        self.assertTrue(self.validator.validate_seed(0)[0])
        self.assertTrue(self.validator.validate_seed((1 << 64) - 1)[0])
        for bad in (-1, 1 << 64, 1.0, "7"):
            self.assertFalse(self.validator.validate_seed(bad)[0])

    def test_validate_format(self):
        """jsonl and csv only"""
        self.assertTrue(self.validator.validate_format("csv")[0])
        self.assertFalse(self.validator.validate_format("xml")[0])

    def test_validate_bell_parameters(self):
        """A complete bell-parity parameter set passes; a bad alpha-sq fails"""
        self.assertEqual(self.validator.validate_parameters("bell-parity", self.bell), (True, None))
        self.bell["alpha_sq"] = 1.0
        is_valid, error = self.validator.validate_parameters("bell-parity", self.bell)
        self.assertFalse(is_valid)
        self.assertIn("alpha-sq", error)

    def test_validate_epr_parameters(self):
        """side-a must be known and a measured a side needs a chain"""
        params = {"seed": 0, "trials": 10, "delta": 0.1, "chain_length": 0, "side_a": "off"}
        self.assertTrue(self.validator.validate_parameters("epr", params)[0])
        params["side_a"] = "on"
        self.assertFalse(self.validator.validate_parameters("epr", params)[0])
        params["side_a"] = "sometimes"
        self.assertFalse(self.validator.validate_parameters("epr", params)[0])

    def test_validate_emzi_analytic_parameters(self):
        """Every r value is checked; trials are not needed"""
        params = {"seed": 0, "delta": 0.01, "r_values": [1.0, 2.0]}
        self.assertTrue(self.validator.validate_parameters("emzi-analytic", params)[0])
        params["r_values"] = [1.0, 0.5]
        self.assertFalse(self.validator.validate_parameters("emzi-analytic", params)[0])
        params["r_values"] = []
        self.assertFalse(self.validator.validate_parameters("emzi-analytic", params)[0])

    def test_validate_walk_parameters(self):
        """p0 strictly inside (0, 1); steps nonnegative when given"""
        params = {"seed": 0, "trials": 10, "delta": 0.1, "p0": 0.5, "steps": None}
        self.assertTrue(self.validator.validate_parameters("walk", params)[0])
        params["steps"] = -1
        self.assertFalse(self.validator.validate_parameters("walk", params)[0])
        params["steps"] = 5
        params["p0"] = 1.0
        self.assertFalse(self.validator.validate_parameters("walk", params)[0])


if __name__ == "__main__":
    unittest.main()
