import math
import unittest

import numpy as np

from kgd.benchmark import generate_data, target_values
from kgd.config import ExperimentConfig, RuleConfig
from kgd.constants import DEFAULT_CV_GRID
from kgd.errors import KgdInputError
from kgd.kernels import Dataset, build_kernel_matrix
from kgd.stopping_rules import CvSplit, asr_stop, cross_validate_constant, estimate_noise_std
from kgd_testlib import K1, K2_3D, noisy_tent, tent


class TestNoiseEstimate(unittest.TestCase):
    def test_constant_outputs_give_zero(self):
        rng = np.random.default_rng(0)
        self.assertEqual(estimate_noise_std(Dataset(inputs=rng.random(30), outputs=np.full(30, 2.5))), 0.0)
        self.assertEqual(estimate_noise_std(Dataset(inputs=rng.random((30, 3)), outputs=np.full(30, -1.0))), 0.0)

    def test_needs_three_samples(self):
        with self.assertRaises(KgdInputError):
            estimate_noise_std(Dataset(inputs=[0.1, 0.9], outputs=[0.0, 1.0]))

    def test_noiseless_tent_shrinks_with_grid(self):
        vals = []
        for n in (20, 80, 320):
            x = np.linspace(0.0, 1.0, n)
            vals.append(estimate_noise_std(Dataset(inputs=x, outputs=tent(x))))
        self.assertGreater(vals[0], vals[1])
        self.assertGreater(vals[1], vals[2])
        self.assertLess(vals[2], 0.01)

    def test_one_dimensional_formula(self):
        # sorted outputs 0, 1, 0 -> sum of squared differences 2 over 2 (n - 1)
        d = Dataset(inputs=[0.9, 0.1, 0.5], outputs=[0.0, 0.0, 1.0])
        self.assertAlmostEqual(estimate_noise_std(d), math.sqrt(2.0 / 4.0), places=15)

    def test_duplicated_inputs_in_several_dimensions(self):
        x = np.array([[0.2, 0.2, 0.2], [0.2, 0.2, 0.2], [0.8, 0.8, 0.8], [0.8, 0.8, 0.8]])
        d = Dataset(inputs=x, outputs=[1.0, 1.0, 3.0, 3.0])
        self.assertEqual(estimate_noise_std(d), 0.0)

    def test_calibrated_on_tent_with_known_noise(self):
        sigma = math.sqrt(0.2)
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.random(2000)
            y = target_values("G1K1", x) + rng.normal(0.0, sigma, 2000)
            est = estimate_noise_std(Dataset(inputs=x, outputs=y))
            hits += abs(est - sigma) <= 0.1 * sigma
        self.assertGreaterEqual(hits, 99)

    def test_nearest_neighbour_variant_tracks_noise(self):
        rng = np.random.default_rng(5)
        x = rng.random((3000, 3))
        y = target_values("G2K2", x) + rng.normal(0.0, 0.5, 3000)
        self.assertLess(abs(estimate_noise_std(Dataset(inputs=x, outputs=y)) - 0.5), 0.1)


class TestCrossValidation(unittest.TestCase):
    def test_singleton_grid(self):
        data = noisy_tent(60, seed=1)
        self.assertEqual(cross_validate_constant("asr", data, K1, [0.25], CvSplit()), 0.25)

    def test_deterministic(self):
        data = noisy_tent(80, seed=2)
        grid = [2.0 ** k for k in range(-6, 7)]
        a = cross_validate_constant("bp", data, K1, grid, CvSplit())
        b = cross_validate_constant("bp", data, K1, list(reversed(grid)), CvSplit())
        self.assertEqual(a, b)
        self.assertIn(a, grid)

    def test_oversized_constant_not_selected(self):
        data = noisy_tent(200, seed=3, noise_std=0.05)
        chosen = cross_validate_constant("asr", data, K1, [1e-3, 1e6], CvSplit())
        self.assertEqual(chosen, 1e-3)
        fit = data.subset(np.arange(100))
        d = asr_stop(fit, build_kernel_matrix(K1, fit.inputs), K1, RuleConfig(c_cv=1e6))
        self.assertEqual(d.t_hat, 1)

    def test_default_grid_picks_interior_constant(self):
        cfg = ExperimentConfig(scenario="G1K1", n_grid=[200], reps=2)
        grid = sorted(DEFAULT_CV_GRID)
        for rep in range(2):
            train, _, _ = generate_data(cfg, 200, rep)
            chosen = cross_validate_constant("asr", train, K1, grid, CvSplit())
            self.assertLess(grid[0], chosen, msg=f"rep={rep}")
            self.assertLess(chosen, grid[-1], msg=f"rep={rep}")

    def test_never_firing_constants_are_skipped(self):
        data = noisy_tent(60, seed=7)
        # 1e-12 runs to t_max on the fitted half; 1e6 stops at t = 1
        self.assertEqual(cross_validate_constant("asr", data, K1, [1e-12, 1e6], CvSplit()), 1e6)
        # when nothing fires the smallest constant still wins
        self.assertEqual(cross_validate_constant("asr", data, K1, [1e-12, 1e-11], CvSplit()), 1e-12)

    def test_edge_choice_is_logged(self):
        data = noisy_tent(60, seed=8)
        with self.assertLogs("kgd.stopping_rules", level="WARNING") as logs:
            chosen = cross_validate_constant("asr", data, K1, [1e3, 1e4], CvSplit())
        self.assertEqual(chosen, 1e3)
        self.assertIn("edge of the grid", logs.output[0])

    def test_rejects_bad_grids_and_rules(self):
        data = noisy_tent(40, seed=4)
        with self.assertRaises(KgdInputError):
            cross_validate_constant("asr", data, K1, [], CvSplit())
        with self.assertRaises(KgdInputError):
            cross_validate_constant("asr", data, K1, [1.0, -1.0], CvSplit())
        with self.assertRaises(KgdInputError):
            cross_validate_constant("or", data, K1, [1.0], CvSplit())

    def test_split_needs_both_sides(self):
        with self.assertRaises(KgdInputError):
            CvSplit(fraction=0.5).indices(1)
        fit, held = CvSplit(fraction=0.5).indices(7)
        self.assertEqual(fit.tolist(), [0, 1, 2])
        self.assertEqual(held.tolist(), [3, 4, 5, 6])

    def test_dsr_constant_in_three_dimensions(self):
        rng = np.random.default_rng(6)
        x = rng.random((60, 3))
        data = Dataset(inputs=x, outputs=target_values("G2K2", x) + rng.normal(0.0, 0.45, 60))
        grid = [0.5, 2.0, 8.0]
        self.assertIn(cross_validate_constant("dsr1", data, K2_3D, grid, CvSplit()), grid)


if __name__ == "__main__":
    unittest.main()
