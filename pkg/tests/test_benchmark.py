import math
import unittest
from unittest import mock

import numpy as np

from kgd.benchmark import (
    RepOutcome,
    aggregate,
    failures,
    generate_data,
    run_cell,
    run_experiment,
    run_repetitions,
    scenario_kernel,
    target_value,
    target_values,
)
from kgd.config import ExperimentConfig, RuleConfig
from kgd.core import run_kgd_path
from kgd.errors import KgdConfigError, KgdInputError, KgdNumericError
from kgd.kernels import KernelKind
from kgd.stopping_rules import run_rule as real_run_rule


def _config(**kw):
    base = dict(scenario="G1K1", n_grid=[30], reps=1, rules=["or", "asr"],
                rule_config=RuleConfig(cv_grid=[0.01, 0.1, 1.0]))
    base.update(kw)
    return ExperimentConfig(**base)


class TestTargets(unittest.TestCase):
    def test_tent(self):
        self.assertEqual(target_value("G1K1", 0.25), 0.25)
        self.assertEqual(target_value("G1K1", 0.75), 0.25)
        self.assertEqual(target_value("G1K1", 0.5), 0.5)
        self.assertEqual(target_value("g1k1", 0.0), 0.0)

    def test_radial_target(self):
        self.assertEqual(target_value("G2K2", [0.0, 0.0, 0.0]), 3.0)
        self.assertEqual(target_value("G2K2", [1.0, 0.0, 0.0]), 0.0)
        self.assertEqual(target_value("G2K2", [0.8, 0.8, 0.8]), 0.0)
        vals = target_values("G2K2", np.array([[0.1, 0.0, 0.0], [0.3, 0.0, 0.0], [0.6, 0.0, 0.0]]))
        self.assertTrue(np.all(np.diff(vals) < 0))

    def test_scenario_kernels(self):
        self.assertIs(scenario_kernel("G1K1").kind, KernelKind.MIN_PLUS_ONE)
        spec = scenario_kernel("G2K2")
        self.assertIs(spec.kind, KernelKind.WENDLAND_G3)
        self.assertEqual(spec.input_dim, 3)
        with self.assertRaises(KgdInputError):
            scenario_kernel("G9")


class TestGenerateData(unittest.TestCase):
    def test_deterministic_per_cell(self):
        cfg = _config()
        a_train, a_test, a_f = generate_data(cfg, 40, 3)
        b_train, b_test, b_f = generate_data(cfg, 40, 3)
        np.testing.assert_array_equal(a_train.inputs, b_train.inputs)
        np.testing.assert_array_equal(a_train.outputs, b_train.outputs)
        np.testing.assert_array_equal(a_test.inputs, b_test.inputs)
        np.testing.assert_array_equal(a_f, b_f)
        c_train, _, _ = generate_data(cfg, 40, 4)
        self.assertFalse(np.array_equal(a_train.inputs, c_train.inputs))

    def test_shapes_and_noiseless_test_set(self):
        train, test, f_rho = generate_data(_config(scenario="G2K2"), 50, 0)
        self.assertEqual(train.inputs.shape, (50, 3))
        self.assertEqual(test.inputs.shape, (5, 3))
        np.testing.assert_array_equal(test.outputs, target_values("G2K2", test.inputs))
        np.testing.assert_array_equal(f_rho, target_values("G2K2", train.inputs))

    def test_zero_noise(self):
        train, _, f_rho = generate_data(_config(noise_variance=0.0), 30, 0)
        np.testing.assert_array_equal(train.outputs, f_rho)

    def test_huge_noise(self):
        train, _, f_rho = generate_data(_config(noise_variance=1e5), 200, 0)
        self.assertGreater(np.std(train.outputs - f_rho), 100.0)

    def test_noise_variance_matches_config(self):
        train, _, f_rho = generate_data(_config(noise_variance=0.2), 100_000, 0)
        var = float(np.var(train.outputs - f_rho))
        self.assertLessEqual(abs(var - 0.2), 0.02 * 0.2)

    def test_small_n_rejected(self):
        with self.assertRaises(KgdInputError):
            generate_data(_config(), 9, 0)


class TestRunCell(unittest.TestCase):
    def test_single_rep(self):
        out = run_cell(_config(), 30, 0)
        self.assertEqual([o.rule for o in out], ["or", "asr"])
        self.assertTrue(all(o.ok for o in out))
        for o in out:
            self.assertGreaterEqual(o.t_hat, 0)
            self.assertTrue(math.isfinite(o.test_mse))
        self.assertIn(out[1].constant, [0.01, 0.1, 1.0])

    def test_oracle_is_closest(self):
        cfg = _config(n_grid=[40], rules=["or", "asr", "bp", "dsr2"])
        for rep in range(5):
            out = {o.rule: o for o in run_cell(cfg, 40, rep)}
            for rule in ("asr", "bp", "dsr2"):
                if out[rule].ok:
                    self.assertLessEqual(out["or"].oracle_distance, out[rule].oracle_distance + 1e-12)

    def test_rule_failure_is_recorded(self):
        def flaky(rule, *args, **kwargs):
            if rule == "bp":
                raise KgdNumericError("synthetic failure")
            return real_run_rule(rule, *args, **kwargs)

        cfg = _config(rules=["or", "bp"])
        with mock.patch("kgd.benchmark.run_rule", side_effect=flaky):
            out = run_repetitions(cfg)
        bad = failures(out)
        self.assertEqual([(o.rule, o.n, o.rep) for o in bad], [("bp", 30, 0)])
        self.assertIn("synthetic failure", bad[0].error)
        self.assertTrue(bad[0].error.startswith("numeric error:"))
        curves = aggregate(cfg, out)
        bp = curves[1].points[0]
        self.assertEqual(bp.rep_count, 0)
        self.assertTrue(math.isnan(bp.mean_mse))
        self.assertEqual(curves[0].points[0].rep_count, 1)

    def test_asr_cell_builds_no_path(self):
        cfg = _config(rules=["asr"], rule_config=RuleConfig(t_max=10 ** 6, cv_grid=[0.01, 0.1, 1.0]))
        with mock.patch("kgd.stopping_rules.run_kgd_path", wraps=run_kgd_path) as built:
            out = run_cell(cfg, 30, 0)
        self.assertEqual(built.call_count, 0)
        self.assertTrue(out[0].ok)
        self.assertFalse(out[0].truncated)
        self.assertLess(out[0].t_hat, 10 ** 6)

    def test_scanning_rules_share_one_path(self):
        cfg = _config(rules=["or", "asr", "bp", "dsr2"])
        with mock.patch("kgd.stopping_rules.run_kgd_path", wraps=run_kgd_path) as built:
            out = run_cell(cfg, 30, 0)
        self.assertTrue(all(o.ok for o in out))
        # one path for the cell, one inside the balancing cross-validation
        self.assertEqual(built.call_count, 2)
        self.assertEqual(built.call_args_list[0].args[3], 30)

    def test_setup_failure_marks_every_rule(self):
        with mock.patch("kgd.benchmark.build_kernel_matrix", side_effect=KgdNumericError("bad matrix")):
            out = run_cell(_config(), 30, 0)
        self.assertEqual(len(out), 2)
        self.assertTrue(all(not o.ok for o in out))


class TestRepetitions(unittest.TestCase):
    def test_cells_are_independent_of_order(self):
        cfg = _config(n_grid=[20, 30], reps=2)
        out = run_repetitions(cfg)
        self.assertEqual([(o.n, o.rep, o.rule) for o in out][:4],
                         [(20, 0, "or"), (20, 0, "asr"), (20, 1, "or"), (20, 1, "asr")])
        self.assertEqual([o for o in out if o.n == 30 and o.rep == 1], run_cell(cfg, 30, 1))

    def test_parallel_matches_serial(self):
        cfg = _config(n_grid=[20, 30], reps=2)
        self.assertEqual(run_repetitions(cfg, jobs=2), run_repetitions(cfg, jobs=1))

    def test_master_seed_changes_numbers(self):
        a = run_repetitions(_config(master_seed=1))
        b = run_repetitions(_config(master_seed=2))
        self.assertNotEqual(a[0].test_mse, b[0].test_mse)

    def test_more_reps_keep_earlier_reps(self):
        cfg = _config(n_grid=[20, 30], reps=2)
        short = run_repetitions(cfg)
        long = run_repetitions(cfg.model_copy(update={"reps": 4}))
        self.assertEqual([o for o in long if o.rep < 2], short)

    def test_jobs_must_be_positive(self):
        with self.assertRaises(KgdConfigError):
            run_repetitions(_config(), jobs=0)


class TestAggregate(unittest.TestCase):
    def test_means_and_counts(self):
        cfg = _config(n_grid=[20, 30], reps=3, rules=["asr"])
        outcomes = [
            RepOutcome("asr", 20, 0, t_hat=2, test_mse=1.0, oracle_distance=0.1),
            RepOutcome("asr", 20, 1, t_hat=4, test_mse=3.0, oracle_distance=0.1, truncated=True),
            RepOutcome("asr", 20, 2, error="input error: x"),
            RepOutcome("asr", 30, 0, t_hat=5, test_mse=2.0, oracle_distance=0.1),
        ]
        (curve,) = aggregate(cfg, outcomes)
        self.assertEqual(curve.scenario, "G1K1")
        first, second = curve.points
        self.assertEqual((first.n, first.rep_count, first.truncated_count), (20, 2, 1))
        self.assertEqual(first.mean_mse, 2.0)
        self.assertEqual(first.std_mse, 1.0)
        self.assertEqual(first.mean_t_hat, 3.0)
        self.assertEqual((second.rep_count, second.std_mse), (1, 0.0))

    def test_run_experiment_shape(self):
        cfg = _config(n_grid=[20, 30], reps=2, rules=["or", "ho"])
        curves = run_experiment(cfg)
        self.assertEqual([c.rule_name for c in curves], ["or", "ho"])
        self.assertEqual([p.n for p in curves[0].points], [20, 30])
        self.assertTrue(all(p.rep_count == 2 for c in curves for p in c.points))


if __name__ == "__main__":
    unittest.main()
