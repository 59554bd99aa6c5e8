import os
import tempfile
import unittest
from pathlib import Path

import numpy as np

from rustcrack.config.constants import BAR_BENCHMARK, ENV_SLOW_TESTS
from rustcrack.models.params import ConcreteParams, ModelVariant
from rustcrack.physics.phasefield import at2_length_from_strength
from rustcrack.simulation.benchmark import BarBenchmark, run_bar_benchmark

CONCRETE = ConcreteParams.model_validate({})


class BarBenchmarkTests(unittest.TestCase):
    def test_elastic_branch_follows_the_plane_strain_modulus(self):
        bench = BarBenchmark('pfczm', element_size=2.0e-3)
        result = bench.run(increments=2, max_normalized_strain=0.5)
        self.assertEqual(len(result.rows), 2)
        ratio = result.normalized_stress / np.array([row['normalized_strain'] for row in result.rows])
        np.testing.assert_allclose(ratio, 1.0 / (1.0 - CONCRETE.poisson_ratio ** 2), rtol=1e-6)
        self.assertEqual(max(row['max_phi'] for row in result.rows), 0.0)

    def test_weak_band_sets_the_strength(self):
        bench = BarBenchmark(ModelVariant.PFCZM, element_size=2.0e-3, reduction=0.9)
        self.assertAlmostEqual(bench.strength, 0.9 * CONCRETE.tensile_strength)

    def test_at2_strength_comes_from_the_length_scale(self):
        bench = BarBenchmark('at2', element_size=2.0e-3, at2_length=0.0724)
        self.assertEqual(bench.model.length_scale, 0.0724)
        self.assertLess(bench.strength, CONCRETE.tensile_strength)

    def test_at2_length_follows_the_uniaxial_plane_strain_modulus(self):
        bench = BarBenchmark('at2', element_size=2.0e-3)
        modulus = CONCRETE.young_modulus / (1.0 - CONCRETE.poisson_ratio ** 2)
        expected = at2_length_from_strength(CONCRETE.tensile_strength, modulus, 0.98 * CONCRETE.fracture_energy)
        self.assertAlmostEqual(bench.model.length_scale / expected, 1.0, places=12)
        self.assertAlmostEqual(bench.strength / CONCRETE.tensile_strength, 1.0, places=9)
        self.assertEqual(bench.length, BAR_BENCHMARK['at2_bar_length'])

    def test_at2_bar_stores_enough_energy_to_break(self):
        bench = BarBenchmark('at2', element_size=2.0e-3)
        # homogeneous AT2 peak sits at phi = 1/4, so the secant stiffness is 9/16 E'
        stored = bench.strength ** 2 * bench.length / (2.0 * (9.0 / 16.0) * bench.uniaxial_modulus)
        self.assertGreater(stored, CONCRETE.fracture_energy)
        short = BarBenchmark('at2', element_size=2.0e-3, length=BAR_BENCHMARK['length'])
        stored = short.strength ** 2 * short.length / (2.0 * (9.0 / 16.0) * short.uniaxial_modulus)
        self.assertLess(stored, CONCRETE.fracture_energy)

    def test_curve_file(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            run_bar_benchmark('stress', directory=temp_dir, increments=1, max_normalized_strain=0.5,
                              element_size=2.0e-3)
            text = (Path(temp_dir) / 'bar_stress_based.csv').read_text(encoding='utf-8')
        self.assertIn('# variant: stress_based', text)
        self.assertIn('increment,displacement,strain,stress', text)

    def test_needs_an_increment(self):
        with self.assertRaises(ValueError):
            BarBenchmark('pfczm', element_size=2.0e-3).run(increments=0)


@unittest.skipUnless(os.getenv(ENV_SLOW_TESTS), 'set RUSTCRACK_SLOW=1 to run the full tension bar')
class BarSofteningTests(unittest.TestCase):
    def _curve(self, variant):
        result = run_bar_benchmark(variant, element_size=2.0e-3)
        return result.normalized_stress, result.peak_index, result

    def test_cohesive_peak_and_monotone_tail(self):
        stress, peak, result = self._curve('pfczm')
        self.assertAlmostEqual(stress[peak], 1.0, delta=0.02)
        rises = np.diff(stress[peak:])
        self.assertLessEqual(float(rises.max(initial=0.0)), 1e-3 * stress[peak])
        self.assertLess(stress[-1], 0.5 * stress[peak])
        self.assertGreater(result.rows[-1]['max_phi'], 0.9)

    def test_at2_fails_suddenly_after_peak(self):
        stress, peak, _ = self._curve('at2')
        self.assertAlmostEqual(stress[peak], 1.0, delta=0.03)
        self.assertLess(peak + 3, len(stress))
        self.assertLess(stress[peak + 3], 0.05 * stress[peak])

    def test_stress_based_fails_suddenly_after_peak(self):
        stress, peak, _ = self._curve('stress')
        self.assertLess(peak + 3, len(stress))
        self.assertLess(stress[peak + 3], 0.05 * stress[peak])


if __name__ == '__main__':
    unittest.main()
