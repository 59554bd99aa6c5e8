import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np

from rustcrack.commands.sweep import run_sweep
from rustcrack.config.constants import ENV_SLOW_TESTS, SECONDS_PER_DAY
from rustcrack.config.loader import apply_overrides, config_from_mapping, load_config
from rustcrack.post.crack_paths import crack_paths
from rustcrack.simulation.driver import Simulation, build_mesh, run
from rustcrack.utils.error_handler import GeometryError, SolverError

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


def _small_config(**time):
    timing = {'total_duration': '2 days', 'step_size': '1 day', 'output_interval': '1 day'}
    timing.update(time)
    return config_from_mapping({
        'name': 'small',
        'concrete': 'cured_147d',
        'transport': {'current_density': '10 uA/cm2'},
        'geometry': {'width': '30 mm', 'height': '30 mm',
                     'rebars': [{'x': '15 mm', 'y': '15 mm', 'diameter': '8 mm'}]},
        'mesh': {'h_sci': '0.2 mm', 'h_bulk': '2 mm', 'h_far': '5 mm', 'refinement_radius': '2 mm'},
        'time': timing,
        'output': {'run_id': 'small', 'probe_samples': 11, 'probe_length': '5 mm'},
    })


class DriverTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.config = _small_config()
        cls.mesh = build_mesh(cls.config)

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _no_current(self, **time):
        config = _small_config(**time)
        return apply_overrides(config, {'transport.current_density': 0.0})

    def test_zero_duration_writes_the_initial_state(self):
        config = _small_config(total_duration=0.0)
        output = run(config, directory=self.root / 'zero', mesh=self.mesh)
        self.assertTrue(output.completed)
        self.assertEqual(len(output.time_series), 1)
        self.assertEqual(output.snapshot_times, [0.0])
        self.assertEqual(output.time_series[0]['crack_width'], 0.0)
        run_dir = self.root / 'zero'
        for name in ('resolved_config.yaml', 'timeseries.csv', 'meta.txt', 'final_state.npz',
                     'snapshots/snapshot_0000.vtk', 'probes/radial_bar0_0000.csv',
                     'probes/circumferential_bar0_0000.csv'):
            self.assertTrue((run_dir / name).exists(), name)
        self.assertIn('status: completed', (run_dir / 'meta.txt').read_text(encoding='utf-8'))
        reloaded = load_config(run_dir / 'resolved_config.yaml')
        self.assertEqual(reloaded, config)

    def test_no_current_leaves_concrete_intact(self):
        output = run(self._no_current(), write_outputs=False, mesh=self.mesh)
        self.assertTrue(output.completed)
        self.assertEqual([row['time_days'] for row in output.time_series], [0.0, 1.0, 2.0])
        self.assertEqual(output.snapshot_times, [0.0, SECONDS_PER_DAY, 2 * SECONDS_PER_DAY])
        self.assertEqual(float(output.final_state.phi.max()), 0.0)
        self.assertEqual(max(row['crack_width'] for row in output.time_series), 0.0)
        self.assertIsNone(output.first_damage)
        self.assertEqual(output.metadata['steps'], 2)

    def test_corroding_run_keeps_its_iron_budget(self):
        config = _small_config(total_duration='1 day', step_size='0.5 days')
        output = run(config, write_outputs=False, mesh=self.mesh)
        self.assertTrue(output.completed)
        last = output.time_series[-1]
        self.assertAlmostEqual(last['time_days'], 1.0)
        self.assertGreater(last['injected_iron'], 0.0)
        self.assertLess(abs(last['mass_drift']), 1e-2)
        self.assertGreater(last['precipitate_volume'], 0.0)
        self.assertTrue(np.all(output.final_state.phi >= 0.0))
        self.assertTrue(np.all(output.final_state.phi <= 1.0))
        self.assertTrue(math.isnan(output.width_at(5.0)))
        changes = [row['min_phi_change'] for row in output.time_series]
        self.assertEqual(changes[0], 0.0)
        self.assertGreaterEqual(min(changes), -1e-12)

    def test_failed_step_is_retried_with_half_the_step(self):
        original = Simulation.staggered_step
        steps = []

        def flaky(simulation, state, dt):
            steps.append(dt)
            if len(steps) == 1:
                raise SolverError('injected failure')
            return original(simulation, state, dt)

        config = self._no_current(total_duration='1 day')
        with mock.patch.object(Simulation, 'staggered_step', flaky):
            output = run(config, write_outputs=False, mesh=self.mesh)

        self.assertTrue(output.completed)
        self.assertEqual(steps[1], 0.5 * steps[0])
        self.assertAlmostEqual(output.time_series[1]['time'], 0.5 * SECONDS_PER_DAY)
        self.assertAlmostEqual(output.final_state.time, SECONDS_PER_DAY)

    def test_persistent_failure_aborts_the_run(self):
        def broken(simulation, state, dt):
            raise SolverError('residual above tolerance')

        config = apply_overrides(self._no_current(), {'time.max_dt_halvings': 2})
        with mock.patch.object(Simulation, 'staggered_step', broken):
            output = run(config, directory=self.root / 'aborted', mesh=self.mesh)

        self.assertFalse(output.completed)
        self.assertIn('residual above tolerance', output.abort_reason)
        self.assertEqual(len(output.time_series), 1)
        self.assertEqual(output.metadata['status'], 'aborted')
        meta = (self.root / 'aborted' / 'meta.txt').read_text(encoding='utf-8')
        self.assertIn('status: aborted', meta)
        self.assertIn('abort_reason:', meta)

    def test_generated_mesh_needs_a_rebar(self):
        config = config_from_mapping({'name': 'plain', 'geometry': {'width': 0.03, 'height': 0.03}})
        with self.assertRaises(GeometryError):
            build_mesh(config)


@unittest.skipUnless(os.getenv(ENV_SLOW_TESTS), 'set RUSTCRACK_SLOW=1 to run the full cross-section case')
class DeskCaseTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.TemporaryDirectory()
        cls.config = apply_overrides(load_config(CONFIG_DIR / 'test2_desk.yaml'), {'output.run_id': 'desk'})
        cls.output = run(cls.config, directory=Path(cls.temp_dir.name) / 'desk')

    @classmethod
    def tearDownClass(cls):
        cls.temp_dir.cleanup()

    def test_desk_case_cracks_the_cover(self):
        output = self.output
        self.assertTrue(output.completed)
        widths = [output.width_at(day) for day in (20.0, 40.0, 60.0)]
        self.assertTrue(all(b >= a for a, b in zip(widths, widths[1:])))
        self.assertAlmostEqual(widths[-1] / 0.25e-3, 1.0, delta=0.3)

    def test_iron_budget_holds_over_the_run(self):
        drifts = [abs(row['mass_drift']) for row in self.output.time_series]
        self.assertLess(max(drifts), 5e-3)

    def test_phase_field_never_heals(self):
        self.assertGreaterEqual(min(row['min_phi_change'] for row in self.output.time_series), -1e-12)

    def test_crack_reaches_the_top_within_a_month(self):
        self.assertIsNotNone(self.output.surface_crack_time)
        self.assertLessEqual(self.output.surface_crack_time, 30.0 * SECONDS_PER_DAY)
        self.assertIn('surface_crack_time_days', self.output.metadata)

    def test_damage_starts_off_the_steel_surface(self):
        damage = self.output.first_damage
        self.assertIsNotNone(damage)
        self.assertGreaterEqual(damage.offset, self.config.mesh.h_sci)


@unittest.skipUnless(os.getenv(ENV_SLOW_TESTS), 'set RUSTCRACK_SLOW=1 to run the multi-rebar and sweep cases')
class ScenarioTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _final(self, name):
        config = apply_overrides(load_config(CONFIG_DIR / f'{name}.yaml'), {'output.run_id': name,
                                                                             'output.write_vtk': False})
        mesh = build_mesh(config)
        output = run(config, directory=self.root / name, mesh=mesh)
        self.assertTrue(output.completed)
        return config, mesh, output

    def test_width_grows_with_the_current_density(self):
        config = apply_overrides(load_config(CONFIG_DIR / 'test2_desk.yaml'), {'output.report_days': [60.0]})
        rows = run_sweep(config, 'i_a', ['5 uA/cm2', '10 uA/cm2', '20 uA/cm2'], directory=self.root)
        self.assertEqual([row['status'] for row in rows], ['completed'] * 3)
        widths = [row['w_60d'] for row in rows]
        self.assertTrue(all(b > a for a, b in zip(widths, widths[1:])), widths)

    def test_close_rebars_delaminate(self):
        for name, bars in (('delamination_3rebar', 3), ('delamination_4rebar', 4)):
            with self.subTest(name=name):
                _, mesh, output = self._final(name)
                paths = crack_paths(mesh, output.final_state.phi, 0.75)
                for index in range(bars - 1):
                    self.assertTrue(paths.joins(index, index + 1), (name, index))

    def test_distant_rebars_spall_the_corners(self):
        _, mesh, output = self._final('spalling_2rebar')
        paths = crack_paths(mesh, output.final_state.phi, 0.75)
        self.assertTrue(paths.reaches(0, 'top') or paths.reaches(0, 'left'))
        self.assertTrue(paths.reaches(1, 'top') or paths.reaches(1, 'right'))
        self.assertFalse(paths.joins(0, 1))

    def test_off_centre_rebar_damage_is_offset(self):
        config, _, output = self._final('crack_offset')
        self.assertIsNotNone(output.first_damage)
        self.assertGreaterEqual(output.first_damage.offset, config.mesh.h_sci)

    def test_halving_the_step_converges(self):
        mesh = build_mesh(_small_config())
        finals = []
        for step in ('1 day', '0.5 days', '0.25 days'):
            config = _small_config(total_duration='4 days', step_size=step, output_interval='4 days')
            output = run(config, write_outputs=False, mesh=mesh)
            self.assertTrue(output.completed)
            finals.append(output.time_series[-1]['precipitate_volume'])
        coarse, medium, fine = finals
        self.assertGreater(fine, 0.0)
        self.assertLess(abs(fine - medium), abs(medium - coarse))
        self.assertLess(abs(fine - medium) / fine, 0.05)



if __name__ == '__main__':
    unittest.main()
