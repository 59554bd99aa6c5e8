import tempfile
import unittest
from concurrent.futures import Future
from pathlib import Path
from unittest import mock

from rustcrack.commands.sweep import check_parameter, configure_point, run_sweep, sweep_columns, worker_count
from rustcrack.config.loader import config_from_mapping
from rustcrack.utils.error_handler import ConfigError

BASE = {
    'name': 'sweep',
    'concrete': 'cured_147d',
    'geometry': {'width': '30 mm', 'height': '30 mm',
                 'rebars': [{'x': '15 mm', 'y': '15 mm', 'diameter': '8 mm'}]},
    'mesh': {'h_sci': '0.2 mm', 'h_bulk': '2 mm', 'h_far': '5 mm', 'refinement_radius': '2 mm'},
    'time': {'total_duration': '1 day', 'step_size': '0.5 days', 'output_interval': '1 day'},
    'output': {'write_vtk': False, 'report_days': [1.0], 'probe_samples': 5, 'probe_length': '2 mm'},
}


class SweepPointTests(unittest.TestCase):
    def setUp(self):
        self.config = config_from_mapping(BASE)

    def test_unknown_parameter(self):
        with self.assertRaises(ConfigError) as ctx:
            check_parameter('w_c')
        self.assertEqual(ctx.exception.field, 'w_c')

    def test_diameter_keeps_the_cover(self):
        cover = self.config.geometry.cover(0)
        point = configure_point(self.config, 'd', '10 mm')
        self.assertAlmostEqual(point.geometry.rebars[0].diameter, 0.010)
        self.assertAlmostEqual(point.geometry.cover(0), cover, places=12)

    def test_cover_keeps_the_diameter(self):
        point = configure_point(self.config, 'c', '8 mm')
        self.assertAlmostEqual(point.geometry.cover(0), 0.008, places=12)
        self.assertEqual(point.geometry.rebars[0].diameter, self.config.geometry.rebars[0].diameter)
        self.assertAlmostEqual(point.geometry.rebars[0].y, 0.018, places=12)

    def test_bulk_porosity_keeps_the_interface_ratio(self):
        ratio = self.config.transport.sci_porosity / self.config.transport.bulk_porosity
        point = configure_point(self.config, 'p_0', 0.2)
        self.assertEqual(point.transport.bulk_porosity, 0.2)
        self.assertAlmostEqual(point.transport.sci_porosity, 0.2 * ratio, places=12)

    def test_tensile_strength_numbers_are_megapascal(self):
        point = configure_point(self.config, 'ft_gf', 3.0)
        self.assertAlmostEqual(point.concrete.tensile_strength, 3.0e6)
        stronger = configure_point(self.config, 'ft_gf', '4 MPa')
        self.assertGreater(stronger.concrete.young_modulus, point.concrete.young_modulus)
        self.assertGreater(stronger.concrete.fracture_energy, point.concrete.fracture_energy)

    def test_plain_keys_take_units(self):
        point = configure_point(self.config, 'i_a', '1 uA/cm2')
        self.assertAlmostEqual(point.transport.current_density, 0.01)
        point = configure_point(self.config, 'theta_l_D_m', 2e-11)
        self.assertEqual(point.transport.diffusivity_ii, 2e-11)
        self.assertEqual(point.transport.diffusivity_iii, 2e-11)

    def test_geometric_sweep_needs_a_rebar(self):
        plain = config_from_mapping({'name': 'plain', 'geometry': {'width': 0.03, 'height': 0.03}})
        with self.assertRaises(ConfigError):
            configure_point(plain, 'd', 0.01)


class WorkerCountTests(unittest.TestCase):
    def test_environment_caps_the_pool(self):
        self.assertEqual(worker_count(8, {'RUSTCRACK_WORKERS': '3'}), 3)
        self.assertEqual(worker_count(2, {'RUSTCRACK_WORKERS': '3'}), 2)
        self.assertGreaterEqual(worker_count(4, {}), 1)
        self.assertLessEqual(worker_count(4, {}), 4)

    def test_bad_worker_values(self):
        for raw in ('many', '0', '-2'):
            with self.assertRaises(ConfigError):
                worker_count(4, {'RUSTCRACK_WORKERS': raw})


class _InlinePool:
    """Runs submissions at once and remembers the requested pool size."""
    sizes = []

    def __init__(self, max_workers):
        self.sizes.append(max_workers)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        return False

    def submit(self, function, *args):
        future = Future()
        try:
            future.set_result(function(*args))
        except Exception as exc:
            future.set_exception(exc)
        return future


def _fail_second_point(mapping, directory, report_days):
    if mapping['output']['run_id'].endswith('_01'):
        raise RuntimeError('mesh generator crashed')
    return {'run_id': mapping['output']['run_id'], 'status': 'completed', 'abort_reason': '',
            'w_1d': 1.0e-6, 'relative_w_1d': 0.01}


class RunSweepTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_serial_sweep_writes_the_table_in_value_order(self):
        config = config_from_mapping(BASE)
        values = ['10 uA/cm2', '0 uA/cm2']
        rows = run_sweep(config, 'i_a', values, directory=self.root, workers=1, xlsx=True)

        self.assertEqual([row['value'] for row in rows], values)
        self.assertEqual([row['status'] for row in rows], ['completed', 'completed'])
        self.assertEqual(rows[1]['w_1d'], 0.0)
        self.assertTrue((self.root / 'i_a_00' / 'timeseries.csv').exists())
        self.assertTrue((self.root / 'i_a_01' / 'meta.txt').exists())
        self.assertTrue((self.root / 'sweep_i_a.xlsx').exists())

        lines = [line for line in (self.root / 'sweep_i_a.csv').read_text(encoding='utf-8').splitlines()
                 if not line.startswith('#')]
        self.assertEqual(lines[0], ','.join(sweep_columns([1.0])))
        self.assertTrue(lines[1].startswith('i_a,10 uA/cm2,i_a_00,completed'))
        self.assertTrue(lines[2].startswith('i_a,0 uA/cm2,i_a_01,completed'))

    def test_failed_point_becomes_a_failed_row(self):
        config = config_from_mapping(BASE)
        with mock.patch('rustcrack.commands.sweep._run_point', side_effect=_fail_second_point):
            with self.assertLogs('rustcrack.commands.sweep', level='ERROR'):
                rows = run_sweep(config, 'i_a', ['5 uA/cm2', '10 uA/cm2', '20 uA/cm2'],
                                 directory=self.root, workers=1)
        self.assertEqual([row['status'] for row in rows], ['completed', 'failed', 'completed'])
        self.assertIn('mesh generator crashed', rows[1]['abort_reason'])
        self.assertEqual(rows[1]['run_id'], 'i_a_01')
        lines = (self.root / 'sweep_i_a.csv').read_text(encoding='utf-8').splitlines()
        self.assertTrue(any(line.startswith('i_a,10 uA/cm2,i_a_01,failed') for line in lines))

    def test_pool_is_capped_by_the_points_and_survives_failures(self):
        config = config_from_mapping(BASE)
        _InlinePool.sizes = []
        with mock.patch('rustcrack.commands.sweep.ProcessPoolExecutor', _InlinePool), \
                mock.patch('rustcrack.commands.sweep._run_point', _fail_second_point):
            rows = run_sweep(config, 'i_a', ['5 uA/cm2', '10 uA/cm2'], directory=self.root, workers=16)
        self.assertEqual(_InlinePool.sizes, [2])
        self.assertEqual([row['status'] for row in rows], ['completed', 'failed'])

    def test_empty_value_list(self):
        with self.assertRaises(ConfigError):
            run_sweep(config_from_mapping(BASE), 'i_a', [], directory=self.root, workers=1)


if __name__ == '__main__':
    unittest.main()
