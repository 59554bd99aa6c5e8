import json
import logging
import tempfile
import unittest
from pathlib import Path

from rustcrack.utils.error_handler import ConfigError, ErrorHandler, SolverError, register_error_handlers
from rustcrack.utils.logger import (
    KeyValueFormatter,
    StructuredFormatter,
    close_file_handlers,
    get_logger,
    setup_logging,
)
from rustcrack.utils.output_paths import get_output_root, new_run_id, reset_cache, run_directory


def _record(**extra):
    record = logging.LogRecord('rustcrack.test', logging.INFO, __file__, 1, 'Step completed', None, None)
    record.__dict__.update(extra)
    return record


class FormatterTests(unittest.TestCase):
    def test_structured_lines_carry_extra_fields(self):
        entry = json.loads(StructuredFormatter().format(_record(step=3, dt_s=8640.0)))
        self.assertEqual(entry['message'], 'Step completed')
        self.assertEqual(entry['step'], 3)
        self.assertEqual(entry['dt_s'], 8640.0)

    def test_progress_lines_are_key_value(self):
        line = KeyValueFormatter().format(_record(step=12, time_days=1.2, crack_width_mm=0.0123456789))
        self.assertEqual(line, 'step=12 time_days=1.2 crack_width_mm=0.0123457')
        self.assertEqual(KeyValueFormatter().format(_record()), 'message=Step completed')

    def test_logger_namespace(self):
        self.assertEqual(get_logger('sweep').name, 'rustcrack.sweep')
        self.assertEqual(get_logger('rustcrack.driver').name, 'rustcrack.driver')


class RunLogTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        close_file_handlers()
        self.temp_dir.cleanup()

    def test_errors_reach_both_log_files(self):
        setup_logging('WARNING', self.root / 'logs')
        ErrorHandler.log_error(SolverError('splu failed', diagnostics={'size': 10}), context={'step': 4})
        close_file_handlers()
        run_log = (self.root / 'logs' / 'run.log').read_text(encoding='utf-8').splitlines()
        errors = (self.root / 'logs' / 'errors.log').read_text(encoding='utf-8').splitlines()
        entry = json.loads(errors[-1])
        self.assertEqual(entry['level'], 'ERROR')
        self.assertEqual(entry['details']['error_class'], 'SolverError')
        self.assertEqual(entry['details']['context'], {'step': 4})
        self.assertTrue(any('splu failed' in line for line in run_log))

    def test_wrapped_command_returns_exit_codes(self):
        def failing(args):
            raise ConfigError('bad value', field='time.step_size')

        self.assertEqual(register_error_handlers(failing)(None), 2)
        self.assertEqual(register_error_handlers(lambda args: 0)(None), 0)
        self.assertEqual(ErrorHandler.exit_code(SolverError('x')), 3)
        self.assertEqual(ErrorHandler.exit_code(RuntimeError('x')), 1)


class OutputPathTests(unittest.TestCase):
    def tearDown(self):
        reset_cache()

    def test_environment_override(self):
        self.assertEqual(get_output_root({'RUSTCRACK_OUTPUT_ROOT': '/data/runs'}), '/data/runs')
        self.assertTrue(get_output_root({}).endswith('out'))

    def test_run_ids_and_directories(self):
        run_id = new_run_id('test 2 / desk')
        self.assertTrue(run_id.startswith('test-2-desk-'))
        self.assertEqual(run_directory(run_id, root='/tmp/out'), Path('/tmp/out') / run_id)


if __name__ == '__main__':
    unittest.main()
