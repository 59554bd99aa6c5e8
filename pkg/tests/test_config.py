import tempfile
import unittest
from pathlib import Path

from rustcrack.config.loader import (
    apply_overrides,
    config_from_mapping,
    config_hash,
    dump_config,
    load_config,
    parse_override,
    write_config,
)
from rustcrack.config.moduli import (
    concrete_from_tensile_strength,
    cylinder_from_tensile_strength,
    derive_lame_and_moduli,
    eurocode_tensile_strength,
)
from rustcrack.config.units import UnitError, parse_quantity
from rustcrack.models.params import ModelVariant, PhaseFieldParams
from rustcrack.utils.error_handler import ConfigError, SingularityError

BASE = """\
name: unit
geometry:
  width: 100 mm
  height: 100 mm
  rebars:
    - {x: 50 mm, y: 72 mm, diameter: 16 mm}
"""


def _mapping(**extra):
    data = {
        'name': 'unit',
        'geometry': {
            'width': 0.1,
            'height': 0.1,
            'rebars': [{'x': 0.05, 'y': 0.072, 'diameter': 0.016}],
        },
    }
    data.update(extra)
    return data


class UnitParsingTests(unittest.TestCase):
    def test_current_density_lands_on_exact_si_value(self):
        self.assertEqual(parse_quantity('10 uA/cm2', 'current_density'), 0.1)
        self.assertEqual(parse_quantity('5 uA/cm2', 'current_density'), 0.05)

    def test_plain_numbers_are_taken_as_si(self):
        self.assertEqual(parse_quantity(0.016, 'length'), 0.016)
        self.assertEqual(parse_quantity('0.016', 'length'), 0.016)

    def test_days_and_millimetres(self):
        self.assertEqual(parse_quantity('60 days', 'time'), 60 * 86400.0)
        self.assertAlmostEqual(parse_quantity('0.2 mm', 'length'), 2.0e-4, places=15)

    def test_wrong_dimension_is_rejected(self):
        with self.assertRaises(UnitError):
            parse_quantity('10 MPa', 'length')
        with self.assertRaises(UnitError):
            parse_quantity(True, 'length')


class ModuliTests(unittest.TestCase):
    def test_elongation_modulus_of_147_day_concrete(self):
        moduli = derive_lame_and_moduli(36.0e9, 0.2)
        self.assertAlmostEqual(moduli.lame_lambda / 1e9, 10.0, places=9)
        self.assertAlmostEqual(moduli.shear_modulus / 1e9, 15.0, places=9)
        self.assertAlmostEqual(moduli.bulk_modulus / 1e9, 20.0, places=9)
        self.assertAlmostEqual(moduli.elongation_modulus / 1e9, 40.0, places=9)

    def test_incompressible_limit_is_a_singularity(self):
        with self.assertRaises(SingularityError):
            derive_lame_and_moduli(36.0e9, 0.5)
        with self.assertRaises(ValueError):
            derive_lame_and_moduli(-1.0, 0.2)

    def test_tensile_strength_inversion_round_trips(self):
        for fct in (2.2e6, 3.0e6, 3.9e6, 4.5e6):
            fc = cylinder_from_tensile_strength(fct)
            self.assertAlmostEqual(eurocode_tensile_strength(fc) / fct, 1.0, places=10)

    def test_joint_concrete_properties_increase_with_strength(self):
        weak = concrete_from_tensile_strength(2.5e6)
        strong = concrete_from_tensile_strength(4.0e6)
        self.assertLess(weak['young_modulus'], strong['young_modulus'])
        self.assertLess(weak['fracture_energy'], strong['fracture_energy'])
        self.assertEqual(strong['tensile_strength'], 4.0e6)


class ConfigLoaderTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _write(self, text):
        path = self.root / 'config.yaml'
        path.write_text(text, encoding='utf-8')
        return path

    def test_defaults_and_unit_conversion(self):
        config = load_config(self._write(BASE))
        self.assertAlmostEqual(config.geometry.rebars[0].radius, 0.008, places=12)
        self.assertEqual(config.transport.bulk_porosity, 0.26)
        self.assertEqual(config.transport.sci_porosity, 0.52)
        self.assertEqual(config.concrete.young_modulus, 36.0e9)
        self.assertEqual(config.phase_field.model_variant, ModelVariant.PFCZM)
        self.assertAlmostEqual(config.geometry.cover(), 0.020, places=12)

    def test_concrete_preset_by_name(self):
        config = load_config(self._write(BASE + 'concrete: cured_28d\n'))
        self.assertEqual(config.concrete.young_modulus, 33.0e9)
        self.assertEqual(config.concrete.tensile_strength, 2.2e6)

    def test_unknown_key_reports_field_and_line(self):
        path = self._write(BASE + 'transport:\n  bogus: 3\n')
        with self.assertRaises(ConfigError) as ctx:
            load_config(path)
        self.assertEqual(ctx.exception.field, 'transport.bogus')
        self.assertEqual(ctx.exception.line, 8)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(self.root / 'absent.yaml')

    def test_rebar_outside_section_is_rejected(self):
        data = _mapping()
        data['geometry']['rebars'][0]['y'] = 0.095
        with self.assertRaises(ConfigError):
            config_from_mapping(data)

    def test_constraints_must_prevent_rigid_motion(self):
        data = _mapping()
        data['geometry']['constraints'] = [{'where': 'bottom_left', 'components': 'x'}]
        with self.assertRaises(ConfigError):
            config_from_mapping(data)

    def test_dump_reload_and_hash(self):
        config = config_from_mapping(_mapping())
        path = write_config(config, self.root / 'resolved.yaml')
        again = load_config(path)
        self.assertEqual(dump_config(again), dump_config(config))
        self.assertEqual(config_hash(again), config_hash(config))

    def test_overrides_accept_units_and_revalidate(self):
        config = config_from_mapping(_mapping())
        changed = apply_overrides(config, {'transport.current_density': '5 uA/cm2'})
        self.assertEqual(changed.transport.current_density, 0.05)
        self.assertEqual(config.transport.current_density, 0.1)
        with self.assertRaises(ConfigError):
            apply_overrides(config, {'transport.nonexistent': 1})
        with self.assertRaises(ConfigError):
            apply_overrides(config, {'transport.bulk_porosity': 1.5})

    def test_parse_override(self):
        self.assertEqual(parse_override('time.step_size=0.5'), ('time.step_size', 0.5))
        self.assertEqual(parse_override('transport.current_density=5 uA/cm2'),
                         ('transport.current_density', '5 uA/cm2'))
        with self.assertRaises(ConfigError):
            parse_override('no-equals-sign')

    def test_variant_aliases(self):
        section = PhaseFieldParams.model_validate({'model_variant': 'stress'})
        self.assertEqual(section.model_variant, ModelVariant.STRESS_BASED)

    def test_coupled_run_accepts_only_pfczm(self):
        with self.assertRaises(ConfigError) as ctx:
            config_from_mapping(_mapping(phase_field={'model_variant': 'at2'}))
        self.assertEqual(ctx.exception.field, 'phase_field')
        path = self._write(BASE + 'phase_field:\n  model_variant: stress\n')
        with self.assertRaises(ConfigError) as ctx:
            load_config(path)
        self.assertEqual(ctx.exception.line, 8)

    def test_shipped_scenarios_load(self):
        configs = Path(__file__).resolve().parent.parent / 'configs'
        for name in ('test1', 'test2', 'test3', 'test2_desk', 'spalling_2rebar', 'delamination_3rebar',
                     'delamination_4rebar', 'two_layer_5rebar', 'crack_offset'):
            with self.subTest(name=name):
                config = load_config(configs / f'{name}.yaml')
                self.assertEqual(config.name, name)
                self.assertTrue(config.geometry.rebars)


if __name__ == '__main__':
    unittest.main()
