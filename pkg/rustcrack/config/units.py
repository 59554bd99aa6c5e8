"""
Unit parsing for configuration values.

Quantities arrive either as plain numbers (already SI) or as strings of the
form ``"<number> <unit>"``. Conversion factors are held as decimal strings so
that ``10 uA/cm2`` lands on exactly the float nearest to 0.1.
"""
import re
from decimal import Decimal, InvalidOperation

# dimension -> {unit spelling: factor to SI}
UNIT_TABLE = {
    'length': {
        'm': '1', 'cm': '1e-2', 'mm': '1e-3', 'um': '1e-6',
    },
    'time': {
        's': '1', 'min': '60', 'h': '3600', 'day': '86400', 'days': '86400', 'd': '86400',
    },
    'pressure': {
        'Pa': '1', 'kPa': '1e3', 'MPa': '1e6', 'GPa': '1e9',
        'N/m2': '1', 'N/mm2': '1e6',
    },
    'current_density': {
        'A/m2': '1', 'mA/cm2': '10', 'uA/cm2': '1e-2', 'mA/m2': '1e-3',
    },
    'energy_per_area': {
        'N/m': '1', 'J/m2': '1', 'N/mm': '1e3',
    },
    'molar_mass': {
        'kg/mol': '1', 'g/mol': '1e-3',
    },
    'density': {
        'kg/m3': '1', 'g/cm3': '1e3',
    },
    'concentration': {
        'mol/m3': '1', 'mol/L': '1e3', 'mmol/L': '1',
    },
    'diffusivity': {
        'm2/s': '1', 'mm2/s': '1e-6', 'cm2/s': '1e-4',
    },
    'second_order_rate': {
        'm3/mol/s': '1', 'L/mol/s': '1e-3',
    },
    'first_order_rate': {
        '1/s': '1', '1/day': str(Decimal(1) / Decimal(86400)), '1/h': str(Decimal(1) / Decimal(3600)),
    },
    'charge_per_mole': {
        'C/mol': '1',
    },
    'dimensionless': {
        '': '1', '-': '1', '%': '1e-2',
    },
}

_QUANTITY = re.compile(r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$')


class UnitError(ValueError):
    """Raised when a quantity string cannot be interpreted."""


def parse_quantity(value, dimension):
    """Convert ``value`` to a float in SI units of ``dimension``.

    Numbers pass through unchanged. Strings must carry a unit that belongs
    to ``dimension``; a bare number string is taken as SI.
    """
    if isinstance(value, bool):
        raise UnitError(f'expected a {dimension} quantity, got a boolean')
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f'expected a {dimension} quantity, got {type(value).__name__}')

    match = _QUANTITY.match(value)
    if not match:
        raise UnitError(f'cannot parse quantity {value!r}')
    number, unit = match.group(1), match.group(2)
    units = UNIT_TABLE.get(dimension)
    if units is None:
        raise UnitError(f'unknown dimension {dimension!r}')
    if unit not in units:
        if unit == '':
            return float(Decimal(number))
        allowed = ', '.join(sorted(u for u in units if u))
        raise UnitError(f'unit {unit!r} is not a {dimension} unit (allowed: {allowed})')
    try:
        return float(Decimal(number) * Decimal(units[unit]))
    except InvalidOperation as exc:
        raise UnitError(f'cannot parse quantity {value!r}') from exc


def quantity_parser(dimension):
    """Return a one-argument converter for use as a pydantic ``BeforeValidator``."""
    def _convert(value):
        if value is None:
            return None
        return parse_quantity(value, dimension)
    _convert.__name__ = f'parse_{dimension}'
    return _convert
