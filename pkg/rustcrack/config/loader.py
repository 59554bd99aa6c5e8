"""
Loading, validating and writing simulation configuration files.
"""
import copy
import logging
from pathlib import Path

import yaml
from pydantic import ValidationError

from rustcrack.models.params import SimulationConfig
from rustcrack.utils.error_handler import ConfigError
from rustcrack.utils.file_operations import atomic_write_text, text_sha256

logger = logging.getLogger(__name__)


def _line_of(node, path):
    """1-based line of a dotted path inside a composed YAML node, if present."""
    line = None
    for part in path:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == str(part)), None)
            if match is None:
                key = next((k for k, _ in node.value if k.value == str(part)), None)
                return (key.start_mark.line + 1) if key is not None else line
            line = match.start_mark.line + 1
            node = match
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _config_error(exc: ValidationError, node=None) -> ConfigError:
    first = exc.errors()[0]
    loc = [part for part in first['loc'] if not (isinstance(part, str) and part.startswith('function-'))]
    field = '.'.join(str(part) for part in loc) or None
    if first['type'] == 'extra_forbidden':
        message = f'unknown key {field!r}'
    else:
        message = first['msg']
    line = _line_of(node, loc) if node is not None else None
    return ConfigError(message, field=field, line=line)


def config_from_mapping(data, node=None) -> SimulationConfig:
    """Validate a plain mapping into a SimulationConfig."""
    if not isinstance(data, dict):
        raise ConfigError('configuration root must be a mapping')
    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as exc:
        raise _config_error(exc, node) from exc


def load_config(path) -> SimulationConfig:
    """
    Read a YAML configuration file into a validated SimulationConfig.

    All quantities come back in SI base units.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f'configuration file not found: {path}')
    text = path.read_text(encoding='utf-8')
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, 'problem', None) or str(exc)
        raise ConfigError(f'cannot parse {path.name}: {problem}', line=line) from exc
    config = config_from_mapping(data or {}, node)
    logger.debug('Loaded configuration', extra={'path': str(path), 'config_name': config.name})
    return config


def config_to_mapping(config: SimulationConfig) -> dict:
    return config.model_dump(mode='json')


def dump_config(config: SimulationConfig) -> str:
    """Fully resolved SI configuration as YAML text."""
    return yaml.safe_dump(config_to_mapping(config), sort_keys=False, default_flow_style=False)


def write_config(config: SimulationConfig, path) -> Path:
    path = Path(path)
    atomic_write_text(path, dump_config(config))
    return path


def config_hash(config: SimulationConfig) -> str:
    return text_sha256(dump_config(config))


def _assign(mapping, dotted, value):
    parts = dotted.split('.')
    target = mapping
    for position, part in enumerate(parts[:-1]):
        if isinstance(target, list):
            target = target[int(part)]
            continue
        if part not in target or target[part] is None:
            raise ConfigError(f'unknown key {".".join(parts[:position + 1])!r}', field=dotted)
        target = target[part]
    last = parts[-1]
    if isinstance(target, list):
        target[int(last)] = value
    elif isinstance(target, dict):
        if last not in target:
            raise ConfigError(f'unknown key {dotted!r}', field=dotted)
        target[last] = value
    else:
        raise ConfigError(f'cannot assign into {dotted!r}', field=dotted)


def apply_overrides(config: SimulationConfig, overrides: dict) -> SimulationConfig:
    """
    Return a new config with dotted-key overrides applied and re-validated.

    Values may carry units (``{"transport.current_density": "5 uA/cm2"}``).
    """
    data = copy.deepcopy(config_to_mapping(config))
    for dotted, value in overrides.items():
        _assign(data, dotted, value)
    return config_from_mapping(data)


def parse_override(text: str):
    """Split a CLI ``key=value`` override; the value is read as YAML scalar."""
    if '=' not in text:
        raise ConfigError(f'override {text!r} must have the form key=value')
    key, raw = text.split('=', 1)
    key = key.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key, value
