import logging
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from src.errors import ConfigError, SpectralError
from src.harmonics import ModeFamily
from src.kelvin import LameParams
from src.records import ArtifactFormat
from src.transmission import ShellGeometry, validate_delta_grid

logger = logging.getLogger(__name__)


class Command(str, Enum):
    SPECTRUM = "spectrum"
    VALIDATE = "validate"
    CALR = "calr"
    FIELD = "field"

    @classmethod
    def from_str(cls, value: str) -> 'Command':
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(f"Unknown command: {value!r}")


SUITES = ('layers', 'np', 'lame', 'gram', 'energy', 'modes', 'calr', 'denominator')

DEFAULT_OUT = {
    Command.SPECTRUM: 'spectrum.csv',
    Command.VALIDATE: 'validation.jsonl',
    Command.CALR: 'calr.jsonl',
    Command.FIELD: 'field.csv',
}


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.split(',') if part.strip())


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ('', 'none', 'auto') else int(text)


def _families(text: str) -> Tuple[str, ...]:
    return tuple(ModeFamily.from_str(part).value for part in text.split(',') if part.strip())


def _suite(text: str) -> str:
    value = text.strip().lower()
    if value != 'all' and value not in SUITES:
        raise ValueError(f"suite must be one of {', '.join(SUITES)} or all")
    return value


def _format(text: str) -> str:
    return ArtifactFormat.from_str(text).value


def _axis(text: str) -> str:
    value = text.strip().lower()
    if value not in ('x', 'y', 'z'):
        raise ValueError("slice axis must be x, y or z")
    return value


# key -> (parser for config-file text, default)
KEYS: Dict[str, Tuple[Callable[[str], Any], Any]] = {
    'lambda': (float, 1.0),
    'mu': (float, 1.0),
    'ri': (float, 1.0),
    're': (float, 2.0),
    'rs': (float, 2.5),
    'amplitude': (float, 1.0),
    'profile': (str, 'monopole-line'),
    'spread_m': (_bool, False),
    'delta_grid': (_float_list, tuple(float(d) for d in np.logspace(-1, -6, 11))),
    'n_min': (int, 1),
    'n_max': (int, 10),
    'families': (_families, ('T', 'M', 'N')),
    'quad_theta': (int, 64),
    'quad_phi': (int, 128),
    'quad_radial': (int, 24),
    'suite': (_suite, 'all'),
    'out': (str, None),
    'format': (_format, None),
    'retune': (_bool, True),
    'n0': (_optional_int, None),
    'workers': (int, 1),
    'slice_axis': (_axis, 'z'),
    'slice_offset': (float, 0.0),
    'slice_extent': (float, 5.0),
    'slice_resolution': (int, 41),
    'delta': (float, 1e-5),
    'energy_quadrature': (_bool, False),
    'fault_injection': (_bool, False),
}


@dataclass(frozen=True)
class RunConfig:
    command: Command
    lame: LameParams
    geometry: ShellGeometry
    rs: float
    amplitude: float
    profile: str
    spread_m: bool
    delta_grid: Tuple[float, ...]
    n_min: int
    n_max: int
    families: Tuple[str, ...]
    quad_theta: int
    quad_phi: int
    quad_radial: int
    suite: str
    out: str
    format: str
    retune: bool
    n0: Optional[int]
    workers: int
    slice_axis: str
    slice_offset: float
    slice_extent: float
    slice_resolution: int
    delta: float
    energy_quadrature: bool
    fault_injection: bool
    source_file: Optional[str] = field(default=None, compare=False)

    def as_header(self) -> Dict[str, Any]:
        """Effective configuration as flat key/value pairs"""
        values = {k: v for k, v in asdict(self).items() if k not in ('lame', 'geometry', 'source_file')}
        values['command'] = self.command.value
        values['lambda'] = self.lame.lam.real
        values['mu'] = self.lame.mu.real
        values['ri'] = self.geometry.r_i
        values['re'] = self.geometry.r_e
        values['delta_grid'] = list(self.delta_grid)
        values['families'] = list(self.families)
        return values


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a flat `key = value` file (# comments) into typed values"""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = dotenv_values(path)
    except Exception as e:
        raise ConfigError(f"Cannot read config file {path}: {str(e)}")
    parsed = {}
    for key, text in raw.items():
        key = key.strip().lower().replace('-', '_')
        if key not in KEYS:
            logger.warning(f"Ignoring unknown config key {key!r} in {path}")
            continue
        if text is None:
            raise ConfigError(f"Config key {key!r} in {path} has no value")
        parser, _ = KEYS[key]
        try:
            parsed[key] = parser(text)
        except (ValueError, SpectralError) as e:
            raise ConfigError(f"Bad value for {key!r} in {path}: {text!r} ({str(e)})")
    return parsed


def load_run_config(command: str, overrides: Optional[Mapping[str, Any]] = None,
                    config_path: Optional[str] = None) -> RunConfig:
    """defaults < config file < command-line overrides (None means unset)"""
    command = command if isinstance(command, Command) else Command.from_str(command)
    values = {key: default for key, (_, default) in KEYS.items()}
    if config_path:
        values.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KEYS:
            raise ConfigError(f"Unknown option {key!r}")
        values[key] = value

    if values['out'] is None:
        values['out'] = DEFAULT_OUT[command]
    if values['format'] is None:
        values['format'] = 'csv' if values['out'].endswith('.csv') else 'jsonl'
    try:
        values['format'] = _format(values['format'])
    except ValueError as e:
        raise ConfigError(str(e))

    try:
        lame = LameParams(values.pop('lambda'), values.pop('mu'))
        geometry = ShellGeometry(values.pop('ri'), values.pop('re'))
        values['delta_grid'] = tuple(validate_delta_grid(values['delta_grid']))
    except SpectralError as e:
        raise ConfigError(str(e))

    _check(values['n_min'] >= 1, f"n_min must be >= 1, got {values['n_min']}")
    _check(values['quad_theta'] >= 1, "quad_theta must be >= 1")
    _check(values['quad_phi'] >= 2 * values['quad_theta'], "quad_phi must be at least 2 * quad_theta")
    _check(values['quad_radial'] >= 1, "quad_radial must be >= 1")
    _check(values['workers'] >= 1, "workers must be >= 1")
    _check(values['slice_resolution'] >= 1, "slice_resolution must be >= 1")
    _check(values['slice_extent'] > 0, "slice_extent must be positive")
    _check(0 < values['delta'] < 1, "delta must lie in (0, 1)")
    _check(values['rs'] > geometry.r_e or command not in (Command.CALR, Command.FIELD),
           f"source radius rs={values['rs']} must exceed re={geometry.r_e}")
    _check(values['n0'] is None or values['n0'] >= 2, "n0 must be >= 2")

    return RunConfig(command=command, lame=lame, geometry=geometry, source_file=config_path, **values)


def _check(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)
