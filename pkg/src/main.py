import argparse
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.config import Command, RunConfig, SUITES, load_run_config
from src.errors import ConfigError, SpectralError
from src.harmonics import ModeFamily
from src.potentials import np_spectrum
from src.records import ArtifactFormat, RecordWriter
from src.transmission import (MAX_DEGREE, PlasmonicConfig, choose_n0, classify_calr, field_eval,
                              solve_truncated, source_extender)
from src.validation import run_suites

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_BAD_INPUT = 2

SPECTRUM_COLUMNS = ('family', 'n', 'eigenvalue_re', 'eigenvalue_im', 'limit_value')
CALR_COLUMNS = ('delta', 'n0', 'energy', 'farfield_sample')
FIELD_COLUMNS = ('u', 'v', 'x', 'y', 'z', 'r', 'abs_scattered', 'abs_total')

# fraction of r_e kept clear around each interface in field slices
GUARD_BAND = 1e-3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config_path', help='flat key = value configuration file')
    common.add_argument('--lambda', dest='lambda', type=float, help='Lamé lambda of the matrix')
    common.add_argument('--mu', type=float, help='Lamé mu of the matrix')
    common.add_argument('--ri', type=float, help='core radius')
    common.add_argument('--re', type=float, help='shell outer radius')
    common.add_argument('--rs', type=float, help='source radius')
    common.add_argument('--amplitude', type=float)
    common.add_argument('--delta-grid', dest='delta_grid', help='comma list of decreasing losses')
    common.add_argument('--delta', type=float, help='loss used by the field command')
    common.add_argument('--n-min', dest='n_min', type=int)
    common.add_argument('--n-max', dest='n_max', type=int)
    common.add_argument('--families', help='comma list of T, M, N')
    common.add_argument('--quad-theta', dest='quad_theta', type=int)
    common.add_argument('--quad-phi', dest='quad_phi', type=int)
    common.add_argument('--quad-radial', dest='quad_radial', type=int)
    common.add_argument('--suite', help=f"one of {', '.join(SUITES)} or all")
    common.add_argument('--out', help='output path')
    common.add_argument('--format', choices=[f.value for f in ArtifactFormat])
    common.add_argument('--n0', type=int, help='resonant degree (default: chosen per delta)')
    common.add_argument('--fixed', action='store_true', help='keep (c, eps) fixed along the delta grid')
    common.add_argument('--spread-m', dest='spread_m', action='store_true')
    common.add_argument('--energy-quadrature', dest='energy_quadrature', action='store_true')
    common.add_argument('--workers', type=int)
    common.add_argument('--slice-axis', dest='slice_axis', choices=['x', 'y', 'z'])
    common.add_argument('--slice-offset', dest='slice_offset', type=float)
    common.add_argument('--slice-extent', dest='slice_extent', type=float)
    common.add_argument('--slice-resolution', dest='slice_resolution', type=int)
    common.add_argument('--fault-injection', dest='fault_injection', action='store_true',
                        help=argparse.SUPPRESS)
    common.add_argument('--verbose', action='store_true')

    parser = argparse.ArgumentParser(
        prog='elastic-np',
        description='Neumann-Poincaré spectra on spheres and CALR sweeps for a plasmonic core-shell')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser(Command.SPECTRUM.value, parents=[common], help='eigenvalue table')
    commands.add_parser(Command.VALIDATE.value, parents=[common], help='closed forms against the oracles')
    commands.add_parser(Command.CALR.value, parents=[common], help='energy sweep over the delta grid')
    commands.add_parser(Command.FIELD.value, parents=[common], help='|u_delta| on a plane slice')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict:
    """Command-line values as config overrides; flags left unset map to None"""
    values = vars(args)
    overrides = {key: values.get(key) for key in (
        'lambda', 'mu', 'ri', 're', 'rs', 'amplitude', 'delta', 'n_min', 'n_max', 'quad_theta',
        'quad_phi', 'quad_radial', 'suite', 'out', 'format', 'n0', 'workers', 'slice_axis',
        'slice_offset', 'slice_extent', 'slice_resolution')}
    try:
        if args.delta_grid is not None:
            overrides['delta_grid'] = tuple(float(d) for d in args.delta_grid.split(',') if d.strip())
        if args.families is not None:
            overrides['families'] = tuple(ModeFamily.from_str(f).value
                                          for f in args.families.split(',') if f.strip())
    except (ValueError, SpectralError) as e:
        raise ConfigError(f"Bad command-line value: {str(e)}")
    if args.suite is not None:
        overrides['suite'] = args.suite.strip().lower()
    for flag in ('spread_m', 'energy_quadrature', 'fault_injection'):
        overrides[flag] = True if values.get(flag) else None
    overrides['retune'] = False if args.fixed else None
    return overrides


def setup(args: argparse.Namespace) -> RunConfig:
    """Initialize logging and the effective run configuration"""
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.suite is not None and args.suite.strip().lower() not in SUITES + ('all',):
        raise ConfigError(f"suite must be one of {', '.join(SUITES)} or all, got {args.suite!r}")
    return load_run_config(args.command, overrides_from_args(args), args.config_path)


def cmd_spectrum(cfg: RunConfig) -> int:
    rows = np_spectrum(cfg.lame, cfg.n_max, cfg.families, n_min=cfg.n_min)
    logger.info(f"Spectrum: {len(rows)} eigenvalues for n in [{cfg.n_min}, {cfg.n_max}]")
    writer = RecordWriter(cfg.out, cfg.as_header())
    writer.add_records(row.as_row() for row in rows)
    if ArtifactFormat.from_str(cfg.format) is ArtifactFormat.CSV:
        writer.write_csv(SPECTRUM_COLUMNS)
    else:
        writer.write_jsonl()
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    records = run_suites(cfg)
    writer = RecordWriter(cfg.out, cfg.as_header())
    writer.add_records(record.to_record() for record in records)
    writer.write_jsonl()
    failed = sum(1 for record in records if not record.passed)
    if failed:
        logger.error(f"{failed} of {len(records)} checks exceeded their tolerance")
        return EXIT_VALIDATION_FAILED
    logger.info(f"All {len(records)} checks passed")
    return EXIT_OK


def _calr_paths(out: str):
    base, ext = os.path.splitext(out)
    if ext.lower() == '.csv':
        return base + '.jsonl', out
    return out, base + '.csv'


def cmd_calr(cfg: RunConfig) -> int:
    sweep = classify_calr(
        cfg.geometry, cfg.lame, cfg.rs, cfg.delta_grid,
        retune=cfg.retune, n0=cfg.n0, amplitude=cfg.amplitude, spread_m=cfg.spread_m,
        quadrature='auto' if cfg.energy_quadrature else None, workers=cfg.workers)

    jsonl_path, csv_path = _calr_paths(cfg.out)
    report = RecordWriter(jsonl_path, cfg.as_header())
    report.add_records(r.to_record() for r in sweep.reports)
    report.add_record({'summary': sweep.summary_record()})
    report.write_jsonl()

    mirror = RecordWriter(csv_path, cfg.as_header())
    mirror.add_records({'delta': r.delta, 'n0': r.n0, 'energy': r.energy, 'farfield_sample': r.farfield_sample}
                       for r in sweep.reports)
    mirror.write_csv(CALR_COLUMNS)
    logger.info(f"Verdict: {sweep.verdict.value}")
    return EXIT_OK


def slice_points(axis: str, offset: float, extent: float, resolution: int):
    """Grid coordinates (u, v) and the 3D points of an axis-aligned plane slice"""
    ticks = np.linspace(-extent, extent, resolution)
    u, v = np.meshgrid(ticks, ticks, indexing='ij')
    u, v = u.ravel(), v.ravel()
    columns = {'x': ('y', 'z'), 'y': ('z', 'x'), 'z': ('x', 'y')}[axis]
    points = np.zeros((u.size, 3))
    index = {'x': 0, 'y': 1, 'z': 2}
    points[:, index[axis]] = offset
    points[:, index[columns[0]]] = u
    points[:, index[columns[1]]] = v
    return u, v, points


def guard_mask(points: np.ndarray, interfaces: Sequence[float], width: float) -> np.ndarray:
    r = np.linalg.norm(points, axis=-1)
    keep = np.ones(r.shape, dtype=bool)
    for radius in interfaces:
        keep &= np.abs(r - radius) >= width
    return keep


def cmd_field(cfg: RunConfig) -> int:
    geom = cfg.geometry
    n0 = cfg.n0 if cfg.n0 is not None else choose_n0(cfg.delta, geom)
    plasmonic = PlasmonicConfig.resonant(n0, cfg.delta)
    extend = source_extender(cfg.rs, geom, cfg.lame, profile=cfg.profile, amplitude=cfg.amplitude,
                             spread_m=cfg.spread_m)
    sol, src, _ = solve_truncated(extend(MAX_DEGREE), geom, plasmonic, cfg.lame, extend)

    u, v, points = slice_points(cfg.slice_axis, cfg.slice_offset, cfg.slice_extent, cfg.slice_resolution)
    keep = guard_mask(points, (geom.r_i, geom.r_e, cfg.rs), GUARD_BAND * geom.r_e)
    u, v, points = u[keep], v[keep], points[keep]
    logger.info(f"Field slice {cfg.slice_axis}={cfg.slice_offset}: {len(points)} points, n0={n0}, "
                f"delta={cfg.delta:.3e}")

    rows: List[Dict] = []
    if len(points):
        scattered = np.linalg.norm(field_eval(sol, src, geom, cfg.lame, points), axis=-1)
        total = np.linalg.norm(field_eval(sol, src, geom, cfg.lame, points, include_source=True), axis=-1)
        r = np.linalg.norm(points, axis=-1)
        for i in range(len(points)):
            rows.append({'u': u[i], 'v': v[i], 'x': points[i, 0], 'y': points[i, 1], 'z': points[i, 2],
                         'r': r[i], 'abs_scattered': scattered[i], 'abs_total': total[i]})

    writer = RecordWriter(cfg.out, cfg.as_header())
    writer.add_records(rows)
    if ArtifactFormat.from_str(cfg.format) is ArtifactFormat.CSV:
        writer.write_csv(FIELD_COLUMNS)
    else:
        writer.write_jsonl()
    return EXIT_OK


COMMANDS = {
    Command.SPECTRUM: cmd_spectrum,
    Command.VALIDATE: cmd_validate,
    Command.CALR: cmd_calr,
    Command.FIELD: cmd_field,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    try:
        cfg = setup(args)
        logger.info(f"Running {cfg.command.value} -> {cfg.out}")
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, SpectralError) as e:
        logger.error(f"Invalid input: {str(e)}")
        return EXIT_BAD_INPUT
    except OSError as e:
        logger.error(f"I/O error: {str(e)}")
        return EXIT_BAD_INPUT
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
