import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from src.errors import AccuracyWarning, DomainError
from src.harmonics import ModeFamily, ModeIndex
from src.kelvin import LameParams
from src.oracle import QuadratureRule
from src.transmission import (MAX_DEGREE, DensitySolution, PlasmonicConfig, ShellGeometry, SourceSpectrum,
                              Verdict, a_delta, choose_n0, classify_calr, denominator_band, energy,
                              energy_estimate, field_eval, g_i_from_g_e, modal_energies, mode_denominator,
                              nonresonant_bound, plasmonic_params, resonant_deltas, solve, solve_mode,
                              solve_mode_fixed, solve_mode_linear, solve_truncated, source_extender,
                              source_root_test, synth_source, truncation_degree, validate_delta_grid)


def test_geometry():
    geom = ShellGeometry(1.0, 2.0)
    assert geom.ratio == 0.5
    assert geom.critical_radius == pytest.approx(2.8284271247461903)
    assert geom.cloak_radius == 4.0
    assert ShellGeometry(1.0, 1.0).is_degenerate
    with pytest.raises(DomainError):
        ShellGeometry(2.0, 1.0)
    with pytest.raises(DomainError):
        ShellGeometry(1.0, 1.0).require_shell()


def test_plasmonic_params():
    assert plasmonic_params(2) == (16.0, -4.0)
    assert plasmonic_params(3) == pytest.approx((6.25, -2.5))
    with pytest.raises(DomainError):
        plasmonic_params(1)


@pytest.mark.parametrize("kwargs", [
    dict(n0=1, c_n=1.0, eps_n=-1.0, delta=0.1),
    dict(n0=None, c_n=0.0, eps_n=-1.0, delta=0.1),
    dict(n0=None, c_n=1.0, eps_n=0.5, delta=0.1),
    dict(n0=None, c_n=1.0, eps_n=-1.0, delta=-0.1),
])
def test_plasmonic_config_validation(kwargs):
    with pytest.raises(DomainError):
        PlasmonicConfig(**kwargs)


def test_materials(unit_lame):
    cfg = PlasmonicConfig.resonant(2, 0.01)
    assert cfg.shell_material(unit_lame).mu == complex(-4.0, 0.01)
    assert cfg.core_material(unit_lame).lam == 16.0
    assert cfg.with_delta(0.5).delta == 0.5


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=50))
def test_resonant_identity(n0):
    a = a_delta(PlasmonicConfig.resonant(n0, 0.0))
    xi = 3 / (4 * n0 + 2)
    assert abs(a.a1 - xi) <= 1e-12 * xi
    assert abs(a.a2 - xi) <= 1e-12 * xi


def test_worked_mode_solve(unit_lame, shell):
    cfg = PlasmonicConfig.resonant(2, 0.0)
    assert mode_denominator(2, shell, cfg, unit_lame) == pytest.approx(0.005, rel=1e-12)
    assert_allclose(solve_mode(2, 0, 1.0, shell, cfg, unit_lame), (-20.0, 5.0), rtol=1e-12)
    assert_allclose(solve_mode_linear(2, 1.0, shell, cfg, unit_lame), (-20.0, 5.0), rtol=1e-12)
    assert mode_denominator(3, shell, cfg, unit_lame) == pytest.approx(0.0089413265306, rel=1e-9)
    assert g_i_from_g_e(3, 2.0, shell) == 0.5


def test_mode_solve_fixed_parameters(unit_lame, shell):
    c, eps = plasmonic_params(3)
    fixed = solve_mode_fixed(4, 1, 0.3j, shell, c, eps, 1e-3, unit_lame)
    retuned = solve_mode(4, 1, 0.3j, shell, PlasmonicConfig.resonant(3, 1e-3), unit_lame)
    assert_allclose(fixed, retuned, rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 30), n0=st.integers(2, 20), r_i=st.floats(0.2, 0.9),
       log_delta=st.floats(-3.0, math.log10(0.5)), lam=st.floats(0.5, 3.0), mu=st.floats(0.5, 2.0),
       g_re=st.floats(-2, 2), g_im=st.floats(-2, 2))
def test_mode_solve_matches_direct_solve(n, n0, r_i, log_delta, lam, mu, g_re, g_im):
    if abs(complex(g_re, g_im)) < 1e-3:
        return
    geom = ShellGeometry(r_i, 1.0)
    lame = LameParams(lam, mu)
    cfg = PlasmonicConfig.resonant(n0, 10 ** log_delta)
    g = complex(g_re, g_im)
    direct = np.array(solve_mode_linear(n, g, geom, cfg, lame))
    closed = np.array(solve_mode(n, 0, g, geom, cfg, lame))
    assert np.linalg.norm(closed - direct) <= 1e-10 * np.linalg.norm(direct)


def test_mode_solve_rejects_bad_input(unit_lame, shell):
    cfg = PlasmonicConfig.resonant(2, 0.1)
    with pytest.raises(DomainError):
        solve_mode(1, 0, 1.0, shell, cfg, unit_lame)
    with pytest.raises(DomainError):
        solve_mode(2, 3, 1.0, shell, cfg, unit_lame)
    with pytest.raises(DomainError):
        solve_mode(2, 0, 1.0, ShellGeometry(1.0, 1.0), cfg, unit_lame)
    with pytest.raises(DomainError):
        SourceSpectrum({(1, 0): 1.0})


def test_solve_builds_T_densities(unit_lame, shell):
    src = SourceSpectrum({(2, 0): 1.0, (3, -1): 0.5})
    sol = solve(src, shell, PlasmonicConfig.resonant(2, 0.0), unit_lame)
    assert sol.degrees() == [2, 3]
    assert sol.phi_i[ModeIndex(ModeFamily.T, 2, 0)] == pytest.approx(-20.0)
    assert sol.restricted(2).degrees() == [2]
    assert solve(SourceSpectrum(), shell, PlasmonicConfig.resonant(2, 0.1), unit_lame).modes() == []


def test_field_is_continuous_across_interfaces(unit_lame, shell):
    src = SourceSpectrum({(2, 0): 1.0, (3, 1): 0.5j})
    sol = solve(src, shell, PlasmonicConfig.resonant(3, 0.05), unit_lame)
    direction = np.array([0.36, 0.48, 0.8])
    for radius in (shell.r_i, shell.r_e):
        below = field_eval(sol, src, shell, unit_lame, radius * (1 - 1e-10) * direction)
        above = field_eval(sol, src, shell, unit_lame, radius * (1 + 1e-10) * direction)
        assert_allclose(below, above, rtol=1e-7, atol=1e-12)


def test_far_field_decays_like_cube(unit_lame, shell):
    src = SourceSpectrum({(2, 0): 1.0})
    sol = solve(src, shell, PlasmonicConfig.resonant(2, 0.01), unit_lame)
    x = np.array([3.0, 1.0, 2.0])
    near = field_eval(sol, src, shell, unit_lame, x)
    far = field_eval(sol, src, shell, unit_lame, 2 * x)
    assert_allclose(far, near / 8, rtol=1e-12)
    assert field_eval(sol, src, shell, unit_lame, np.zeros(3)) == pytest.approx(np.zeros(3))


def test_modal_energy_matches_shell_quadrature(unit_lame, shell):
    src = SourceSpectrum({(2, 0): 1.0, (3, 1): 0.5})
    cfg = PlasmonicConfig.resonant(2, 0.1)
    sol = solve(src, shell, cfg, unit_lame)
    report = energy(sol, src, shell, cfg, unit_lame, quadrature=QuadratureRule(10, 24))
    assert report.energy_modal > 0
    assert report.quadrature_ratio == pytest.approx(1.0, rel=1e-6)
    assert report.dominant_n == 2
    assert report.n_max == 3
    per_degree = modal_energies(sol, src, shell, cfg.delta, unit_lame)
    assert math.fsum(per_degree.values()) == pytest.approx(report.energy)


def test_energy_report_record(unit_lame, shell):
    src = SourceSpectrum({(2, 0): 1.0})
    cfg = PlasmonicConfig.resonant(2, 0.1)
    report = energy(solve(src, shell, cfg, unit_lame), src, shell, cfg, unit_lame, quadrature=None)
    record = report.to_record()
    assert record['energy_quadrature'] is None and record['verdict'] is None
    for key in ('delta', 'n0', 'c_n', 'eps_n', 'energy_modal', 'farfield_sample'):
        assert key in record
    assert report.energy_estimate == pytest.approx(energy_estimate(2, [1.0], 0.1, 0.5))


def test_estimates():
    assert energy_estimate(2, [1.0], 0.1, 0.5) == pytest.approx(0.1 / (2 * (0.01 + 0.0625)))
    src = SourceSpectrum({(2, 0): 1.0, (3, 0): 1.0})
    assert nonresonant_bound(src, 3, 0.5) == pytest.approx(0.5 * (4 + 16 * 0.5 ** 4))


@pytest.mark.parametrize("delta, expected", [(0.1, 4), (0.9, 2), (1e-6, 20), (0.125, 4)])
def test_choose_n0(delta, expected, shell):
    assert choose_n0(delta, shell) == expected


def test_choose_n0_rejects_delta(shell):
    with pytest.raises(DomainError):
        choose_n0(1.5, shell)


def test_delta_grids(shell):
    assert resonant_deltas(shell, [2, 3]) == pytest.approx([0.5 ** 2.5, 0.5 ** 3.5])
    assert validate_delta_grid([0.1, 0.01]) == [0.1, 0.01]
    for bad in ([], [0.1, 0.1], [0.01, 0.1], [1.0, 0.5]):
        with pytest.raises(DomainError):
            validate_delta_grid(bad)


def test_synth_source(unit_lame, shell):
    src = synth_source(2.5, shell, unit_lame)
    assert src.coeffs[(2, 0)] == pytest.approx(0.8 ** 2 / 2)
    assert max(src.degrees()) == 200
    spread = synth_source(2.5, shell, unit_lame, spread_m=True, n_max=4)
    assert len(spread.of_degree(3)) == 7
    assert synth_source(2.5, shell, unit_lame, amplitude=0.0).is_empty
    with pytest.raises(DomainError):
        synth_source(2.0, shell, unit_lame)
    with pytest.raises(DomainError):
        synth_source(2.5, shell, unit_lame, profile='dipole')


@pytest.mark.parametrize("r_s, resonant", [(2.5, True), (3.5, False)])
def test_source_root_test(r_s, resonant, unit_lame, shell):
    assert source_root_test(synth_source(r_s, shell, unit_lame), shell).predicts_resonance is resonant


def test_denominator_band(unit_lame):
    band = denominator_band((0.3, 0.5, 0.7), list(np.logspace(-1, -8, 29)), unit_lame)
    assert band.lower > 0
    assert band.spread < 100
    assert band.constant >= 1


def test_truncation_degree():
    per_degree = {n: 2.0 ** -n for n in range(2, 120)}
    n = truncation_degree(per_degree, 4)
    assert n >= 40
    assert per_degree[n] < 1e-14 * sum(per_degree.values())
    assert truncation_degree({2: 1.0, 3: 1.0}, 2) == 3


def test_solve_truncated_audits_tail(unit_lame, shell):
    src = synth_source(2.5, shell, unit_lame)
    sol, kept, change = solve_truncated(src, shell, PlasmonicConfig.resonant(4, 0.1), unit_lame)
    assert 40 <= max(sol.degrees()) < 200
    assert kept.degrees() == sol.degrees()
    assert change < 1e-12


def test_truncation_audit_past_degree_cap(unit_lame, shell):
    # a source just outside r_e has not converged by the degree cap
    extend = source_extender(2.05, shell, unit_lame)
    src = extend(MAX_DEGREE)
    cfg = PlasmonicConfig.resonant(4, 0.1)
    with pytest.warns(AccuracyWarning):
        _, kept, change = solve_truncated(src, shell, cfg, unit_lame, extend)
    per_degree = modal_energies(solve(src, shell, cfg, unit_lame), src, shell, 0.1, unit_lame)
    assert max(kept.degrees()) == MAX_DEGREE
    assert change == pytest.approx(per_degree[MAX_DEGREE] / math.fsum(per_degree.values()), rel=1e-12)
    assert change > 1e-5


def test_truncation_audit_extends_short_source(unit_lame, shell):
    extend = source_extender(2.3, shell, unit_lame)
    cfg = PlasmonicConfig.resonant(4, 0.1)
    short = extend(60)
    with warnings.catch_warnings():
        warnings.simplefilter('error', AccuracyWarning)
        _, kept, change = solve_truncated(short, shell, cfg, unit_lame, extend)
    n_trunc = max(kept.degrees())
    full = extend(MAX_DEGREE)
    per_degree = modal_energies(solve(full, shell, cfg, unit_lame), full, shell, 0.1, unit_lame)
    tail = math.fsum(e for n, e in per_degree.items() if n_trunc < n <= 2 * n_trunc)
    total = math.fsum(e for n, e in per_degree.items() if n <= 2 * n_trunc)
    assert change > 0
    assert change == pytest.approx(tail / total, rel=1e-6)
    # a source without an extender is taken as complete
    assert solve_truncated(short, shell, cfg, unit_lame)[2] == 0.0


@pytest.mark.slow
def test_calr_resonant_inside_critical_radius(unit_lame, shell):
    sweep = classify_calr(shell, unit_lame, 2.5, np.logspace(-1, -6, 11))
    assert sweep.verdict is Verdict.RESONANT
    assert sweep.energy_ratio > 1e3
    assert sweep.farfield_ratio < 10
    assert all(report.verdict is Verdict.RESONANT for report in sweep.reports)
    assert sweep.summary_record()['points'] == 11


@pytest.mark.slow
def test_calr_monotone_along_resonant_deltas(unit_lame, shell):
    assert classify_calr(shell, unit_lame, 2.5, resonant_deltas(shell)).monotone


@pytest.mark.slow
def test_calr_bounded_outside_critical_radius(unit_lame, shell):
    sweep = classify_calr(shell, unit_lame, 3.5, np.logspace(-1, -6, 11))
    assert sweep.verdict is Verdict.BOUNDED
    assert sweep.energy_growth < 10
    assert sweep.farfield_ratio < 10


def test_calr_grid_policy(unit_lame, shell):
    single = classify_calr(shell, unit_lame, 2.5, [1e-2])
    assert single.verdict is Verdict.INSUFFICIENT_GRID
    assert len(single.reports) == 1
    boundary = classify_calr(shell, unit_lame, shell.critical_radius, [1e-1, 1e-6])
    assert boundary.verdict is Verdict.BOUNDARY


@pytest.mark.slow
def test_calr_workers_are_deterministic(unit_lame, shell):
    grid = [1e-1, 1e-3, 1e-5]
    serial = classify_calr(shell, unit_lame, 2.5, grid)
    pooled = classify_calr(shell, unit_lame, 2.5, grid, workers=2)
    assert [r.energy_modal for r in pooled.reports] == [r.energy_modal for r in serial.reports]


def test_verdict_from_str():
    assert Verdict.from_str('insufficient-grid') is Verdict.INSUFFICIENT_GRID
    with pytest.raises(DomainError):
        Verdict.from_str('maybe')


def test_empty_density_solution():
    assert DensitySolution.empty().degrees() == []
