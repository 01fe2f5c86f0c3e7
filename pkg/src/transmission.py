"""Core-shell-matrix transmission problem with a plasmonic shell.

The core B_{r_i} has Lamé constants c*(lambda, mu), the shell
B_{r_e} minus B_{r_i} has (eps + i*delta)*(lambda, mu) and the matrix outside
keeps (lambda, mu). A source outside B_{r_e} with T-mode tractions g_e is
answered by single-layer densities phi_i, phi_e on the two interfaces, solved
degree by degree from a 2x2 system.
"""
import logging
import math
import multiprocessing
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import AccuracyWarning, DomainError, ExactResonanceError, SingularParameterError, warn
from src.harmonics import (CoefficientSpectrum, ModeFamily, ModeIndex, PointLike, positions,
                           trace_mode, unit_vectors)
from src.kelvin import LameParams
from src.oracle import QuadratureRule, quad_energy_shell
from src.potentials import np_eigenvalue, sl_T_coefficient

logger = logging.getLogger(__name__)

RESONANT_RATIO = 1e3
BOUNDED_GROWTH = 10.0
MIN_GRID_DECADES = 4.0
TRUNCATION_FLOOR = 1e-14
MAX_DEGREE = 200
QUAD_AUTO_MAX_DEGREE = 8
QUAD_SIGNIFICANT = 1e-10
FARFIELD_FACTOR = 1.05
# colatitudes off the poles and the equator, where T_n^0 can vanish
FARFIELD_DIRECTIONS = np.array([
    [np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)]
    for t, p in ((0.35, 0.2), (0.8, 1.3), (1.2, 2.9), (2.5, 4.4))
])


class Verdict(str, Enum):
    RESONANT = "resonant"
    BOUNDED = "bounded"
    BOUNDARY = "boundary"
    INSUFFICIENT_GRID = "insufficient-grid"

    @classmethod
    def from_str(cls, value: str) -> 'Verdict':
        try:
            return cls(value)
        except ValueError:
            raise DomainError(f"Unknown verdict: {value!r}")


@dataclass(frozen=True)
class ShellGeometry:
    r_i: float
    r_e: float

    def __post_init__(self):
        if not 0 < self.r_i <= self.r_e:
            raise DomainError(f"Shell needs 0 < r_i <= r_e, got r_i={self.r_i}, r_e={self.r_e}")

    @property
    def is_degenerate(self) -> bool:
        return self.r_i == self.r_e

    @property
    def ratio(self) -> float:
        return self.r_i / self.r_e

    @property
    def critical_radius(self) -> float:
        return math.sqrt(self.r_e ** 3 / self.r_i)

    @property
    def cloak_radius(self) -> float:
        """r_e^2 / r_i, beyond which the resonant field stays bounded"""
        return self.r_e ** 2 / self.r_i

    def require_shell(self):
        if self.is_degenerate:
            raise DomainError("Degenerate shell (r_i == r_e) has no transmission problem")


@dataclass(frozen=True)
class PlasmonicConfig:
    n0: Optional[int]
    c_n: float
    eps_n: float
    delta: float

    def __post_init__(self):
        if self.n0 is not None and self.n0 < 2:
            raise DomainError(f"Resonant degree must be >= 2, got {self.n0}")
        if not self.c_n > 0:
            raise DomainError(f"Core scaling c_n must be positive, got {self.c_n}")
        if not self.eps_n < 0:
            raise DomainError(f"Shell real part eps_n must be negative, got {self.eps_n}")
        if self.delta < 0:
            raise DomainError(f"Loss delta must be >= 0, got {self.delta}")

    @classmethod
    def resonant(cls, n0: int, delta: float) -> 'PlasmonicConfig':
        c_n, eps_n = plasmonic_params(n0)
        return cls(n0, c_n, eps_n, delta)

    @classmethod
    def fixed(cls, c_n: float, eps_n: float, delta: float) -> 'PlasmonicConfig':
        return cls(None, c_n, eps_n, delta)

    def with_delta(self, delta: float) -> 'PlasmonicConfig':
        return replace(self, delta=delta)

    def shell_material(self, lame: LameParams) -> LameParams:
        return lame.plasmonic(self.eps_n + 1j * self.delta)

    def core_material(self, lame: LameParams) -> LameParams:
        return lame.plasmonic(self.c_n)


@dataclass(frozen=True)
class ADeltaPair:
    a1: complex
    a2: complex


@dataclass
class SourceSpectrum:
    """T-mode traction coefficients g_e of the source potential on the outer interface"""
    coeffs: Dict[Tuple[int, int], complex] = field(default_factory=dict)
    source_radius: Optional[float] = None

    def __post_init__(self):
        for (n, m) in self.coeffs:
            if n < 2:
                raise DomainError(f"Source degree {n} < 2: degree-1 T modes carry no traction")
            if abs(m) > n:
                raise DomainError(f"Source order {m} exceeds degree {n}")
        self.coeffs = {key: complex(value) for key, value in sorted(self.coeffs.items())}

    def __len__(self):
        return len(self.coeffs)

    def items(self) -> List[Tuple[Tuple[int, int], complex]]:
        return list(self.coeffs.items())

    def degrees(self) -> List[int]:
        return sorted({n for n, _ in self.coeffs})

    def of_degree(self, n: int) -> List[Tuple[int, complex]]:
        return [(m, g) for (k, m), g in self.coeffs.items() if k == n]

    @property
    def is_empty(self) -> bool:
        return not self.coeffs

    def truncated(self, n_max: int) -> 'SourceSpectrum':
        return SourceSpectrum({k: g for k, g in self.coeffs.items() if k[0] <= n_max}, self.source_radius)


@dataclass
class DensitySolution:
    phi_i: CoefficientSpectrum
    phi_e: CoefficientSpectrum

    @classmethod
    def empty(cls) -> 'DensitySolution':
        return cls(CoefficientSpectrum(), CoefficientSpectrum())

    def modes(self) -> List[ModeIndex]:
        return sorted(set(idx for idx, _ in self.phi_i.items()) | set(idx for idx, _ in self.phi_e.items()))

    def degrees(self) -> List[int]:
        return sorted({idx.n for idx in self.modes()})

    def restricted(self, n_max: int) -> 'DensitySolution':
        keep = lambda spec: CoefficientSpectrum({i: c for i, c in spec.items() if i.n <= n_max})
        return DensitySolution(keep(self.phi_i), keep(self.phi_e))


@dataclass(frozen=True)
class EnergyReport:
    delta: float
    n0: Optional[int]
    c_n: float
    eps_n: float
    energy_modal: float
    energy_quadrature: Optional[float]
    energy_estimate: float
    dominant_n: Optional[int]
    farfield_sample: float
    nonresonant_bound: Optional[float] = None
    verdict: Optional[Verdict] = None
    n_max: Optional[int] = None
    truncation_change: Optional[float] = None

    @property
    def energy(self) -> float:
        return self.energy_modal

    @property
    def quadrature_ratio(self) -> Optional[float]:
        if self.energy_quadrature is None or self.energy_modal == 0:
            return None
        return self.energy_quadrature / self.energy_modal

    def to_record(self) -> dict:
        return {
            'delta': self.delta,
            'n0': self.n0,
            'c_n': self.c_n,
            'eps_n': self.eps_n,
            'energy_modal': self.energy_modal,
            'energy_quadrature': self.energy_quadrature,
            'energy_estimate': self.energy_estimate,
            'quadrature_ratio': self.quadrature_ratio,
            'dominant_n': self.dominant_n,
            'farfield_sample': self.farfield_sample,
            'nonresonant_bound': self.nonresonant_bound,
            'verdict': self.verdict.value if self.verdict else None,
            'n_max': self.n_max,
            'truncation_change': self.truncation_change,
        }


def plasmonic_params(n0: int) -> Tuple[float, float]:
    """(c, eps) that make a_{1,0} = a_{2,0} = 3/(4 n0 + 2)"""
    if n0 < 2:
        raise DomainError(f"Resonant degree must be >= 2, got {n0}")
    return (n0 + 2) ** 2 / (n0 - 1) ** 2, -1 - 3 / (n0 - 1)


def a_delta(cfg: PlasmonicConfig) -> ADeltaPair:
    shell = cfg.eps_n + 1j * cfg.delta
    den1 = cfg.c_n - shell
    den2 = shell - 1
    if den1 == 0 or den2 == 0:
        raise SingularParameterError(f"Singular plasmonic configuration c={cfg.c_n}, eps+i*delta={shell}")
    return ADeltaPair((cfg.c_n + shell) / (2 * den1), (1 + shell) / (2 * den2))


def g_i_from_g_e(n: int, g_e: complex, geom: ShellGeometry) -> complex:
    return geom.ratio ** (n - 1) * g_e


def _xi(n: int) -> float:
    return 3 / (4 * n + 2)


def mode_denominator(n: int, geom: ShellGeometry, cfg: PlasmonicConfig, lame: LameParams) -> complex:
    a = a_delta(cfg)
    xi = _xi(n)
    d1mu = sl_T_coefficient(n, lame) * lame.mu
    return (xi - a.a1) * (xi - a.a2) + d1mu ** 2 * (n - 1) * (n + 2) * geom.ratio ** (2 * n + 1)


def _check_mode(n: int, m: int = 0):
    if n < 2:
        raise DomainError(f"Mode solves need n >= 2, got {n}")
    if abs(m) > n:
        raise DomainError(f"Order {m} exceeds degree {n}")


def solve_mode(n: int, m: int, g_e: complex, geom: ShellGeometry, cfg: PlasmonicConfig,
               lame: LameParams) -> Tuple[complex, complex]:
    """Closed-form (phi_i, phi_e) of one T mode"""
    _check_mode(n, m)
    geom.require_shell()
    d = mode_denominator(n, geom, cfg, lame)
    if d == 0:
        raise ExactResonanceError(f"Mode n={n} is exactly resonant (D = 0) for {cfg}")
    a = a_delta(cfg)
    xi = _xi(n)
    rho = geom.ratio
    d1mu = sl_T_coefficient(n, lame) * lame.mu
    phi_i = g_e * (a.a2 - xi + d1mu * (n - 1)) * rho ** (n - 1) / d
    phi_e = -g_e * (xi - a.a1 + d1mu * (n + 2) * rho ** (2 * n + 1)) / d
    return complex(phi_i), complex(phi_e)


def solve_mode_fixed(n: int, m: int, g_e: complex, geom: ShellGeometry, c_n: float, eps_n: float,
                     delta: float, lame: LameParams) -> Tuple[complex, complex]:
    """Mode solve for a fixed (c, eps) pair, without resonant retuning"""
    return solve_mode(n, m, g_e, geom, PlasmonicConfig.fixed(c_n, eps_n, delta), lame)


def assemble_mode_system(n: int, g_e: complex, geom: ShellGeometry, cfg: PlasmonicConfig,
                         lame: LameParams) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix and right-hand side of the 2x2 interface system for one mode"""
    _check_mode(n)
    geom.require_shell()
    a = a_delta(cfg)
    xi = _xi(n)
    rho = geom.ratio
    d1mu = sl_T_coefficient(n, lame) * lame.mu
    matrix = np.array([
        [xi - a.a1, d1mu * (n - 1) * rho ** (n - 1)],
        [-d1mu * (n + 2) * rho ** (n + 2), xi - a.a2],
    ], dtype=complex)
    rhs = -np.array([g_i_from_g_e(n, g_e, geom), g_e], dtype=complex)
    return matrix, rhs


def solve_mode_linear(n: int, g_e: complex, geom: ShellGeometry, cfg: PlasmonicConfig,
                      lame: LameParams) -> Tuple[complex, complex]:
    """Independent path: numpy.linalg.solve on the assembled system"""
    matrix, rhs = assemble_mode_system(n, g_e, geom, cfg, lame)
    phi_i, phi_e = np.linalg.solve(matrix, rhs)
    return complex(phi_i), complex(phi_e)


def solve(src: SourceSpectrum, geom: ShellGeometry, cfg: PlasmonicConfig, lame: LameParams) -> DensitySolution:
    sol = DensitySolution.empty()
    for (n, m), g_e in src.items():
        phi_i, phi_e = solve_mode(n, m, g_e, geom, cfg, lame)
        idx = ModeIndex(ModeFamily.T, n, m)
        sol.phi_i[idx] = phi_i
        sol.phi_e[idx] = phi_e
    return sol


@dataclass(frozen=True)
class RadialAmplitudes:
    """Scaled radial amplitudes of one mode.

    With p = d1 r_i phi_i, q = d1 r_e phi_e and s = g_e r_e / (mu (n-1)):
    core  (p (r/r_i)^n + q (r/r_e)^n) T
    shell (p (r_i/r)^(n+1) + (q + s) (r/r_e)^n) T   (s only with the source)
    outer (p (r_i/r)^(n+1) + q (r_e/r)^(n+1)) T
    """
    n: int
    p: complex
    q: complex
    s: complex

    def profile(self, r: np.ndarray, geom: ShellGeometry, include_source: bool,
                region: Optional[str] = None) -> np.ndarray:
        n = self.n
        src = self.s if include_source else 0j
        # branches not selected by np.where may overflow for large n
        with np.errstate(over='ignore', invalid='ignore'):
            shell = self.p * (geom.r_i / r) ** (n + 1) + (self.q + src) * (r / geom.r_e) ** n
            if region == 'shell':
                return shell
            core = self.p * (r / geom.r_i) ** n + (self.q + src) * (r / geom.r_e) ** n
            outer = self.p * (geom.r_i / r) ** (n + 1) + self.q * (geom.r_e / r) ** (n + 1)
        return np.where(r < geom.r_i, core, np.where(r <= geom.r_e, shell, outer))


def radial_amplitudes(idx: ModeIndex, sol: DensitySolution, src: SourceSpectrum,
                      geom: ShellGeometry, lame: LameParams) -> RadialAmplitudes:
    n = idx.n
    d1 = sl_T_coefficient(n, lame)
    g_e = src.coeffs.get((n, idx.m), 0j)
    return RadialAmplitudes(
        n=n,
        p=d1 * geom.r_i * sol.phi_i[idx],
        q=d1 * geom.r_e * sol.phi_e[idx],
        s=g_e * geom.r_e / (lame.mu * (n - 1)),
    )


def _sum_modes(sol, src, geom, lame, x, include_source, region=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    safe_r = np.where(r == 0, 1.0, r)
    xhat = unit_vectors(x)
    total = np.zeros(x.shape, dtype=complex)
    modes = set(sol.modes())
    if include_source:
        modes |= {ModeIndex(ModeFamily.T, n, m) for (n, m) in src.coeffs}
    for idx in sorted(modes):
        amps = radial_amplitudes(idx, sol, src, geom, lame)
        radial = amps.profile(safe_r, geom, include_source, region)
        radial = np.where(r == 0, 0.0, radial)
        total = total + radial[..., None] * trace_mode(idx, lame, xhat)
    return total


def field_eval(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry, lame: LameParams,
               x: PointLike, include_source: bool = False) -> np.ndarray:
    """u_delta - F everywhere, plus F inside B_{r_e} when include_source is set"""
    return _sum_modes(sol, src, geom, lame, positions(x), include_source)


def shell_field(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry, lame: LameParams,
                x: np.ndarray, include_source: bool = True) -> np.ndarray:
    """Shell-region series continued to all x; smooth for finite differences"""
    return _sum_modes(sol, src, geom, lame, x, include_source, region='shell')


def modal_energies(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry, delta: float,
                   lame: LameParams, include_source: bool = True) -> Dict[int, float]:
    """Dissipated energy per degree, from the traction identity on the two interfaces"""
    mu = lame.mu.real
    rho = geom.ratio
    per_degree: Dict[int, List[float]] = {}
    for idx in sol.modes():
        n = idx.n
        amps = radial_amplitudes(idx, sol, src, geom, lame)
        b = amps.q + (amps.s if include_source else 0j)
        power = mu * n * (n + 1) * (1 - rho ** (2 * n + 1)) * (
            (n - 1) * geom.r_e * abs(b) ** 2 + (n + 2) * geom.r_i * abs(amps.p) ** 2)
        per_degree.setdefault(n, []).append(0.5 * delta * power)
    return {n: math.fsum(values) for n, values in sorted(per_degree.items())}


def energy_estimate(n0: int, g_values: Iterable[complex], delta: float, rho: float) -> float:
    """Resonant-mode estimate sum_m delta |g|^2 / (n0 (delta^2 + rho^(2 n0)))"""
    return math.fsum(delta * abs(g) ** 2 / (n0 * (delta ** 2 + rho ** (2 * n0))) for g in g_values)


def nonresonant_bound(src: SourceSpectrum, n0: int, rho: float) -> float:
    """delta-independent bound on the energy carried by degrees other than n0"""
    terms = []
    for (n, _), g in src.items():
        if n == n0:
            continue
        terms.append(abs(g) ** 2 / n * (n ** 2 / (n - n0) ** 2 + n ** 4 / (n - n0) ** 4 * rho ** (2 * n)))
    return math.fsum(terms)


def farfield_sample(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry,
                    lame: LameParams) -> float:
    """max |u_delta - F| over fixed directions at radius 1.05 r_e^2 / r_i"""
    points = FARFIELD_FACTOR * geom.cloak_radius * FARFIELD_DIRECTIONS
    values = field_eval(sol, src, geom, lame, points)
    return float(np.max(np.linalg.norm(values, axis=-1)))


def _auto_rule(max_degree: int) -> QuadratureRule:
    n_theta = max(max_degree + 4, 8)
    return QuadratureRule(n_theta, 2 * n_theta + 2)


def quadrature_energy(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry, delta: float,
                      lame: LameParams, rule: Optional[QuadratureRule] = None, n_radial: int = 24,
                      include_source: bool = True) -> float:
    degrees = sol.degrees()
    if not degrees:
        return 0.0
    rule = rule or _auto_rule(max(degrees))
    return quad_energy_shell(
        lambda x: shell_field(sol, src, geom, lame, x, include_source),
        lame, delta, geom, rule, n_radial)


def energy(sol: DensitySolution, src: SourceSpectrum, geom: ShellGeometry, cfg: PlasmonicConfig,
           lame: LameParams, quadrature: Union[QuadratureRule, str, None] = 'auto',
           n_radial: int = 24, include_source: bool = True) -> EnergyReport:
    """Dissipated energy of u_delta in the shell, by mode sum and by volume quadrature.

    quadrature='auto' runs the volume quadrature for solutions up to degree 8,
    a QuadratureRule forces it, None skips it. The volume path only keeps the
    degrees carrying at least 1e-10 of the modal energy.
    """
    per_degree = modal_energies(sol, src, geom, cfg.delta, lame, include_source)
    total = math.fsum(per_degree.values())
    dominant = max(per_degree, key=per_degree.get) if total > 0 else None

    energy_quad = None
    if quadrature is not None and per_degree:
        significant = [n for n, e in per_degree.items() if e >= QUAD_SIGNIFICANT * total] or list(per_degree)
        top = max(significant)
        if quadrature != 'auto' or top <= QUAD_AUTO_MAX_DEGREE:
            rule = None if quadrature == 'auto' else quadrature
            kept = DensitySolution(
                CoefficientSpectrum({i: c for i, c in sol.phi_i.items() if i.n in significant}),
                CoefficientSpectrum({i: c for i, c in sol.phi_e.items() if i.n in significant}))
            kept_src = SourceSpectrum({k: g for k, g in src.items() if k[0] in significant}, src.source_radius)
            energy_quad = quadrature_energy(kept, kept_src, geom, cfg.delta, lame, rule, n_radial,
                                            include_source)

    estimate = 0.0
    bound = None
    if cfg.n0 is not None and cfg.delta > 0:
        estimate = energy_estimate(cfg.n0, [g for _, g in src.of_degree(cfg.n0)], cfg.delta, geom.ratio)
        bound = nonresonant_bound(src, cfg.n0, geom.ratio)

    return EnergyReport(
        delta=cfg.delta,
        n0=cfg.n0,
        c_n=cfg.c_n,
        eps_n=cfg.eps_n,
        energy_modal=total,
        energy_quadrature=energy_quad,
        energy_estimate=estimate,
        dominant_n=dominant,
        farfield_sample=farfield_sample(sol, src, geom, lame) if len(sol.modes()) else 0.0,
        nonresonant_bound=bound,
        n_max=max(per_degree) if per_degree else None,
    )


def choose_n0(delta: float, geom: ShellGeometry) -> int:
    """n0 with rho^n0 < delta <= rho^(n0-1), never below 2"""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    geom.require_shell()
    rho = geom.ratio
    n0 = max(int(math.floor(math.log(delta) / math.log(rho))) + 1, 1)
    while rho ** n0 >= delta:
        n0 += 1
    while n0 > 1 and rho ** (n0 - 1) < delta:
        n0 -= 1
    if n0 < 2:
        logger.info(f"delta={delta} > rho={rho}: resonant degree raised from 1 to 2")
        n0 = 2
    return n0


def critical_radius(geom: ShellGeometry) -> float:
    return geom.critical_radius


def synth_source(r_s: float, geom: ShellGeometry, lame: LameParams, profile: str = 'monopole-line',
                 amplitude: float = 1.0, spread_m: bool = False, n_max: int = MAX_DEGREE,
                 floor: float = 1e-280) -> SourceSpectrum:
    """Tractions g_n = kappa mu (n-1) r_e^(n-1) r_s^(-n), whose potential converges up to r_s"""
    if r_s <= geom.r_e:
        raise DomainError(f"Source radius {r_s} must exceed r_e={geom.r_e}")
    if profile != 'monopole-line':
        raise DomainError(f"Unknown source profile {profile!r}")
    coeffs = {}
    if amplitude == 0:
        return SourceSpectrum(coeffs, r_s)
    for n in range(2, n_max + 1):
        g = amplitude * lame.mu * (n - 1) * (geom.r_e / r_s) ** n / geom.r_e
        if abs(g) < floor:
            break
        if spread_m:
            for m in range(-n, n + 1):
                coeffs[(n, m)] = g / (2 * n + 1)
        else:
            coeffs[(n, 0)] = g
    return SourceSpectrum(coeffs, r_s)


@dataclass(frozen=True)
class RootTest:
    n: int
    value: float
    threshold: float

    @property
    def predicts_resonance(self) -> bool:
        return self.value > self.threshold


def source_root_test(src: SourceSpectrum, geom: ShellGeometry) -> RootTest:
    """(sum_m |g| / (n r_e^(n-1)))^(1/n) at the largest degree, against 1/r*"""
    if src.is_empty:
        raise DomainError("Root test needs a nonempty source")
    n = max(src.degrees())
    total = math.fsum(abs(g) for _, g in src.of_degree(n))
    # log form keeps r_e^(n-1) finite for large n
    log_value = (math.log(total) - math.log(n) - (n - 1) * math.log(geom.r_e)) / n if total > 0 else -math.inf
    return RootTest(n, math.exp(log_value), 1 / geom.critical_radius)


@dataclass(frozen=True)
class BandRow:
    rho: float
    delta: float
    n0: int
    ratio: float


@dataclass(frozen=True)
class DenominatorBand:
    rows: Tuple[BandRow, ...]

    @property
    def lower(self) -> float:
        return min(row.ratio for row in self.rows)

    @property
    def upper(self) -> float:
        return max(row.ratio for row in self.rows)

    @property
    def spread(self) -> float:
        return self.upper / self.lower

    @property
    def constant(self) -> float:
        """Smallest C with every ratio in [1/C, C]"""
        return max(self.upper, 1 / self.lower)


def denominator_band(rhos: Sequence[float], deltas: Sequence[float], lame: LameParams) -> DenominatorBand:
    """|D(n0, delta)| / (delta^2 + rho^(2 n0)) at resonant parameters, n0 per choose_n0"""
    rows = []
    for rho in rhos:
        geom = ShellGeometry(rho, 1.0)
        for delta in deltas:
            n0 = choose_n0(delta, geom)
            cfg = PlasmonicConfig.resonant(n0, delta)
            d = mode_denominator(n0, geom, cfg, lame)
            rows.append(BandRow(rho, delta, n0, abs(d) / (delta ** 2 + rho ** (2 * n0))))
    return DenominatorBand(tuple(rows))


def resonant_deltas(geom: ShellGeometry, k_values: Iterable[int] = range(2, 11)) -> List[float]:
    """delta_k = rho^(k + 1/2), halfway between consecutive resonance thresholds"""
    return [geom.ratio ** (k + 0.5) for k in k_values]


def validate_delta_grid(deltas: Sequence[float]) -> List[float]:
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise DomainError("delta grid is empty")
    if any(not 0 < d < 1 for d in deltas):
        raise DomainError(f"delta values must lie in (0, 1): {deltas}")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError(f"delta grid must be strictly decreasing: {deltas}")
    return deltas


@dataclass(frozen=True)
class SweepPoint:
    geom: ShellGeometry
    lame: LameParams
    r_s: float
    delta: float
    n0: int
    amplitude: float = 1.0
    spread_m: bool = False
    fixed: Optional[Tuple[float, float]] = None
    quadrature: Union[QuadratureRule, str, None] = None


def truncation_degree(per_degree: Dict[int, float], n0: int) -> int:
    """First degree past max(n0 + 20, 40) whose contribution is below 1e-14 of the running total"""
    floor_degree = max(n0 + 20, 40)
    running = 0.0
    last = floor_degree
    for n, e in per_degree.items():
        running += e
        last = n
        if n >= floor_degree and e < TRUNCATION_FLOOR * running:
            return n
    return last


def solve_truncated(src: SourceSpectrum, geom: ShellGeometry, cfg: PlasmonicConfig, lame: LameParams,
                    extend: Optional[Callable[[int], SourceSpectrum]] = None
                    ) -> Tuple[DensitySolution, SourceSpectrum, float]:
    """Solve every degree of src, then keep the degrees up to the truncation point.

    Returns the truncated solution and source with the relative energy change
    seen when the truncation degree is doubled. `extend(n)` rebuilds the source
    out to degree n for that audit; without it src is taken as complete. If the
    audit degree passes MAX_DEGREE, the energy share of the last kept degree is
    returned instead, with an AccuracyWarning.
    """
    full = solve(src, geom, cfg, lame)
    per_degree = modal_energies(full, src, geom, cfg.delta, lame)
    if not per_degree:
        return full, src, 0.0

    n0 = cfg.n0 if cfg.n0 is not None else 2
    n_trunc = truncation_degree(per_degree, n0)
    n_audit = 2 * n_trunc
    e_trunc = math.fsum(e for n, e in per_degree.items() if n <= n_trunc)
    audit = per_degree
    if extend is not None and n_audit > max(per_degree):
        if n_audit > MAX_DEGREE:
            share = per_degree[n_trunc] / e_trunc if e_trunc > 0 else 0.0
            warn(f"Truncation audit needs degree {n_audit} > {MAX_DEGREE}; "
                 f"degree {n_trunc} still carries {share:.2e} of the energy", AccuracyWarning)
            return full.restricted(n_trunc), src.truncated(n_trunc), share
        wider = extend(n_audit)
        audit = modal_energies(solve(wider, geom, cfg, lame), wider, geom, cfg.delta, lame)

    e_audit = math.fsum(e for n, e in audit.items() if n <= n_audit)
    change = abs(e_audit - e_trunc) / e_audit if e_audit > 0 else 0.0
    return full.restricted(n_trunc), src.truncated(n_trunc), change


def source_extender(r_s: float, geom: ShellGeometry, lame: LameParams, profile: str = 'monopole-line',
                    amplitude: float = 1.0, spread_m: bool = False) -> Callable[[int], SourceSpectrum]:
    """synth_source with everything but the degree cap fixed"""
    return lambda n_max: synth_source(r_s, geom, lame, profile=profile, amplitude=amplitude,
                                      spread_m=spread_m, n_max=n_max)


def run_sweep_point(point: SweepPoint) -> EnergyReport:
    if point.fixed is None:
        cfg = PlasmonicConfig.resonant(point.n0, point.delta)
    else:
        cfg = PlasmonicConfig(point.n0, point.fixed[0], point.fixed[1], point.delta)
    extend = source_extender(point.r_s, point.geom, point.lame, amplitude=point.amplitude,
                             spread_m=point.spread_m)
    src = extend(MAX_DEGREE)
    sol, kept, change = solve_truncated(src, point.geom, cfg, point.lame, extend)
    report = energy(sol, kept, point.geom, cfg, point.lame, quadrature=point.quadrature)
    logger.info(f"delta={point.delta:.3e} n0={point.n0}: E={report.energy_modal:.6e}, "
                f"far field {report.farfield_sample:.4e}, n_max={max(kept.degrees(), default=0)}")
    return replace(report, truncation_change=change)


@dataclass(frozen=True)
class CalrSweep:
    verdict: Verdict
    reports: Tuple[EnergyReport, ...]
    r_s: float
    critical_radius: float
    energy_ratio: Optional[float]
    energy_growth: Optional[float]
    farfield_ratio: Optional[float]
    monotone: bool

    def summary_record(self) -> dict:
        return {
            'verdict': self.verdict.value,
            'r_s': self.r_s,
            'critical_radius': self.critical_radius,
            'energy_ratio': self.energy_ratio,
            'energy_growth': self.energy_growth,
            'farfield_ratio': self.farfield_ratio,
            'monotone': self.monotone,
            'points': len(self.reports),
        }


def _classify(geom: ShellGeometry, r_s: float, deltas: List[float], energies: List[float]) -> Verdict:
    if len(deltas) < 2 or math.log10(deltas[0] / deltas[-1]) < MIN_GRID_DECADES:
        return Verdict.INSUFFICIENT_GRID
    if math.isclose(r_s, geom.critical_radius, rel_tol=1e-12):
        return Verdict.BOUNDARY
    if energies[0] > 0 and energies[-1] / energies[0] > RESONANT_RATIO:
        return Verdict.RESONANT
    return Verdict.BOUNDED


def classify_calr(geom: ShellGeometry, lame: LameParams, r_s: float, delta_grid: Sequence[float],
                  retune: bool = True, n0: Optional[int] = None, amplitude: float = 1.0,
                  spread_m: bool = False, quadrature: Union[QuadratureRule, str, None] = None,
                  workers: int = 1) -> CalrSweep:
    """Run the transmission pipeline along a decreasing delta grid and classify the response.

    Resonant: E(delta_min) / E(delta_max) > 1e3 on a grid spanning at least
    four decades. Otherwise bounded, unless r_s sits on the critical radius.
    """
    geom.require_shell()
    deltas = validate_delta_grid(delta_grid)
    fixed = None
    if not retune:
        base_n0 = n0 if n0 is not None else choose_n0(deltas[0], geom)
        fixed = plasmonic_params(base_n0)
    points = []
    for delta in deltas:
        point_n0 = choose_n0(delta, geom) if retune else base_n0
        points.append(SweepPoint(geom, lame, r_s, delta, point_n0, amplitude, spread_m, fixed, quadrature))

    logger.info(f"CALR sweep: r_s={r_s}, r*={geom.critical_radius:.6f}, {len(points)} delta values")
    if workers > 1 and len(points) > 1:
        with multiprocessing.Pool(processes=min(workers, len(points))) as pool:
            reports = pool.map(run_sweep_point, points)
    else:
        reports = [run_sweep_point(point) for point in points]

    energies = [report.energy_modal for report in reports]
    verdict = _classify(geom, r_s, deltas, energies)
    reports = tuple(replace(report, verdict=verdict) for report in reports)

    farfield = [report.farfield_sample for report in reports]
    sweep = CalrSweep(
        verdict=verdict,
        reports=reports,
        r_s=r_s,
        critical_radius=geom.critical_radius,
        energy_ratio=energies[-1] / energies[0] if energies[0] > 0 else None,
        energy_growth=max(energies) / energies[0] if energies[0] > 0 else None,
        farfield_ratio=max(farfield) / min(farfield) if min(farfield) > 0 else None,
        monotone=all(b > a for a, b in zip(energies, energies[1:])),
    )
    logger.info(f"CALR verdict for r_s={r_s}: {verdict.value}")
    return sweep
