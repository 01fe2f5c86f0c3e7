"""Closed-form single-layer and Neumann-Poincaré actions on sphere modes.

Every operator here is diagonal in the T/M/N basis, so each action is a
scalar multiplier per mode. N modes are indexed by their own subscript k
(trace built from Y_{k-1}); the eigenvalue of N_k is the third family's
formula evaluated at degree k.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from src.errors import DomainError, SingularParameterError
from src.harmonics import (CoefficientSpectrum, ModeFamily, ModeIndex, PointLike, positions,
                           a_nm, exterior_T, solid_mode)
from src.kelvin import LameParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NPEigenvalue:
    family: ModeFamily
    n: int
    value: complex
    limit: complex

    def as_row(self) -> dict:
        return {
            'family': self.family.value,
            'n': self.n,
            'eigenvalue_re': self.value.real,
            'eigenvalue_im': self.value.imag,
            'limit_value': self.limit.real,
        }


@dataclass(frozen=True)
class LayerAction:
    """Elastic single layer of T_n^m on the sphere of radius r0.

    Inside: interior_coeff * solid T mode. Outside:
    exterior_coeff * grad(r^-(n+1) Y) x x, which decays like r^-exterior_degree.
    """
    mode: ModeIndex
    r0: float
    interior_coeff: complex
    exterior_degree: int
    exterior_coeff: complex

    def evaluate(self, x, lame: LameParams) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        inside = self.interior_coeff * solid_mode(self.mode, lame, x)
        outside = self.exterior_coeff * exterior_T(self.mode.n, self.mode.m, np.where(
            (r == 0)[..., None], 1.0, x))
        return np.where((r <= self.r0)[..., None], inside, outside)


@dataclass(frozen=True)
class DecompositionTerms:
    """Per-mode multipliers of the three terms in the split of K*"""
    elastic_sl: complex
    scalar_sl: complex
    curl_grad: complex
    total: complex


def _check_family(family) -> ModeFamily:
    return family if isinstance(family, ModeFamily) else ModeFamily.from_str(family)


def eigen_degree(idx: ModeIndex) -> int:
    """Degree at which the eigenvalue formula is evaluated for idx.

    The identity map: N_k pairs with the third family's formula at k, not k-1.
    """
    return idx.n


def np_eigenvalue(family, n: int, lame: LameParams) -> complex:
    family = _check_family(family)
    if n < 1:
        raise DomainError(f"Eigenvalue degree must be >= 1, got {n}")
    if family is ModeFamily.T:
        return complex(3 / (4 * n + 2))
    lam, mu = lame.lam, lame.mu
    den = 2 * (lam + 2 * mu) * (4 * n * n - 1)
    if den == 0:
        raise SingularParameterError(f"lambda + 2*mu vanishes for lambda={lam}, mu={mu}")
    if family is ModeFamily.M:
        return (3 * lam - 2 * mu * (2 * n * n - 2 * n - 3)) / den
    return (-3 * lam + 2 * mu * (2 * n * n + 2 * n - 3)) / den


def np_limit(family, lame: LameParams) -> complex:
    """Accumulation point of the family's eigenvalues as n grows"""
    family = _check_family(family)
    if family is ModeFamily.T:
        return 0j
    half = lame.mu / (2 * (lame.lam + 2 * lame.mu))
    return -half if family is ModeFamily.M else half


def np_spectrum(lame: LameParams, n_max: int, families: Iterable = tuple(ModeFamily),
                n_min: int = 1) -> List[NPEigenvalue]:
    rows = []
    for family in families:
        family = _check_family(family)
        limit = np_limit(family, lame)
        for n in range(n_min, n_max + 1):
            rows.append(NPEigenvalue(family, n, np_eigenvalue(family, n, lame), limit))
    return rows


def scalar_sl_on_mode(idx: ModeIndex, r0: float = 1.0) -> float:
    """Multiplier of the scalar single layer on a trace mode of the sphere of radius r0"""
    _check_radius(r0)
    n = idx.n
    if idx.family is ModeFamily.T:
        return -r0 / (2 * n + 1)
    if idx.family is ModeFamily.M:
        return -r0 / (2 * n - 1)
    return -r0 / (2 * n + 1)


def sl_T_coefficient(n: int, lame: LameParams) -> complex:
    """d1 = -1/(mu(2n+1))"""
    return -1 / (lame.mu * (2 * n + 1))


def elastic_sl_on_T(n: int, m: int, r0: float, lame: LameParams, x: PointLike) -> np.ndarray:
    return elastic_sl_on_T_action(n, m, r0, lame).evaluate(positions(x), lame)


def elastic_sl_on_T_action(n: int, m: int, r0: float, lame: LameParams) -> LayerAction:
    _check_radius(r0)
    d1 = sl_T_coefficient(n, lame)
    return LayerAction(
        mode=ModeIndex(ModeFamily.T, n, m),
        r0=r0,
        interior_coeff=d1 / r0 ** (n - 1),
        exterior_degree=n + 1,
        exterior_coeff=d1 * r0 ** (n + 2),
    )


def elastic_sl_on_M(n: int, m: int, r0: float, lame: LameParams) -> complex:
    """r0 * c, with S[M_n^m] = c grad(r^n Y_n^m) inside the unit sphere.

    On radius r0 the interior field is r0 * c * grad(r^n Y)(x/r0).
    """
    ModeIndex(ModeFamily.M, n, m)  # validates n, m
    _check_radius(r0)
    b1 = lame.coeffs.b1
    return -r0 * (0.5 + 3 / (2 * (2 * n - 1)) + b1 * n / (2 * n - 1)) / (lame.mu * (2 * n + 1))


def elastic_sl_on_N(n_plus_1: int, m: int, r0: float, lame: LameParams) -> complex:
    """r0 * c, where c multiplies the solid N_{n+1}^m mode inside the unit sphere"""
    ModeIndex(ModeFamily.N, n_plus_1, m)  # validates n, m
    _check_radius(r0)
    n = n_plus_1 - 1
    lam, mu = lame.lam, lame.mu
    return -r0 * (n * lam + (3 * n + 1) * mu) / ((2 * n + 3) * (2 * n + 1) * (2 * mu + lam) * mu)


def elastic_sl_coefficient(idx: ModeIndex, lame: LameParams) -> complex:
    """Unit-sphere interior coefficient of the elastic single layer of a trace mode"""
    if idx.family is ModeFamily.T:
        return sl_T_coefficient(idx.n, lame)
    if idx.family is ModeFamily.M:
        return elastic_sl_on_M(idx.n, idx.m, 1.0, lame)
    return elastic_sl_on_N(idx.n, idx.m, 1.0, lame)


def sl_trace_coefficient(idx: ModeIndex, r0: float, lame: LameParams) -> complex:
    """Multiplier of the elastic single layer on the trace mode at radius r0"""
    _check_radius(r0)
    return r0 * elastic_sl_coefficient(idx, lame)


def interior_traction_factor(idx: ModeIndex, lame: LameParams) -> complex:
    """Traction of the solid mode on its sphere, as a multiple of the trace"""
    n, mu = idx.n, lame.mu
    if idx.family is ModeFamily.T:
        return mu * (n - 1)
    if idx.family is ModeFamily.M:
        return 2 * mu * (n - 1)
    return mu * (2 * (2 * n - 1) / a_nm(n, lame) - 3)


def np_from_traction(idx: ModeIndex, lame: LameParams) -> complex:
    """Eigenvalue recovered from the interior traction jump: 1/2 + c * factor"""
    return 0.5 + elastic_sl_coefficient(idx, lame) * interior_traction_factor(idx, lame)


def pv_curl_grad_coefficient(idx: ModeIndex) -> float:
    """Principal value of curl S[nu x phi] - grad S[nu . phi] on the sphere, per mode"""
    if idx.family is ModeFamily.T:
        return -1 / (2 * (2 * idx.n + 1))
    if idx.family is ModeFamily.M:
        return 0.5
    return -0.5


def np_decomposition_terms(idx: ModeIndex, lame: LameParams, r0: float = 1.0) -> DecompositionTerms:
    _check_radius(r0)
    b1 = lame.coeffs.b1
    elastic = -(3 * lame.mu / r0) * sl_trace_coefficient(idx, r0, lame)
    scalar = (1.5 + b1 / 2) / r0 * scalar_sl_on_mode(idx, r0)
    curl_grad = -b1 * pv_curl_grad_coefficient(idx)
    return DecompositionTerms(elastic, scalar, curl_grad, elastic + scalar + curl_grad)


def np_apply(spec: CoefficientSpectrum, lame: LameParams, r0: float = 1.0) -> CoefficientSpectrum:
    _check_radius(r0)
    return spec.map(lambda idx: np_eigenvalue(idx.family, eigen_degree(idx), lame))


def np_apply_decomposed(spec: CoefficientSpectrum, lame: LameParams, r0: float = 1.0) -> CoefficientSpectrum:
    return spec.map(lambda idx: np_decomposition_terms(idx, lame, r0).total)


def _check_radius(r0: float):
    if not r0 > 0:
        raise DomainError(f"Sphere radius must be positive, got {r0}")
